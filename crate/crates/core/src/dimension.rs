//! Finite-scale estimates of L^q dimensions from samples or weighted atoms.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ifs::{ComplexVal, IfsSystem};
use crate::measure::AtomicMeasure2D;
use crate::stats::{geometric_ladder, linear_fit, t_quantile_975, KahanSum};

/// Points to estimate from: equally weighted samples or a weighted atomic measure.
#[derive(Debug, Clone, Copy)]
pub enum DqInput<'a> {
    Samples(&'a [ComplexVal]),
    Atoms(&'a AtomicMeasure2D),
}

impl DqInput<'_> {
    fn points(&self) -> &[ComplexVal] {
        match self {
            DqInput::Samples(p) => p,
            DqInput::Atoms(m) => &m.points,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DqEstimator {
    BoxCounting,
    CorrelationSum,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DqEstimate {
    pub q: f64,
    pub estimator: DqEstimator,
    pub dq: f64,
    pub stderr: f64,
    pub ci95: (f64, f64),
    pub r2: f64,
    /// `(δ, S(δ))` for every scale used in the fit.
    pub moments: Vec<(f64, f64)>,
    pub n_points: usize,
}

impl DqEstimate {
    pub fn contains(&self, value: f64) -> bool {
        self.ci95.0 <= value && value <= self.ci95.1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DqConfig {
    pub q: f64,
    pub scale_range: (f64, f64),
    /// Number of geometric scales. `None` gives a ladder of ratio about 2.
    pub n_scales: Option<usize>,
    /// Lower-left corner of every box grid.
    pub anchor: ComplexVal,
}

impl DqConfig {
    /// Grids anchored at the lower-left corner of the bounding disk's square.
    pub fn for_system(system: &IfsSystem, q: f64, scale_range: (f64, f64)) -> Self {
        let d = system.bounding_disk();
        DqConfig {
            q,
            scale_range,
            n_scales: None,
            anchor: d.center - ComplexVal::new(d.radius, d.radius),
        }
    }
}

fn scale_ladder(scale_range: (f64, f64), n_scales: Option<usize>) -> Result<Vec<f64>> {
    let (lo, hi) = scale_range;
    if !(lo > 0.0) || !(hi > lo) || !hi.is_finite() {
        return Err(Error::DegenerateScales(format!(
            "need 0 < delta_min < delta_max, got ({lo}, {hi})"
        )));
    }
    let n = n_scales.unwrap_or_else(|| (hi / lo).log2().round() as usize + 1);
    if n < 3 {
        return Err(Error::DegenerateScales(format!(
            "need at least 3 scales, got {n}"
        )));
    }
    Ok(geometric_ladder(lo, hi, n))
}

fn fit(
    q: f64,
    estimator: DqEstimator,
    moments: Vec<(f64, f64)>,
    divisor: f64,
    n_points: usize,
) -> Result<DqEstimate> {
    let usable: Vec<&(f64, f64)> = moments.iter().filter(|(_, s)| *s > 0.0).collect();
    if usable.len() < 3 {
        return Err(Error::TooFewPoints {
            got: n_points,
            need: n_points + 1,
        });
    }
    let xs: Vec<f64> = usable.iter().map(|(d, _)| d.ln()).collect();
    let ys: Vec<f64> = usable.iter().map(|(_, s)| s.ln()).collect();
    let lf = linear_fit(&xs, &ys)
        .ok_or_else(|| Error::DegenerateScales("scales have no spread".into()))?;
    let dq = lf.slope / divisor;
    let stderr = lf.slope_stderr / divisor.abs();
    let half = t_quantile_975(usable.len() - 2) * stderr;
    Ok(DqEstimate {
        q,
        estimator,
        dq,
        stderr,
        ci95: (dq - half, dq + half),
        r2: lf.r2,
        moments,
        n_points,
    })
}

/// Box-counting estimate of `D_q`: slope of `log Σ_boxes m(box)^q` against
/// `log δ`, divided by `q - 1`. Boxes are half-open `[x, x + δ)`.
///
/// For samples the moment uses the unbiased form
/// `(1/N) Σ n_b ((n_b - 1)/(N - 1))^{q-1}`, which removes the self-pair
/// contribution that otherwise flattens the slope at small `δ`.
pub fn empirical_dq(input: DqInput<'_>, config: &DqConfig) -> Result<DqEstimate> {
    let q = config.q;
    if !(q > 1.0) {
        return Err(Error::QOutOfRange(q));
    }
    let scales = scale_ladder(config.scale_range, config.n_scales)?;
    let points = input.points();
    let n = points.len();
    if n == 0 || (matches!(input, DqInput::Samples(_)) && n < 2) {
        return Err(Error::TooFewPoints { got: n, need: 2 });
    }
    let mut keys: Vec<(i64, i64, u32)> = Vec::with_capacity(n);
    let mut moments = Vec::with_capacity(scales.len());
    for &delta in &scales {
        keys.clear();
        keys.extend(points.iter().enumerate().map(|(k, w)| {
            let d = w - config.anchor;
            ((d.re / delta).floor() as i64, (d.im / delta).floor() as i64, k as u32)
        }));
        keys.sort_unstable();
        let mut acc = KahanSum::new();
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && keys[end].0 == keys[start].0 && keys[end].1 == keys[start].1 {
                end += 1;
            }
            match input {
                DqInput::Samples(_) => {
                    let nb = (end - start) as f64;
                    if nb > 1.0 {
                        acc.add(nb * ((nb - 1.0) / (n as f64 - 1.0)).powf(q - 1.0));
                    }
                }
                DqInput::Atoms(m) => {
                    let mut mass = KahanSum::new();
                    for key in &keys[start..end] {
                        mass.add(m.weights[key.2 as usize]);
                    }
                    acc.add(mass.value().powf(q));
                }
            }
            start = end;
        }
        let s = match input {
            DqInput::Samples(_) => acc.value() / n as f64,
            DqInput::Atoms(_) => acc.value(),
        };
        moments.push((delta, s));
    }
    if matches!(input, DqInput::Atoms(_)) && n == 1 {
        // Every box holds the full mass: the moment is constant.
        return Ok(DqEstimate {
            q,
            estimator: DqEstimator::BoxCounting,
            dq: 0.0,
            stderr: 0.0,
            ci95: (0.0, 0.0),
            r2: 1.0,
            moments,
            n_points: n,
        });
    }
    fit(q, DqEstimator::BoxCounting, moments, q - 1.0, n)
}

/// Correlation-sum estimate of `D_2`: slope of `log C(δ)` against `log δ`,
/// where `C(δ)` is the fraction of distinct pairs at distance `< δ` among the
/// first `max_points` samples.
pub fn correlation_dimension(
    samples: &[ComplexVal],
    scale_range: (f64, f64),
    n_scales: Option<usize>,
    max_points: usize,
) -> Result<DqEstimate> {
    let scales = scale_ladder(scale_range, n_scales)?;
    let pts = &samples[..samples.len().min(max_points)];
    let n = pts.len();
    if n < 2 {
        return Err(Error::TooFewPoints { got: n, need: 2 });
    }
    let cell = scales[scales.len() - 1];
    let origin = pts
        .iter()
        .fold(ComplexVal::new(f64::INFINITY, f64::INFINITY), |m, w| {
            ComplexVal::new(m.re.min(w.re), m.im.min(w.im))
        });
    let key = |w: &ComplexVal| {
        let d = w - origin;
        ((d.re / cell).floor() as i64, (d.im / cell).floor() as i64)
    };
    let mut order: Vec<((i64, i64), usize)> = pts.iter().enumerate().map(|(k, w)| (key(w), k)).collect();
    order.sort_unstable();
    let cells: Vec<(i64, i64)> = order.iter().map(|(c, _)| *c).collect();
    let range_of = |c: (i64, i64)| {
        let lo = cells.partition_point(|x| *x < c);
        let hi = cells.partition_point(|x| *x <= c);
        lo..hi
    };
    // counts[s] = number of unordered pairs with distance < scales[s].
    let mut counts = vec![0u64; scales.len()];
    let sq: Vec<f64> = scales.iter().map(|d| d * d).collect();
    for &(c, i) in &order {
        for (dx, dy) in [(0, 0), (1, -1), (1, 0), (1, 1), (0, 1)] {
            for &(_, j) in &order[range_of((c.0 + dx, c.1 + dy))] {
                if (dx, dy) == (0, 0) && j <= i {
                    continue;
                }
                let d2 = (pts[i] - pts[j]).norm_sqr();
                let first = sq.partition_point(|s| *s <= d2);
                if first < counts.len() {
                    counts[first] += 1;
                }
            }
        }
    }
    let total_pairs = n as f64 * (n as f64 - 1.0) / 2.0;
    let mut running = 0u64;
    let moments = scales
        .iter()
        .zip(&counts)
        .map(|(d, c)| {
            running += c;
            (*d, running as f64 / total_pairs)
        })
        .collect();
    fit(2.0, DqEstimator::CorrelationSum, moments, 1.0, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::presets::*;
    use crate::measure::{atomic_approx, sample_measure};
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scales() -> (f64, f64) {
        (0.35f64.powi(8), 0.35f64.powi(2))
    }

    #[test]
    fn single_atom_has_dimension_zero() {
        let m = AtomicMeasure2D::dirac(ComplexVal::new(0.3, 0.2));
        let cfg = DqConfig::for_system(&sys_a(), 2.0, scales());
        for q in [1.5, 2.0, 4.0] {
            let est = empirical_dq(DqInput::Atoms(&m), &DqConfig { q, ..cfg }).unwrap();
            assert_eq!(est.dq, 0.0);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = AtomicMeasure2D::dirac(ComplexVal::new(0.0, 0.0));
        let mut cfg = DqConfig::for_system(&sys_a(), 2.0, (0.1, 0.05));
        assert!(matches!(
            empirical_dq(DqInput::Atoms(&m), &cfg),
            Err(Error::DegenerateScales(_))
        ));
        cfg.scale_range = scales();
        cfg.q = 1.0;
        assert!(matches!(
            empirical_dq(DqInput::Atoms(&m), &cfg),
            Err(Error::QOutOfRange(_))
        ));
        cfg.q = 2.0;
        let one = [ComplexVal::new(0.0, 0.0)];
        assert!(matches!(
            empirical_dq(DqInput::Samples(&one), &cfg),
            Err(Error::TooFewPoints { .. })
        ));
    }

    #[test]
    fn default_ladder_has_ratio_about_two() {
        let l = scale_ladder(scales(), None).unwrap();
        assert_eq!(l.len(), 10);
        for w in l.windows(2) {
            let ratio = w[1] / w[0];
            assert!(ratio > 1.8 && ratio < 2.2);
        }
    }

    #[test]
    fn uniform_grid_has_dimension_two() {
        let n = 256;
        let pts: Vec<ComplexVal> = (0..n * n)
            .map(|k| ComplexVal::new((k % n) as f64 + 0.5, (k / n) as f64 + 0.5) / n as f64)
            .collect();
        let w = vec![1.0 / (n * n) as f64; n * n];
        let m = AtomicMeasure2D::new(pts, w, crate::measure::MeasureMeta::Derived { note: "grid".into() })
            .unwrap();
        let cfg = DqConfig {
            q: 2.0,
            scale_range: (1.0 / 64.0, 1.0 / 2.0),
            n_scales: None,
            anchor: ComplexVal::new(0.0, 0.0),
        };
        let est = empirical_dq(DqInput::Atoms(&m), &cfg).unwrap();
        assert!((est.dq - 2.0).abs() < 1e-9, "{est:?}");
    }

    #[test]
    fn atoms_match_closed_form() {
        let s = sys_b();
        let m = atomic_approx(&s, 10).unwrap();
        let cfg = DqConfig::for_system(&s, 2.0, (0.35f64.powi(7), 0.35f64.powi(2)));
        let est = empirical_dq(DqInput::Atoms(&m), &cfg).unwrap();
        assert!((est.dq - 1.14683).abs() < 0.1, "{est:?}");
    }

    #[test]
    fn samples_match_closed_form() {
        for (s, target) in [(sys_a(), 1.32051), (sys_b(), 1.14683)] {
            let samples = sample_measure(&s, 100_000, 30, 7).unwrap();
            let cfg = DqConfig::for_system(&s, 2.0, scales());
            let est = empirical_dq(DqInput::Samples(&samples.points), &cfg).unwrap();
            assert!((est.dq - target).abs() < 0.1, "{est:?}");
            let corr = correlation_dimension(&samples.points, scales(), None, 20_000).unwrap();
            assert!((corr.dq - target).abs() < 0.1, "{corr:?}");
        }
    }

    #[test]
    fn correlation_counts_match_brute_force() {
        let s = sys_a();
        let samples = sample_measure(&s, 600, 30, 3).unwrap();
        let range = (0.01, 0.5);
        let est = correlation_dimension(&samples.points, range, Some(5), 600).unwrap();
        let pts = &samples.points;
        let total = (pts.len() * (pts.len() - 1) / 2) as f64;
        for (delta, frac) in &est.moments {
            let mut c = 0usize;
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    if (pts[i] - pts[j]).norm_sqr() < delta * delta {
                        c += 1;
                    }
                }
            }
            assert!((c as f64 / total - frac).abs() < 1e-15);
        }
    }

    #[test]
    fn invariant_under_shuffle_and_rotation() {
        let s = sys_a();
        let mut pts = sample_measure(&s, 50_000, 30, 11).unwrap().points;
        let cfg = DqConfig::for_system(&s, 2.0, scales());
        let base = empirical_dq(DqInput::Samples(&pts), &cfg).unwrap();
        pts.shuffle(&mut ChaCha8Rng::seed_from_u64(5));
        let shuffled = empirical_dq(DqInput::Samples(&pts), &cfg).unwrap();
        assert_eq!(base.dq, shuffled.dq);
        let rot = ComplexVal::from_polar(1.0, 0.7);
        let rotated: Vec<ComplexVal> = pts.iter().map(|w| w * rot).collect();
        let r = empirical_dq(DqInput::Samples(&rotated), &cfg).unwrap();
        let tol = (base.ci95.1 - base.ci95.0) / 2.0 + (r.ci95.1 - r.ci95.0) / 2.0;
        assert!((base.dq - r.dq).abs() <= tol, "{base:?} {r:?}");
    }
}
