//! Finite approximations of the self-similar measure: depth-`k` atomic
//! measures, chaos-game samples, and the convolution split `ν = μ * ν_{λ^k}`.

use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ifs::{validate_system, ComplexVal, IfsSystem};
use crate::stats::compensated_sum;

pub const DEFAULT_ATOM_BUDGET: usize = 2_000_000;

/// Points per independent RNG stream in [`sample_measure`].
const SAMPLE_CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureMeta {
    /// Atoms `f_u(base)` over all words `u` of the given depth.
    Depth { depth: usize, base: ComplexVal },
    Samples { n: usize, seed: u64, word_length: usize },
    Derived { note: String },
}

/// Weighted point masses in the plane.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomicMeasure2D {
    pub points: Vec<ComplexVal>,
    pub weights: Vec<f64>,
    pub meta: MeasureMeta,
}

impl AtomicMeasure2D {
    pub fn new(points: Vec<ComplexVal>, weights: Vec<f64>, meta: MeasureMeta) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::InvalidParameter(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidParameter("weights must be positive".into()));
        }
        let total = compensated_sum(weights.iter().copied());
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("weights sum to {total}")));
        }
        Ok(AtomicMeasure2D {
            points,
            weights,
            meta,
        })
    }

    /// Unit mass at a single point.
    pub fn dirac(w: ComplexVal) -> Self {
        AtomicMeasure2D {
            points: vec![w],
            weights: vec![1.0],
            meta: MeasureMeta::Derived {
                note: "dirac".into(),
            },
        }
    }

    /// Equal weights on a sample cloud.
    pub fn from_samples(samples: &SampleSet) -> Self {
        let n = samples.points.len();
        AtomicMeasure2D {
            points: samples.points.clone(),
            weights: vec![1.0 / n as f64; n],
            meta: MeasureMeta::Samples {
                n,
                seed: samples.seed,
                word_length: samples.word_length,
            },
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }

    pub fn max_modulus(&self) -> f64 {
        self.points.iter().map(|w| w.norm()).fold(0.0, f64::max)
    }

    /// Exact convolution: atoms `x + y` with weights `p_x q_y`, `self` major.
    pub fn convolve(&self, other: &AtomicMeasure2D) -> AtomicMeasure2D {
        let n = self.len() * other.len();
        let mut points = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for (x, p) in self.points.iter().zip(&self.weights) {
            for (y, q) in other.points.iter().zip(&other.weights) {
                points.push(x + y);
                weights.push(p * q);
            }
        }
        AtomicMeasure2D {
            points,
            weights,
            meta: MeasureMeta::Derived {
                note: "convolution".into(),
            },
        }
    }

    /// Translate every atom.
    pub fn shifted(&self, by: ComplexVal) -> AtomicMeasure2D {
        AtomicMeasure2D {
            points: self.points.iter().map(|w| w + by).collect(),
            weights: self.weights.clone(),
            meta: self.meta.clone(),
        }
    }

    /// CSV with columns `re,im,weight`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "re,im,weight")?;
        for (w, p) in self.points.iter().zip(&self.weights) {
            writeln!(out, "{},{},{}", w.re, w.im, p)?;
        }
        Ok(())
    }
}

fn check_budget(system: &IfsSystem, depth: usize, budget: usize) -> Result<usize> {
    let needed = (system.len() as u128).checked_pow(depth as u32).unwrap_or(u128::MAX);
    if needed > budget as u128 {
        return Err(Error::AtomBudgetExceeded { needed, budget });
    }
    Ok(needed as usize)
}

/// Depth-`depth` atoms `f_u(b)` at the barycenter `b`, words in lexicographic
/// order (first symbol most significant).
pub fn atomic_approx(system: &IfsSystem, depth: usize) -> Result<AtomicMeasure2D> {
    atomic_approx_with_budget(system, depth, DEFAULT_ATOM_BUDGET)
}

pub fn atomic_approx_with_budget(
    system: &IfsSystem,
    depth: usize,
    budget: usize,
) -> Result<AtomicMeasure2D> {
    atomic_approx_from(system, depth, system.barycenter(), budget)
}

/// Depth-`depth` atoms over an arbitrary base point.
///
/// Built by the refinement `atoms_{d+1}[i n + j] = λ atoms_d[j] + a_i`,
/// `weights_{d+1}[i n + j] = p_i weights_d[j]`.
pub fn atomic_approx_from(
    system: &IfsSystem,
    depth: usize,
    base: ComplexVal,
    budget: usize,
) -> Result<AtomicMeasure2D> {
    let total = check_budget(system, depth, budget)?;
    let mut points = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    points.push(base);
    weights.push(1.0);
    for _ in 0..depth {
        let (p, w) = refine(system, &points, &weights);
        points = p;
        weights = w;
    }
    Ok(AtomicMeasure2D {
        points,
        weights,
        meta: MeasureMeta::Depth { depth, base },
    })
}

/// One refinement step `Σ_i p_i (λ · atoms + a_i)`.
pub fn refine(
    system: &IfsSystem,
    points: &[ComplexVal],
    weights: &[f64],
) -> (Vec<ComplexVal>, Vec<f64>) {
    let n = system.len() * points.len();
    let mut out_p = Vec::with_capacity(n);
    let mut out_w = Vec::with_capacity(n);
    for i in 0..system.len() {
        let a = system.translations()[i];
        let pi = system.probs()[i];
        out_p.extend(points.iter().map(|w| system.lambda() * w + a));
        out_w.extend(weights.iter().map(|w| pi * w));
    }
    (out_p, out_w)
}

/// Chaos-game samples of the self-similar measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSet {
    pub points: Vec<ComplexVal>,
    pub seed: u64,
    pub word_length: usize,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let w = 1.0 / self.points.len() as f64;
        writeln!(out, "re,im,weight")?;
        for p in &self.points {
            writeln!(out, "{},{},{}", p.re, p.im, w)?;
        }
        Ok(())
    }
}

/// Smallest `L` with `r^L < 1e-9`.
pub fn default_word_length(system: &IfsSystem) -> usize {
    ((-9.0 * std::f64::consts::LN_10) / system.r().ln()).floor() as usize + 1
}

/// `n` points `f_{i_1 .. i_L}(b)` with i.i.d. symbols drawn from `p`.
///
/// Chunk `c` of the output uses ChaCha stream `c` of the master seed, so the
/// result does not depend on the thread count.
pub fn sample_measure(
    system: &IfsSystem,
    n: usize,
    word_length: usize,
    seed: u64,
) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    if word_length == 0 {
        return Err(Error::InvalidParameter("word_length must be >= 1".into()));
    }
    let dist = WeightedIndex::new(system.probs())
        .map_err(|e| Error::BadProbabilityVector(e.to_string()))?;
    let chunks = n.div_ceil(SAMPLE_CHUNK);
    let points: Vec<ComplexVal> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = SAMPLE_CHUNK.min(n - c * SAMPLE_CHUNK);
            let mut word = vec![0usize; word_length];
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                for slot in word.iter_mut() {
                    *slot = dist.sample(&mut rng);
                }
                // f_{i_1} ∘ ... ∘ f_{i_L}(b), innermost map first.
                let mut w = system.barycenter();
                for &i in word.iter().rev() {
                    w = system.apply(i, w);
                }
                out.push(w);
            }
            out
        })
        .collect();
    Ok(SampleSet {
        points,
        seed,
        word_length,
    })
}

/// The pair `(μ, ν_{λ^k})` with `ν = μ * ν_{λ^k}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvolutionSplit {
    /// Maps `λ^k w + Σ_{j=1}^{k-1} a_{i_j} λ^j` over words of length `k - 1`.
    pub mu: IfsSystem,
    /// Maps `λ^k w + a_i`.
    pub nu_k: IfsSystem,
    /// The split refers to the system conjugated by `w ↦ w + shift`; both
    /// measures describe `ν` translated by `shift`.
    pub shift: ComplexVal,
    /// Translations of the (possibly conjugated) system actually split.
    pub translations: Vec<ComplexVal>,
}

pub fn convolution_split(
    system: &IfsSystem,
    k: usize,
    auto_conjugate: bool,
) -> Result<ConvolutionSplit> {
    if k < 2 {
        return Err(Error::InvalidParameter("k must be >= 2".into()));
    }
    let zero = ComplexVal::new(0.0, 0.0);
    let one = ComplexVal::new(1.0, 0.0);
    let lambda = system.lambda();
    let (translations, shift) = if system.translations().iter().any(|a| *a == zero) {
        (system.translations().to_vec(), zero)
    } else if auto_conjugate {
        // h(w) = w + β with β = -a_0 / (1 - λ) turns a_i into a_i - a_0.
        let a0 = system.translations()[0];
        (
            system.translations().iter().map(|a| a - a0).collect(),
            -a0 / (one - lambda),
        )
    } else {
        return Err(Error::NoZeroTranslation);
    };

    let n = system.len();
    let lambda_k = lambda.powu(k as u32);
    let words = n.pow((k - 1) as u32);
    let mut mu_translations = Vec::with_capacity(words);
    let mut mu_probs = Vec::with_capacity(words);
    for rank in 0..words {
        let word = crate::ifs::Word::from_rank(rank, n, k - 1);
        let mut offset = zero;
        let mut power = lambda;
        let mut weight = 1.0;
        for &i in word.indices() {
            offset += translations[i] * power;
            power *= lambda;
            weight *= system.probs()[i];
        }
        mu_translations.push(offset);
        mu_probs.push(weight);
    }
    // Products of a probability vector sum to 1 only up to rounding.
    let total = compensated_sum(mu_probs.iter().copied());
    mu_probs.iter_mut().for_each(|p| *p /= total);

    Ok(ConvolutionSplit {
        mu: validate_system(lambda_k, &mu_translations, &mu_probs)?,
        nu_k: validate_system(lambda_k, &translations, system.probs())?,
        shift,
        translations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::presets::*;
    use crate::ifs::{cylinder_map, Word};
    use std::collections::BTreeMap;

    fn c(re: f64, im: f64) -> ComplexVal {
        ComplexVal::new(re, im)
    }

    #[test]
    fn depth_zero_and_one() {
        let s = sys_a();
        let d0 = atomic_approx(&s, 0).unwrap();
        assert_eq!(d0.len(), 1);
        assert!(d0.points[0].norm() < 1e-15);
        assert_eq!(d0.weights, vec![1.0]);

        let d1 = atomic_approx(&s, 1).unwrap();
        assert_eq!(d1.len(), 4);
        for (p, a) in d1.points.iter().zip(s.translations()) {
            assert!((p - a).norm() < 1e-15);
        }
        assert!(d1.weights.iter().all(|w| *w == 0.25));
    }

    #[test]
    fn sys_b_depth_two_word_00() {
        let s = sys_b();
        let d2 = atomic_approx(&s, 2).unwrap();
        assert_eq!(d2.len(), 16);
        let b = s.barycenter();
        let expected = c(1.0, 1.0) + s.lambda() * c(1.0, 1.0) + s.lambda() * s.lambda() * b;
        assert!((d2.points[0] - expected).norm() < 1e-14);
        assert!((d2.weights[0] - 0.16).abs() < 1e-15);
        // Every atom equals the cylinder map applied to the barycenter.
        for rank in 0..16 {
            let m = cylinder_map(&s, &Word::from_rank(rank, 4, 2)).unwrap();
            assert!((d2.points[rank] - m.apply(b)).norm() < 1e-14);
            assert!((d2.weights[rank] - m.weight).abs() < 1e-15);
        }
    }

    #[test]
    fn budget_enforced() {
        let err = atomic_approx_with_budget(&sys_a(), 6, 1000).unwrap_err();
        assert!(matches!(err, Error::AtomBudgetExceeded { needed: 4096, budget: 1000 }));
        assert!(atomic_approx(&sys_a(), 11).is_err());
    }

    #[test]
    fn refinement_identity_bit_exact() {
        let s = sys_b();
        for depth in 0..6 {
            let cur = atomic_approx(&s, depth).unwrap();
            let next = atomic_approx(&s, depth + 1).unwrap();
            let n = cur.len();
            for i in 0..s.len() {
                for j in 0..n {
                    let expect = s.lambda() * cur.points[j] + s.translations()[i];
                    assert_eq!(next.points[i * n + j], expect);
                    assert_eq!(next.weights[i * n + j], s.probs()[i] * cur.weights[j]);
                }
            }
        }
    }

    #[test]
    fn atoms_inside_bounding_disk_and_mass_one() {
        for s in [sys_a(), sys_b()] {
            let disk = s.bounding_disk();
            let m = atomic_approx(&s, 8).unwrap();
            assert!(m.points.iter().all(|w| disk.contains(*w, 1e-12)));
            assert!((m.total_mass() - 1.0).abs() < 1e-9);
        }
        let m = atomic_approx(&sys_b(), 10).unwrap();
        assert!((m.total_mass() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sampling_is_deterministic() {
        let s = sys_a();
        let a = sample_measure(&s, 10_000, 20, 7).unwrap();
        let b = sample_measure(&s, 10_000, 20, 7).unwrap();
        assert_eq!(a, b);
        let other = sample_measure(&s, 10_000, 20, 8).unwrap();
        assert_ne!(a.points, other.points);
        // A shorter request is a prefix of a longer one.
        let short = sample_measure(&s, 5000, 20, 7).unwrap();
        assert_eq!(&a.points[..5000], &short.points[..]);
    }

    #[test]
    fn single_sample_is_first_level_image() {
        let s = sys_a();
        let one = sample_measure(&s, 1, 1, 123).unwrap();
        assert!(s.translations().iter().any(|a| (one.points[0] - a).norm() < 1e-15));
        assert!(sample_measure(&s, 0, 1, 1).is_err());
        assert!(sample_measure(&s, 1, 0, 1).is_err());
    }

    #[test]
    fn sample_mean_within_clt_bound() {
        let s = sys_a();
        let samples = sample_measure(&s, 100_000, 30, 42).unwrap();
        let n = samples.len() as f64;
        let mean: ComplexVal = samples.points.iter().sum::<ComplexVal>() / n;
        let var_re = samples.points.iter().map(|w| (w.re - mean.re).powi(2)).sum::<f64>() / (n - 1.0);
        let var_im = samples.points.iter().map(|w| (w.im - mean.im).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.re.abs() < 3.0 * (var_re / n).sqrt());
        assert!(mean.im.abs() < 3.0 * (var_im / n).sqrt());
    }

    #[test]
    fn default_word_length_resolves_1e9() {
        let s = sys_a();
        let l = default_word_length(&s);
        assert!(s.r().powi(l as i32) < 1e-9);
        assert!(s.r().powi(l as i32 - 1) >= 1e-9);
    }

    fn histogram(m: &AtomicMeasure2D, cell: f64) -> BTreeMap<(i64, i64), f64> {
        let mut h = BTreeMap::new();
        for (w, p) in m.points.iter().zip(&m.weights) {
            let key = ((w.re / cell).floor() as i64, (w.im / cell).floor() as i64);
            *h.entry(key).or_insert(0.0) += p;
        }
        h
    }

    fn tv(a: &BTreeMap<(i64, i64), f64>, b: &BTreeMap<(i64, i64), f64>) -> f64 {
        let keys: std::collections::BTreeSet<_> = a.keys().chain(b.keys()).collect();
        0.5 * keys
            .into_iter()
            .map(|k| (a.get(k).unwrap_or(&0.0) - b.get(k).unwrap_or(&0.0)).abs())
            .sum::<f64>()
    }

    #[test]
    fn split_of_conjugated_sys_a() {
        let s = sys_a();
        let shifted = validate_system(
            s.lambda(),
            &s.translations().iter().map(|a| a - s.translations()[0]).collect::<Vec<_>>(),
            s.probs(),
        )
        .unwrap();
        let split = convolution_split(&shifted, 2, false).unwrap();
        assert_eq!(split.mu.len(), 4);
        assert!((split.mu.lambda() - s.lambda() * s.lambda()).norm() < 1e-15);
        for (g, a) in split.mu.translations().iter().zip(shifted.translations()) {
            assert!((g - a * s.lambda()).norm() < 1e-15);
        }
        assert_eq!(split.shift, c(0.0, 0.0));
        assert!(matches!(convolution_split(&s, 2, false), Err(Error::NoZeroTranslation)));
    }

    #[test]
    fn split_convolution_matches_direct_atoms() {
        // Oracle: exact atomic convolution versus direct depth-(k m) atoms.
        for (s, k) in [(sys_b(), 2usize), (sys_a(), 3usize)] {
            let split = convolution_split(&s, k, true).unwrap();
            let conj = validate_system(s.lambda(), &split.translations, s.probs()).unwrap();
            for m in 1..=(6 / k) {
                let mu = atomic_approx(&split.mu, m).unwrap();
                let nk = atomic_approx(&split.nu_k, m).unwrap();
                let conv = mu.convolve(&nk);
                let direct = atomic_approx(&conj, k * m).unwrap();
                for cell in [0.05, 0.013] {
                    assert!(tv(&histogram(&conv, cell), &histogram(&direct, cell)) < 1e-9);
                }
                // Conjugation is a translation of the whole measure.
                let original = atomic_approx(&s, k * m).unwrap().shifted(split.shift);
                for (p, q) in original.points.iter().zip(&direct.points) {
                    assert!((p - q).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn csv_export() {
        let m = atomic_approx(&sys_a(), 1).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("re,im,weight"));
        assert_eq!(text.lines().count(), 5);
        assert_eq!(text.lines().nth(1), Some("1,1,0.25"));
    }
}
