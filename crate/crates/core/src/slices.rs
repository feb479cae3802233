//! Coding of attractor points, the shift `T`, conditional (slice) masses of
//! cylinders and slice local dimensions.
//!
//! For `ν`-typical `w` and `u = i_k(w)`, the slice measure through `w` along
//! direction `z` gives the cylinder `K_u` mass
//! `g_{α^{-k} z}(P_{α^{-k} z} T^k w) / g_z(P_z w) · p_u · r^{-k}`,
//! which is evaluated here with histogram densities and cross-checked against
//! windowed sample counts.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ifs::{closed_form_dims, ComplexVal, IfsSystem, Word};
use crate::measure::{default_word_length, sample_measure, AtomicMeasure2D};
use crate::projection::{projected_density, DensityGrid, Direction};
use crate::stats::{geometric_ladder, linear_fit, median, KahanSum};

/// Reads of histogram densities below this value are rejected.
pub const DENSITY_FLOOR: f64 = 1e-4;

const CONTAINMENT_TOL: f64 = 1e-9;

/// A point together with the first `depth` symbols of its coding.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodedPoint {
    pub w: ComplexVal,
    pub word: Word,
    pub depth: usize,
    /// Smallest distance from `w` to a non-selected sibling disk along the coding.
    pub min_gap_margin: f64,
}

struct Node {
    scale: ComplexVal,
    offset: ComplexVal,
}

fn child_disk(system: &IfsSystem, node: &Node, i: usize) -> (ComplexVal, f64) {
    let disk = system.bounding_disk();
    let scale = node.scale * system.lambda();
    let offset = node.offset + node.scale * system.translations()[i];
    (scale * disk.center + offset, scale.norm() * disk.radius)
}

/// Greedy coding: at each level choose the child cylinder disk containing `w`.
pub fn code_point(system: &IfsSystem, w: ComplexVal, depth: usize) -> Result<CodedPoint> {
    let disk = system.bounding_disk();
    if !disk.contains(w, CONTAINMENT_TOL * disk.radius) {
        return Err(Error::NotInAttractorNeighborhood { level: 0 });
    }
    let mut node = Node {
        scale: ComplexVal::new(1.0, 0.0),
        offset: ComplexVal::new(0.0, 0.0),
    };
    let mut word = Vec::with_capacity(depth);
    let mut margin = f64::INFINITY;
    for level in 1..=depth {
        let children: Vec<(ComplexVal, f64)> =
            (0..system.len()).map(|i| child_disk(system, &node, i)).collect();
        // Normalised distance to each child's center; < 1 means inside.
        let chosen = children
            .iter()
            .enumerate()
            .map(|(i, (c, rad))| (i, (w - c).norm() / rad))
            .filter(|(_, d)| *d <= 1.0 + CONTAINMENT_TOL)
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i)
            .ok_or(Error::NotInAttractorNeighborhood { level })?;
        for (i, (c, rad)) in children.iter().enumerate() {
            if i != chosen {
                margin = margin.min((w - c).norm() - rad);
            }
        }
        let a = system.translations()[chosen];
        node = Node {
            offset: node.offset + node.scale * a,
            scale: node.scale * system.lambda(),
        };
        word.push(chosen);
    }
    Ok(CodedPoint {
        w,
        word: Word::new(word),
        depth,
        min_gap_margin: margin,
    })
}

fn margin_along(system: &IfsSystem, w: ComplexVal, word: &Word) -> f64 {
    let mut node = Node {
        scale: ComplexVal::new(1.0, 0.0),
        offset: ComplexVal::new(0.0, 0.0),
    };
    let mut margin = f64::INFINITY;
    for &chosen in word.indices() {
        for i in (0..system.len()).filter(|i| *i != chosen) {
            let (c, rad) = child_disk(system, &node, i);
            margin = margin.min((w - c).norm() - rad);
        }
        node = Node {
            offset: node.offset + node.scale * system.translations()[chosen],
            scale: node.scale * system.lambda(),
        };
    }
    margin
}

/// `T w = f_{i_1}^{-1}(w)`, dropping the first symbol of the coding.
pub fn shift_t(system: &IfsSystem, point: &CodedPoint) -> Result<CodedPoint> {
    if point.depth == 0 {
        return Err(Error::DepthExhausted);
    }
    let w = system.apply_inverse(point.word.indices()[0], point.w);
    let word = point.word.shifted(1);
    Ok(CodedPoint {
        min_gap_margin: margin_along(system, w, &word),
        w,
        word,
        depth: point.depth - 1,
    })
}

/// `T^k`, applied by `k` successive inverse maps.
pub fn shift_t_pow(system: &IfsSystem, point: &CodedPoint, k: usize) -> Result<CodedPoint> {
    if k > point.depth {
        return Err(Error::DepthExhausted);
    }
    let mut w = point.w;
    for &i in &point.word.indices()[..k] {
        w = system.apply_inverse(i, w);
    }
    let word = point.word.shifted(k);
    Ok(CodedPoint {
        min_gap_margin: margin_along(system, w, &word),
        w,
        word,
        depth: point.depth - k,
    })
}

/// `α^{-k} z`.
pub fn rotated_direction(system: &IfsSystem, z: Direction, k: usize) -> Direction {
    z.rotated(system.alpha().conj().powi(k as i32))
}

/// A histogram density with its cumulative table.
#[derive(Debug, Clone, PartialEq)]
pub struct CachedDensity {
    pub grid: DensityGrid,
    pub cum: Vec<f64>,
}

impl CachedDensity {
    pub fn new(grid: DensityGrid) -> Self {
        let cum = grid.cumulative();
        CachedDensity { grid, cum }
    }

    /// Bin value at `x`, or the mean density over `[x - half_width, x + half_width]`.
    pub fn read(&self, x: f64, half_width: Option<f64>) -> f64 {
        match half_width {
            None => self.grid.value_at(x),
            Some(r) => self.grid.mass_between(&self.cum, x - r, x + r) / (2.0 * r),
        }
    }
}

/// How density values enter the slice-mass formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DensityRead {
    /// Histogram bin values at the two projected points.
    Bin,
    /// Mean densities over the window `|x - P_z w| < delta` and over its image
    /// `|x - P_{α^{-k} z} T^k w| < delta r^{-k}` under `T^k`. At finite
    /// resolution this is the scale seen by a windowed sample count of width `delta`.
    Window { delta: f64 },
}

/// Histogram densities of `P_z ν` keyed by direction, computed once each.
pub struct DensityCache<'a> {
    system: &'a IfsSystem,
    depth: usize,
    h: f64,
    grids: Mutex<HashMap<(u64, u64), Arc<CachedDensity>>>,
}

impl<'a> DensityCache<'a> {
    pub fn new(system: &'a IfsSystem, depth: usize, h: f64) -> Self {
        DensityCache {
            system,
            depth,
            h,
            grids: Mutex::new(HashMap::new()),
        }
    }

    pub fn system(&self) -> &IfsSystem {
        self.system
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    fn key(z: Direction) -> (u64, u64) {
        (z.z().re.to_bits(), z.z().im.to_bits())
    }

    pub fn get(&self, z: Direction) -> Result<Arc<CachedDensity>> {
        if let Some(g) = self.grids.lock().expect("density cache poisoned").get(&Self::key(z)) {
            return Ok(g.clone());
        }
        let grid = Arc::new(CachedDensity::new(projected_density(
            self.system,
            z,
            self.depth,
            self.h,
        )?));
        self.grids
            .lock()
            .expect("density cache poisoned")
            .insert(Self::key(z), grid.clone());
        Ok(grid)
    }

    /// Compute the densities for `α^{-k} z`, `k = 0..=k_max`.
    pub fn prepare(&self, z: Direction, k_max: usize) -> Result<()> {
        (0..=k_max)
            .into_par_iter()
            .map(|k| self.get(rotated_direction(self.system, z, k)).map(|_| ()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceMass {
    pub k: usize,
    pub mass: f64,
    /// `g_{α^{-k} z}(P_{α^{-k} z} T^k w)`.
    pub density_shifted: f64,
    /// `g_z(P_z w)`.
    pub density_base: f64,
    /// `p_{i_k(w)} r^{-k}`.
    pub deterministic: f64,
}

/// Slice mass of the cylinder `K_{i_k(w)}` from histogram densities.
pub fn slice_mass_formula(
    cache: &DensityCache<'_>,
    z: Direction,
    point: &CodedPoint,
    k: usize,
    read: DensityRead,
) -> Result<SliceMass> {
    let system = cache.system();
    if k > point.depth {
        return Err(Error::DepthExhausted);
    }
    let (base_width, shifted_width) = match read {
        DensityRead::Bin => (None, None),
        DensityRead::Window { delta } => {
            if !(delta > 0.0) {
                return Err(Error::InvalidParameter("window half-width must be > 0".into()));
            }
            (Some(delta), Some(delta * system.r().powi(-(k as i32))))
        }
    };
    let x = z.project(point.w);
    let base = cache.get(z)?.read(x, base_width);
    if base < DENSITY_FLOOR {
        return Err(Error::DensityFloorHit {
            x,
            value: base,
            floor: DENSITY_FLOOR,
        });
    }
    if k == 0 {
        return Ok(SliceMass {
            k,
            mass: 1.0,
            density_shifted: base,
            density_base: base,
            deterministic: 1.0,
        });
    }
    let zk = rotated_direction(system, z, k);
    let shifted = shift_t_pow(system, point, k)?;
    let num = cache.get(zk)?.read(zk.project(shifted.w), shifted_width);
    let p: f64 = point.word.indices()[..k]
        .iter()
        .map(|i| system.probs()[*i])
        .product();
    let deterministic = p * system.r().powi(-(k as i32));
    Ok(SliceMass {
        k,
        mass: num / base * deterministic,
        density_shifted: num,
        density_base: base,
        deterministic,
    })
}

/// Ratio of samples in the window `|P_z s - P_z w| < δ` that lie in `K_word`.
pub fn slice_mass_empirical(
    system: &IfsSystem,
    samples: &[ComplexVal],
    z: Direction,
    w: ComplexVal,
    word: &Word,
    delta: f64,
) -> Result<f64> {
    const MIN_SAMPLES: usize = 10_000;
    if samples.len() < MIN_SAMPLES {
        return Err(Error::TooFewPoints {
            got: samples.len(),
            need: MIN_SAMPLES,
        });
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter("window half-width must be > 0".into()));
    }
    let x = z.project(w);
    let mut inside = 0usize;
    let mut hits = 0usize;
    for s in samples {
        if (z.project(*s) - x).abs() < delta {
            inside += 1;
            if word.is_empty() || code_point(system, *s, word.len())?.word == *word {
                hits += 1;
            }
        }
    }
    if inside == 0 {
        return Err(Error::EmptyWindow(delta));
    }
    Ok(hits as f64 / inside as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceLocalDim {
    /// Slope of `log m(k)` against `k log r` over `k = 2..=k_max`.
    pub slope: f64,
    /// Contribution of `p_{i_k(w)} r^{-k}`.
    pub deterministic_slope: f64,
    /// Contribution of the density ratio.
    pub density_slope: f64,
    pub masses: Vec<SliceMass>,
}

/// Local dimension of the slice measure through `w` from the slice-mass formula.
pub fn slice_local_dim(
    cache: &DensityCache<'_>,
    z: Direction,
    point: &CodedPoint,
    k_max: usize,
) -> Result<SliceLocalDim> {
    if k_max < 4 {
        return Err(Error::InvalidParameter(format!("k_max must be >= 4, got {k_max}")));
    }
    if point.depth < k_max {
        return Err(Error::DepthExhausted);
    }
    let masses = (1..=k_max)
        .map(|k| {
            let m = slice_mass_formula(cache, z, point, k, DensityRead::Bin)?;
            if m.density_shifted < DENSITY_FLOOR {
                let zk = rotated_direction(cache.system(), z, k);
                return Err(Error::DensityFloorHit {
                    x: zk.project(shift_t_pow(cache.system(), point, k)?.w),
                    value: m.density_shifted,
                    floor: DENSITY_FLOOR,
                });
            }
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    let log_r = cache.system().r().ln();
    let used = &masses[1..];
    let xs: Vec<f64> = used.iter().map(|m| m.k as f64 * log_r).collect();
    let slope_of = |ys: Vec<f64>| {
        linear_fit(&xs, &ys).map(|f| f.slope).unwrap_or(f64::NAN)
    };
    Ok(SliceLocalDim {
        slope: slope_of(used.iter().map(|m| m.mass.ln()).collect()),
        deterministic_slope: slope_of(used.iter().map(|m| m.deterministic.ln()).collect()),
        density_slope: slope_of(
            used.iter()
                .map(|m| (m.density_shifted / m.density_base).ln())
                .collect(),
        ),
        masses,
    })
}

/// Push atoms of depth `d` through `T` (coding each atom) and compare with
/// the depth-`d - 1` atoms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PushforwardCheck {
    pub depth: usize,
    pub max_position_error: f64,
    pub max_weight_error: f64,
    pub coding_mismatches: usize,
}

pub fn shift_pushforward_check(
    system: &IfsSystem,
    fine: &AtomicMeasure2D,
    coarse: &AtomicMeasure2D,
    depth: usize,
) -> Result<PushforwardCheck> {
    let n = system.len();
    let block = coarse.len();
    if depth == 0 || fine.len() != n * block {
        return Err(Error::InvalidParameter(
            "atom counts do not match consecutive depths".into(),
        ));
    }
    let mut weights = vec![KahanSum::new(); block];
    let mut max_pos: f64 = 0.0;
    let mut mismatches = 0;
    for (idx, (w, p)) in fine.points.iter().zip(&fine.weights).enumerate() {
        let coded = code_point(system, *w, 1)?;
        let first = coded.word.indices()[0];
        if first != idx / block {
            mismatches += 1;
        }
        let image = shift_t(system, &coded)?.w;
        let target = idx % block;
        max_pos = max_pos.max((image - coarse.points[target]).norm());
        weights[target].add(*p);
    }
    let max_w = weights
        .iter()
        .zip(&coarse.weights)
        .map(|(acc, w)| (acc.value() - w).abs())
        .fold(0.0, f64::max);
    Ok(PushforwardCheck {
        depth,
        max_position_error: max_pos,
        max_weight_error: max_w,
        coding_mismatches: mismatches,
    })
}

/// Slice table row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceRow {
    pub z_angle: f64,
    pub w: ComplexVal,
    pub k: usize,
    pub mass_formula: f64,
    pub mass_empirical: Option<f64>,
    pub local_dim: Option<f64>,
}

pub fn write_slice_csv<W: Write>(rows: &[SliceRow], mut out: W) -> Result<()> {
    writeln!(out, "z_angle,w_re,w_im,k,mass_formula,mass_empirical,local_dim")?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.z_angle,
            r.w.re,
            r.w.im,
            r.k,
            r.mass_formula,
            opt(r.mass_empirical),
            opt(r.local_dim)
        )?;
    }
    Ok(())
}

/// Per-point outcome of a slice evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PointOutcome {
    Ok {
        w: ComplexVal,
        local_dim: SliceLocalDim,
        projected_local_dim: f64,
    },
    Skipped {
        w: ComplexVal,
        error: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConservationConfig {
    pub n_points: usize,
    pub seed: u64,
    pub k_max: usize,
    pub density_depth: usize,
    pub h: f64,
    pub tolerance: f64,
}

impl Default for ConservationConfig {
    fn default() -> Self {
        ConservationConfig {
            n_points: 100,
            seed: 1,
            k_max: 8,
            density_depth: 12,
            h: 0.01,
            tolerance: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConservationReport {
    pub z_angle: f64,
    pub config: ConservationConfig,
    pub dim_h_measure: f64,
    /// Median local dimension of `P_z ν` from interval masses.
    pub projected_dim: f64,
    pub median_slice_dim: f64,
    pub sum: f64,
    pub n_evaluated: usize,
    pub n_skipped: usize,
    /// `dim_H ν <= 1`: the conservation statement does not apply.
    pub hypothesis_violation: bool,
    /// `None` when the hypothesis is violated.
    pub conserved: Option<bool>,
    pub points: Vec<PointOutcome>,
}

/// Points sampled from `ν` and coded deep enough for `k_max` shifts.
pub fn sample_coded_points(
    system: &IfsSystem,
    n: usize,
    k_max: usize,
    seed: u64,
) -> Result<Vec<CodedPoint>> {
    let samples = sample_measure(system, n, default_word_length(system), seed)?;
    samples
        .points
        .iter()
        .map(|w| code_point(system, *w, k_max + 2))
        .collect()
}

/// Local dimension of `P_z ν` at `x` from interval masses of the histogram
/// over radii `2h .. 32h`.
pub fn projected_local_dim(density: &CachedDensity, x: f64) -> f64 {
    let h = density.grid.h;
    let radii = geometric_ladder(2.0 * h, 32.0 * h, 8);
    let (xs, ys): (Vec<f64>, Vec<f64>) = radii
        .iter()
        .map(|rho| {
            let m = density.grid.mass_between(&density.cum, x - rho, x + rho);
            (rho.ln(), m.max(1e-300).ln())
        })
        .unzip();
    linear_fit(&xs, &ys).map(|f| f.slope).unwrap_or(f64::NAN)
}

/// Checks `dim P_z ν + dim ν_{z,w} ≈ dim_H ν` on points sampled from `ν`.
pub fn dimension_conservation_report(
    system: &IfsSystem,
    z: Direction,
    config: ConservationConfig,
) -> Result<ConservationReport> {
    let dims = closed_form_dims(system, 2.0)?;
    let cache = DensityCache::new(system, config.density_depth, config.h);
    cache.prepare(z, config.k_max)?;
    let base = cache.get(z)?;
    let points = sample_coded_points(system, config.n_points, config.k_max, config.seed)?;
    let outcomes: Vec<PointOutcome> = points
        .par_iter()
        .map(|p| match slice_local_dim(&cache, z, p, config.k_max) {
            Ok(ld) => PointOutcome::Ok {
                w: p.w,
                local_dim: ld,
                projected_local_dim: projected_local_dim(&base, z.project(p.w)),
            },
            Err(e) => PointOutcome::Skipped {
                w: p.w,
                error: e.to_string(),
            },
        })
        .collect();
    let mut slice_dims = Vec::new();
    let mut proj_dims = Vec::new();
    for o in &outcomes {
        if let PointOutcome::Ok {
            local_dim,
            projected_local_dim,
            ..
        } = o
        {
            slice_dims.push(local_dim.slope);
            proj_dims.push(*projected_local_dim);
        }
    }
    let projected_dim = median(&proj_dims);
    let median_slice_dim = median(&slice_dims);
    let sum = projected_dim + median_slice_dim;
    let hypothesis_violation = dims.dim_h_measure_closed <= 1.0;
    Ok(ConservationReport {
        z_angle: z.angle(),
        config,
        dim_h_measure: dims.dim_h_measure_closed,
        projected_dim,
        median_slice_dim,
        sum,
        n_evaluated: slice_dims.len(),
        n_skipped: outcomes.len() - slice_dims.len(),
        hypothesis_violation,
        conserved: (!hypothesis_violation)
            .then(|| (sum - dims.dim_h_measure_closed).abs() <= config.tolerance),
        points: outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::cylinder_map;
    use crate::ifs::presets::*;
    use crate::measure::atomic_approx;

    fn c(re: f64, im: f64) -> ComplexVal {
        ComplexVal::new(re, im)
    }

    #[test]
    fn fixed_point_codes_to_zeros() {
        let s = sys_a();
        let fp = s.fixed_point(0);
        assert!((fp - c(0.6938, 1.4852)).norm() < 1e-3);
        let cp = code_point(&s, fp, 12).unwrap();
        assert!(cp.word.indices().iter().all(|i| *i == 0));
        let t = shift_t(&s, &cp).unwrap();
        assert!((t.w - fp).norm() < 1e-12);
        assert_eq!(t.depth, 11);
    }

    #[test]
    fn atom_codes_to_its_word() {
        let s = sys_a();
        let word = Word::new(vec![2, 1]);
        let w = cylinder_map(&s, &word).unwrap().apply(s.barycenter());
        let cp = code_point(&s, w, 2).unwrap();
        assert_eq!(cp.word, word);
        assert!(cp.min_gap_margin > 0.0);
        let t = shift_t(&s, &cp).unwrap();
        assert_eq!(t.word, Word::new(vec![1]));
        let expected = cylinder_map(&s, &Word::new(vec![1])).unwrap().apply(s.barycenter());
        assert!((t.w - expected).norm() < 1e-12);
        let root = shift_t_pow(&s, &cp, 2).unwrap();
        assert!((root.w - s.barycenter()).norm() < 1e-12);
        assert!(matches!(shift_t_pow(&s, &cp, 3), Err(Error::DepthExhausted)));
    }

    #[test]
    fn gap_midpoint_is_rejected() {
        let s = sys_a();
        let d0 = s.cylinder_disk(&cylinder_map(&s, &Word::new(vec![0])).unwrap());
        let d1 = s.cylinder_disk(&cylinder_map(&s, &Word::new(vec![1])).unwrap());
        let mid = (d0.center + d1.center) / 2.0;
        assert!(!d0.contains(mid, 0.0) && !d1.contains(mid, 0.0));
        assert!(matches!(
            code_point(&s, mid, 3),
            Err(Error::NotInAttractorNeighborhood { level: 1 })
        ));
    }

    #[test]
    fn coding_inverts_atoms_exhaustively() {
        let s = sys_b();
        for depth in 1..=6 {
            let m = atomic_approx(&s, depth).unwrap();
            for (rank, w) in m.points.iter().enumerate() {
                let cp = code_point(&s, *w, depth).unwrap();
                assert_eq!(cp.word, Word::from_rank(rank, 4, depth));
            }
        }
    }

    #[test]
    fn shift_inverts_maps() {
        let s = sys_a();
        let m = atomic_approx(&s, 5).unwrap();
        for w in m.points.iter().step_by(37) {
            for i in 0..4 {
                let image = s.apply(i, *w);
                let cp = code_point(&s, image, 6).unwrap();
                assert_eq!(cp.word.indices()[0], i);
                assert!((shift_t(&s, &cp).unwrap().w - w).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn pushforward_preserves_measure() {
        let s = sys_b();
        for d in 1..=8 {
            let fine = atomic_approx(&s, d).unwrap();
            let coarse = atomic_approx(&s, d - 1).unwrap();
            let check = shift_pushforward_check(&s, &fine, &coarse, d).unwrap();
            assert_eq!(check.coding_mismatches, 0);
            assert!(check.max_position_error < 1e-12, "{check:?}");
            assert!(check.max_weight_error < 1e-12, "{check:?}");
        }
    }

    #[test]
    fn formula_structure() {
        let s = sys_a();
        let cache = DensityCache::new(&s, 10, 0.01);
        let z = Direction::from_angle(0.0);
        let pts = sample_coded_points(&s, 20, 6, 3).unwrap();
        let mut checked = 0;
        for p in &pts {
            let Ok(m0) = slice_mass_formula(&cache, z, p, 0, DensityRead::Bin) else {
                continue;
            };
            assert_eq!(m0.mass, 1.0);
            for k in 1..=4 {
                let m = slice_mass_formula(&cache, z, p, k, DensityRead::Bin).unwrap();
                assert!((m.deterministic - (0.25f64 / 0.35).powi(k as i32)).abs() < 1e-12);
                assert!(m.mass >= 0.0);
                // One more step multiplies by the density ratio and p r^{-1}.
                let next = slice_mass_formula(&cache, z, p, k + 1, DensityRead::Bin).unwrap();
                let step = next.density_shifted / m.density_shifted
                    * s.probs()[p.word.indices()[k]]
                    / s.r();
                if m.density_shifted > 0.0 {
                    assert!((next.mass - m.mass * step).abs() <= 1e-12 * next.mass.max(1.0));
                }
            }
            checked += 1;
        }
        assert!(checked > 10);
    }

    #[test]
    fn window_reads_match_sample_counts() {
        let s = sys_a();
        let z = Direction::from_angle(0.0);
        let cache = DensityCache::new(&s, 10, 0.01);
        let samples = sample_measure(&s, 50_000, 30, 21).unwrap().points;
        let pts = sample_coded_points(&s, 30, 4, 8).unwrap();
        let delta = 0.05;
        let mut rel = Vec::new();
        for p in &pts {
            let f = slice_mass_formula(&cache, z, p, 1, DensityRead::Window { delta }).unwrap();
            let e = slice_mass_empirical(&s, &samples, z, p.w, &p.word.prefix(1), delta).unwrap();
            rel.push((f.mass - e).abs() / e);
        }
        assert!(median(&rel) < 0.1, "{rel:?}");
    }

    #[test]
    fn empirical_edge_cases() {
        let s = sys_a();
        let samples = sample_measure(&s, 20_000, 30, 9).unwrap().points;
        let z = Direction::from_angle(0.4);
        let w = samples[0];
        let all = slice_mass_empirical(&s, &samples, z, w, &Word::empty(), 0.05).unwrap();
        assert_eq!(all, 1.0);
        let wide = slice_mass_empirical(&s, &samples, z, w, &Word::new(vec![2]), 100.0).unwrap();
        assert!((wide - 0.25).abs() < 0.02);
        let far = c(1e3, 0.0);
        assert!(matches!(
            slice_mass_empirical(&s, &samples, z, far, &Word::new(vec![2]), 0.01),
            Err(Error::EmptyWindow(_))
        ));
        assert!(matches!(
            slice_mass_empirical(&s, &samples[..100], z, w, &Word::empty(), 0.01),
            Err(Error::TooFewPoints { .. })
        ));
    }

    #[test]
    fn local_dim_deterministic_part_is_exact_for_uniform_weights() {
        let s = sys_a();
        let cache = DensityCache::new(&s, 10, 0.01);
        let z = Direction::from_angle(1.3);
        let pts = sample_coded_points(&s, 10, 6, 5).unwrap();
        let mut seen = 0;
        for p in &pts {
            if let Ok(ld) = slice_local_dim(&cache, z, p, 6) {
                assert!((ld.deterministic_slope - 0.320508).abs() < 1e-5, "{ld:?}");
                assert!((ld.deterministic_slope + ld.density_slope - ld.slope).abs() < 1e-9);
                seen += 1;
            }
        }
        assert!(seen > 5);
        assert!(matches!(
            slice_local_dim(&cache, z, &pts[0], 3),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn thin_system_is_flagged() {
        let s = sys_a_thin();
        let report = dimension_conservation_report(
            &s,
            Direction::from_angle(0.0),
            ConservationConfig {
                n_points: 10,
                density_depth: 8,
                k_max: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(report.hypothesis_violation);
        assert_eq!(report.conserved, None);
    }

    #[test]
    fn slice_csv_header() {
        let rows = vec![SliceRow {
            z_angle: 0.0,
            w: c(1.0, 2.0),
            k: 2,
            mass_formula: 0.5,
            mass_empirical: None,
            local_dim: Some(0.3),
        }];
        let mut out = Vec::new();
        write_slice_csv(&rows, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "z_angle,w_re,w_im,k,mass_formula,mass_empirical,local_dim\n0,1,2,2,0.5,,0.3\n"
        );
    }
}
