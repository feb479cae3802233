//! Projected attractors as unions of intervals, coverage of projected
//! densities against them and box counts of slices of the attractor.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ifs::{closed_form_dims, ComplexVal, IfsSystem};
use crate::projection::{projected_density, DensityGrid, Direction};
use crate::stats::{linear_fit, KahanSum};

/// Sorted, pairwise disjoint closed intervals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalUnion {
    pub intervals: Vec<(f64, f64)>,
    pub total_length: f64,
}

impl IntervalUnion {
    /// Union of arbitrary intervals; intervals closer than `gap` are joined.
    pub fn from_intervals(mut raw: Vec<(f64, f64)>, gap: f64) -> Self {
        raw.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut intervals: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
        for (lo, hi) in raw {
            match intervals.last_mut() {
                Some(last) if lo <= last.1 + gap => last.1 = last.1.max(hi),
                _ => intervals.push((lo, hi)),
            }
        }
        let total_length = length_of(&intervals);
        IntervalUnion {
            intervals,
            total_length,
        }
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, x: f64) -> bool {
        let i = self.intervals.partition_point(|iv| iv.1 < x);
        i < self.intervals.len() && self.intervals[i].0 <= x
    }

    /// Length of the intersection with `[lo, hi]`.
    pub fn length_within(&self, lo: f64, hi: f64) -> f64 {
        let start = self.intervals.partition_point(|iv| iv.1 <= lo);
        let mut acc = 0.0;
        for &(a, b) in &self.intervals[start..] {
            if a >= hi {
                break;
            }
            acc += b.min(hi) - a.max(lo);
        }
        acc
    }

    /// `offset + scale * self` for `scale > 0`.
    fn affine(&self, scale: f64, offset: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.intervals
            .iter()
            .map(move |(lo, hi)| (offset + scale * lo, offset + scale * hi))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "lo,hi")?;
        for (lo, hi) in &self.intervals {
            writeln!(out, "{lo},{hi}")?;
        }
        Ok(())
    }
}

fn length_of(intervals: &[(f64, f64)]) -> f64 {
    let mut acc = KahanSum::new();
    for (lo, hi) in intervals {
        acc.add(hi - lo);
    }
    acc.value()
}

/// Builds `V_d(z) = ∪_i (P_z a_i + r V_{d-1}(α^{-1} z))` from the deepest
/// level up, merging at every level.
fn recursive_union<F, G>(system: &IfsSystem, z: Direction, depth: usize, base: F, gap: G) -> IntervalUnion
where
    F: Fn(Direction) -> IntervalUnion,
    G: Fn(usize) -> f64,
{
    let dirs: Vec<Direction> = (0..=depth)
        .map(|j| z.rotated(system.alpha().conj().powi(j as i32)))
        .collect();
    let r = system.r();
    let mut current = base(dirs[depth]);
    for m in 1..=depth {
        let dz = dirs[depth - m];
        let raw: Vec<(f64, f64)> = system
            .translations()
            .iter()
            .flat_map(|a| current.affine(r, dz.project(*a)).collect::<Vec<_>>())
            .collect();
        current = IntervalUnion::from_intervals(raw, gap(m));
    }
    current
}

/// Outer estimate of `P_z(K)`: the union of the projections of all
/// depth-`depth` cylinder disks.
pub fn project_attractor(system: &IfsSystem, z: Direction, depth: usize) -> IntervalUnion {
    let disk = system.bounding_disk();
    recursive_union(
        system,
        z,
        depth,
        |dz| {
            let c = dz.project(disk.center);
            IntervalUnion::from_intervals(vec![(c - disk.radius, c + disk.radius)], 0.0)
        },
        |_| 0.0,
    )
}

/// Atom-based estimate of `P_z(K)`: hulls of clusters of projected
/// depth-`depth` atoms, joining neighbours closer than the cylinder diameter
/// `2 r^depth R`.
pub fn project_attractor_inner(system: &IfsSystem, z: Direction, depth: usize) -> IntervalUnion {
    let b = system.barycenter();
    let diameter = 2.0 * system.bounding_disk().radius;
    let r = system.r();
    recursive_union(
        system,
        z,
        depth,
        |dz| {
            let x = dz.project(b);
            IntervalUnion::from_intervals(vec![(x, x)], 0.0)
        },
        // Thresholds in the local coordinates of level m.
        |m| diameter * r.powi(m as i32),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub z_angle: f64,
    pub depth: usize,
    pub h: f64,
    pub epsilon: f64,
    /// Fraction of the bins meeting the outer projected attractor whose
    /// density is `>= epsilon`.
    pub cov_a: f64,
    /// Fraction of the bins with density `>= epsilon` that meet the outer
    /// projected attractor.
    pub cov_b: f64,
    /// As `cov_a`, measured by the exact length of the outer union.
    pub cov_a_exact: f64,
    /// As `cov_b`, measured by the exact length of the outer union.
    pub cov_b_exact: f64,
    pub length_outer: f64,
    pub length_inner: f64,
}

/// Compares `{g_z >= ε}` with the projected attractor. `epsilon = None`
/// uses `1e-3` times the median positive density.
///
/// The density is only resolved to its bin width, so the primary fractions
/// compare both sets at that resolution: the outer union is replaced by the
/// bins it meets. Fractions against the exact union length are reported
/// alongside; they lose about `h / 2` per boundary point of the union.
pub fn equivalence_check(
    system: &IfsSystem,
    z: Direction,
    depth: usize,
    h: f64,
    epsilon: Option<f64>,
) -> Result<CoverageReport> {
    let grid = projected_density(system, z, depth, h)?;
    let outer = project_attractor(system, z, depth);
    let inner = project_attractor_inner(system, z, depth);
    Ok(coverage(&grid, &outer, &inner, z, depth, epsilon))
}

pub fn coverage(
    grid: &DensityGrid,
    outer: &IntervalUnion,
    inner: &IntervalUnion,
    z: Direction,
    depth: usize,
    epsilon: Option<f64>,
) -> CoverageReport {
    let epsilon = epsilon.unwrap_or_else(|| 1e-3 * grid.median_positive());
    let mut dense_in = KahanSum::new();
    let mut dense_total = KahanSum::new();
    let (mut meeting, mut dense, mut both) = (0usize, 0usize, 0usize);
    for (j, v) in grid.values.iter().enumerate() {
        let lo = grid.edge(j);
        let inside = outer.length_within(lo, lo + grid.h);
        let is_dense = *v >= epsilon;
        meeting += (inside > 0.0) as usize;
        dense += is_dense as usize;
        both += (is_dense && inside > 0.0) as usize;
        if is_dense {
            dense_in.add(inside);
            dense_total.add(grid.h);
        }
    }
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    CoverageReport {
        z_angle: z.angle(),
        depth,
        h: grid.h,
        epsilon,
        cov_a: ratio(both as f64, meeting as f64),
        cov_b: ratio(both as f64, dense as f64),
        cov_a_exact: ratio(dense_in.value(), outer.total_length),
        cov_b_exact: ratio(dense_in.value(), dense_total.value()),
        length_outer: outer.total_length,
        length_inner: inner.total_length,
    }
}

pub fn write_coverage_csv<W: Write>(rows: &[CoverageReport], mut out: W) -> Result<()> {
    writeln!(out, "z_angle,cov_a,cov_b,length_outer,length_inner")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.z_angle, r.cov_a, r.cov_b, r.length_outer, r.length_inner
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceSetDim {
    pub x: f64,
    /// Slope of `log N(d)` against `d (-log r)`.
    pub slope: f64,
    pub r2: f64,
    /// `N(d)` for `d = 1..=depth`.
    pub counts: Vec<u64>,
    /// `dim_H K <= 1`: slices are typically finite and the slope should be near 0.
    pub hypothesis_violation: bool,
}

/// Box-counting dimension of the slice `K ∩ P_z^{-1}{x}` from the number of
/// depth-`d` cylinder disks meeting the line.
pub fn slice_set_boxdim(
    system: &IfsSystem,
    z: Direction,
    x: f64,
    depth: usize,
) -> Result<SliceSetDim> {
    if depth < 2 {
        return Err(Error::InvalidParameter("depth must be >= 2".into()));
    }
    let disk = system.bounding_disk();
    let lambda = system.lambda();
    let mut counts = vec![0u64; depth];
    // Depth-first over cylinder maps w -> scale * w + offset; child disks lie
    // inside their parent, so a miss prunes the subtree.
    let mut stack = vec![(ComplexVal::new(1.0, 0.0), ComplexVal::new(0.0, 0.0), 0usize)];
    while let Some((scale, offset, d)) = stack.pop() {
        if d == depth {
            continue;
        }
        for a in system.translations() {
            let child_offset = offset + scale * a;
            let child_scale = scale * lambda;
            let c = child_scale * disk.center + child_offset;
            if (z.project(c) - x).abs() <= child_scale.norm() * disk.radius {
                counts[d] += 1;
                stack.push((child_scale, child_offset, d + 1));
            }
        }
    }
    if counts[depth - 1] == 0 {
        return Err(Error::LineMissesAttractor(x));
    }
    let neg_log_r = -system.r().ln();
    let xs: Vec<f64> = (1..=depth).map(|d| d as f64 * neg_log_r).collect();
    let ys: Vec<f64> = counts.iter().map(|n| (*n as f64).ln()).collect();
    let fit = linear_fit(&xs, &ys).expect("at least two depths");
    Ok(SliceSetDim {
        x,
        slope: fit.slope,
        r2: fit.r2,
        counts,
        hypothesis_violation: closed_form_dims(system, 2.0)?.dim_h_set_closed <= 1.0,
    })
}
