//! Orthogonal projections `P_z w = <z, w>`, histogram densities of `P_z ν`,
//! the density self-similarity residual, and direction sweeps.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ifs::{cylinder_map, inner, ComplexVal, IfsSystem, Word};
use crate::measure::{atomic_approx_with_budget, AtomicMeasure2D, DEFAULT_ATOM_BUDGET};
use crate::stats::{compensated_sum, KahanSum};

/// A unit vector `z ∈ S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Direction(ComplexVal);

impl Direction {
    pub fn new(z: ComplexVal) -> Result<Self> {
        if ((z.norm() - 1.0).abs()) > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "direction {z} is not on the unit circle"
            )));
        }
        Ok(Direction(z))
    }

    pub fn from_angle(theta: f64) -> Self {
        Direction(ComplexVal::from_polar(1.0, theta))
    }

    pub fn z(&self) -> ComplexVal {
        self.0
    }

    pub fn angle(&self) -> f64 {
        self.0.arg()
    }

    #[inline]
    pub fn project(&self, w: ComplexVal) -> f64 {
        inner(self.0, w)
    }

    /// `u · z` for a unit `u` (e.g. `α^{-k} z`).
    pub fn rotated(&self, u: ComplexVal) -> Direction {
        let z = u * self.0;
        Direction(z / z.norm())
    }
}

/// Weighted point masses on the line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomicMeasure1D {
    pub positions: Vec<f64>,
    pub weights: Vec<f64>,
}

impl AtomicMeasure1D {
    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// `P_z` applied atom by atom; weights are carried over unchanged.
pub fn project(measure: &AtomicMeasure2D, z: Direction) -> AtomicMeasure1D {
    AtomicMeasure1D {
        positions: measure.points.iter().map(|w| z.project(*w)).collect(),
        weights: measure.weights.clone(),
    }
}

/// Uniform grid of half-open bins `[x0 + j h, x0 + (j + 1) h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub x0: f64,
    pub h: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidParameter(format!("bin width {h} must be > 0")));
        }
        if !(x_max > x_min) {
            return Err(Error::InvalidParameter(format!(
                "empty range [{x_min}, {x_max}]"
            )));
        }
        let n = ((x_max - x_min) / h).ceil().max(1.0) as usize;
        Ok(GridSpec { x0: x_min, h, n })
    }

    /// Grid covering the projection of the bounding disk, anchored on a
    /// multiple of `h` with one bin of padding per side.
    pub fn for_system(system: &IfsSystem, z: Direction, h: f64) -> Result<Self> {
        let disk = system.bounding_disk();
        let c = z.project(disk.center);
        let lo = ((c - disk.radius) / h).floor() - 1.0;
        let hi = ((c + disk.radius) / h).ceil() + 1.0;
        GridSpec::new(lo * h, hi * h, h)
    }

    pub fn x_max(&self) -> f64 {
        self.x0 + self.n as f64 * self.h
    }

    #[inline]
    pub fn bin(&self, x: f64) -> Option<usize> {
        let j = ((x - self.x0) / self.h).floor();
        if j >= 0.0 && (j as usize) < self.n {
            Some(j as usize)
        } else {
            None
        }
    }
}

/// Piecewise-constant density estimate on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityGrid {
    pub x0: f64,
    pub h: f64,
    pub values: Vec<f64>,
}

impl DensityGrid {
    pub fn spec(&self) -> GridSpec {
        GridSpec {
            x0: self.x0,
            h: self.h,
            n: self.values.len(),
        }
    }

    /// `h Σ values`.
    pub fn mass(&self) -> f64 {
        self.h * compensated_sum(self.values.iter().copied())
    }

    pub fn x_max(&self) -> f64 {
        self.x0 + self.values.len() as f64 * self.h
    }

    /// Left edge of bin `j`.
    pub fn edge(&self, j: usize) -> f64 {
        self.x0 + j as f64 * self.h
    }

    pub fn center(&self, j: usize) -> f64 {
        self.x0 + (j as f64 + 0.5) * self.h
    }

    /// Histogram value of the bin containing `x` (0 outside the grid).
    pub fn value_at(&self, x: f64) -> f64 {
        match self.spec().bin(x) {
            Some(j) => self.values[j],
            None => 0.0,
        }
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Cumulative mass table: `cum[j]` is the mass left of edge `j`.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut cum = Vec::with_capacity(self.values.len() + 1);
        let mut acc = KahanSum::new();
        cum.push(0.0);
        for v in &self.values {
            acc.add(v * self.h);
            cum.push(acc.value());
        }
        cum
    }

    /// Mass of `(-∞, x]` of the piecewise-constant density.
    pub fn cdf_with(&self, cum: &[f64], x: f64) -> f64 {
        let t = (x - self.x0) / self.h;
        if t <= 0.0 {
            return 0.0;
        }
        let n = self.values.len();
        if t >= n as f64 {
            return cum[n];
        }
        let j = t.floor() as usize;
        cum[j] + (t - j as f64) * self.h * self.values[j]
    }

    /// Mass of `[lo, hi]`.
    pub fn mass_between(&self, cum: &[f64], lo: f64, hi: f64) -> f64 {
        self.cdf_with(cum, hi) - self.cdf_with(cum, lo)
    }

    /// Median of the positive bin values.
    pub fn median_positive(&self) -> f64 {
        let pos: Vec<f64> = self.values.iter().copied().filter(|v| *v > 0.0).collect();
        crate::stats::median(&pos)
    }

    /// `∫ |self - other|` on identical grids.
    pub fn l1_distance(&self, other: &DensityGrid) -> Result<f64> {
        if self.values.len() != other.values.len()
            || (self.x0 - other.x0).abs() > 1e-12
            || (self.h - other.h).abs() > 1e-15
        {
            return Err(Error::GridMismatch("grids differ".into()));
        }
        Ok(self.h
            * compensated_sum(
                self.values
                    .iter()
                    .zip(&other.values)
                    .map(|(a, b)| (a - b).abs()),
            ))
    }

    /// CSV with columns `x,g` (bin centers).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,g")?;
        for (j, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", self.center(j), v)?;
        }
        Ok(())
    }
}

/// Histogram density: `values[j] = mass(bin j) / h`.
pub fn density(measure: &AtomicMeasure1D, x_min: f64, x_max: f64, h: f64) -> Result<DensityGrid> {
    let spec = GridSpec::new(x_min, x_max, h)?;
    density_on(measure, spec)
}

pub fn density_on(measure: &AtomicMeasure1D, spec: GridSpec) -> Result<DensityGrid> {
    let mut mass = vec![0.0; spec.n];
    for (x, w) in measure.positions.iter().zip(&measure.weights) {
        let j = spec.bin(*x).ok_or(Error::SupportOutOfRange(*x))?;
        mass[j] += w;
    }
    Ok(DensityGrid {
        x0: spec.x0,
        h: spec.h,
        values: mass.into_iter().map(|m| m / spec.h).collect(),
    })
}

/// `(h Σ values^q)^{1/q}`.
pub fn lq_norm(density: &DensityGrid, q: f64) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(Error::InvalidParameter(format!("q = {q} must be >= 1")));
    }
    let s = compensated_sum(density.values.iter().map(|v| v.powf(q)));
    Ok((density.h * s).powf(1.0 / q))
}

/// Projected depth-`d` atoms `P_z f_u(b)` generated without materializing
/// the planar atoms.
///
/// `P_z f_u(b) = Σ_j r^{j-1} <α^{-(j-1)} z, a_{u_j}> + r^d <α^{-d} z, b>`,
/// so the positions split into a prefix part and a suffix part whose sums
/// enumerate every atom.
#[derive(Debug, Clone)]
pub struct ProjectedAtoms {
    probs: Vec<f64>,
    tables: Vec<Vec<f64>>,
    tail: f64,
    prefix_pos: Vec<f64>,
    prefix_w: Vec<f64>,
    suffix_pos: Vec<f64>,
    suffix_w: Vec<f64>,
}

impl ProjectedAtoms {
    pub fn new(system: &IfsSystem, z: Direction, depth: usize) -> Self {
        let n = system.len();
        let alpha_inv = system.alpha().conj();
        // Per-level tables c_j[i] = r^{j-1} <α^{-(j-1)} z, a_i>.
        let mut tables = Vec::with_capacity(depth);
        let mut zz = z.z();
        let mut scale = 1.0;
        for _ in 0..depth {
            tables.push(
                system
                    .translations()
                    .iter()
                    .map(|a| scale * inner(zz, *a))
                    .collect::<Vec<f64>>(),
            );
            zz *= alpha_inv;
            scale *= system.r();
        }
        let tail = scale * inner(zz, system.barycenter());
        let split = depth / 2;
        let expand = |levels: &[Vec<f64>], start: f64| {
            let mut pos = vec![start];
            let mut w = vec![1.0];
            for table in levels {
                let mut np = Vec::with_capacity(pos.len() * n);
                let mut nw = Vec::with_capacity(pos.len() * n);
                for (x, wt) in pos.iter().zip(&w) {
                    for i in 0..n {
                        np.push(x + table[i]);
                        nw.push(wt * system.probs()[i]);
                    }
                }
                pos = np;
                w = nw;
            }
            (pos, w)
        };
        let (prefix_pos, prefix_w) = expand(&tables[..split], 0.0);
        let (suffix_pos, suffix_w) = expand(&tables[split..], tail);
        ProjectedAtoms {
            probs: system.probs().to_vec(),
            tables,
            tail,
            prefix_pos,
            prefix_w,
            suffix_pos,
            suffix_w,
        }
    }

    pub fn len(&self) -> usize {
        self.prefix_pos.len() * self.suffix_pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Histogram of the projected atoms; chunks merge in a fixed order.
    pub fn histogram(&self, spec: GridSpec) -> Result<DensityGrid> {
        const CHUNKS: usize = 16;
        let m = self.prefix_pos.len();
        let per = m.div_ceil(CHUNKS).max(1);
        let parts: Vec<Result<Vec<f64>>> = (0..m.div_ceil(per))
            .into_par_iter()
            .map(|c| {
                let mut mass = vec![0.0; spec.n];
                let inv_h = 1.0 / spec.h;
                for u in c * per..((c + 1) * per).min(m) {
                    let (pu, wu) = (self.prefix_pos[u], self.prefix_w[u]);
                    for (sv, wv) in self.suffix_pos.iter().zip(&self.suffix_w) {
                        let x = pu + sv;
                        let t = ((x - spec.x0) * inv_h).floor();
                        if !(t >= 0.0 && (t as usize) < spec.n) {
                            return Err(Error::SupportOutOfRange(x));
                        }
                        mass[t as usize] += wu * wv;
                    }
                }
                Ok(mass)
            })
            .collect();
        let mut total = vec![0.0; spec.n];
        for part in parts {
            for (t, m) in total.iter_mut().zip(part?) {
                *t += m;
            }
        }
        Ok(DensityGrid {
            x0: spec.x0,
            h: spec.h,
            values: total.into_iter().map(|m| m / spec.h).collect(),
        })
    }

    /// Exact transform `Σ w e^{i t x}` of the projected atoms, evaluated as
    /// `e^{i t tail} Π_j Σ_i p_i e^{i t c_j[i]}` (atoms are sums of independent
    /// per-level terms).
    pub fn fourier(&self, t: f64) -> ComplexVal {
        let mut acc = ComplexVal::from_polar(1.0, t * self.tail);
        for table in &self.tables {
            let level: ComplexVal = table
                .iter()
                .zip(&self.probs)
                .map(|(c, p)| ComplexVal::from_polar(*p, t * c))
                .sum();
            acc *= level;
        }
        acc
    }

    /// Materialize the projected atoms (prefix-major order).
    pub fn to_measure(&self) -> AtomicMeasure1D {
        let mut positions = Vec::with_capacity(self.len());
        let mut weights = Vec::with_capacity(self.len());
        for (pu, wu) in self.prefix_pos.iter().zip(&self.prefix_w) {
            for (sv, wv) in self.suffix_pos.iter().zip(&self.suffix_w) {
                positions.push(pu + sv);
                weights.push(wu * wv);
            }
        }
        AtomicMeasure1D { positions, weights }
    }
}

/// Histogram density of `P_z ν` from depth-`depth` atoms on the system grid.
pub fn projected_density(
    system: &IfsSystem,
    z: Direction,
    depth: usize,
    h: f64,
) -> Result<DensityGrid> {
    let spec = GridSpec::for_system(system, z, h)?;
    ProjectedAtoms::new(system, z, depth).histogram(spec)
}

/// Default bin width `r^{depth/2}`.
pub fn default_bin_width(system: &IfsSystem, depth: usize) -> f64 {
    system.r().powf(depth as f64 / 2.0)
}

/// L¹ distance between the density of `P_z ν` and the right-hand side of the
/// `k`-step density recursion
/// `g_z(x) = Σ_{|u| = k} p_u r^{-k} g_{α^{-k} z}(r^{-k} (x - b_u))`, `b_u = P_z f_u(0)`.
///
/// Both densities are depth-`depth` histograms of width `h`; the right-hand
/// side is integrated exactly over every left-hand bin.
pub fn selfsim_density_residual(
    system: &IfsSystem,
    z: Direction,
    k: usize,
    depth: usize,
    h: f64,
) -> Result<f64> {
    let lhs = projected_density(system, z, depth, h)?;
    let rhs = selfsim_density_rhs(system, z, k, depth, h)?;
    lhs.l1_distance(&rhs)
}

/// Right-hand side of the density recursion on the grid of `P_z ν`.
pub fn selfsim_density_rhs(
    system: &IfsSystem,
    z: Direction,
    k: usize,
    depth: usize,
    h: f64,
) -> Result<DensityGrid> {
    let spec = GridSpec::for_system(system, z, h)?;
    let z_rot = z.rotated(system.alpha().conj().powu(k as u32));
    let inner_density = projected_density(system, z_rot, depth, h)?;
    let cum = inner_density.cumulative();
    let n = system.len();
    let words = n.checked_pow(k as u32).filter(|w| *w <= 1 << 20).ok_or_else(|| {
        Error::GridMismatch(format!("k = {k} yields too many cylinders"))
    })?;
    let scale = system.r().powi(-(k as i32));
    let mut values = vec![0.0; spec.n];
    for rank in 0..words {
        let map = cylinder_map(system, &Word::from_rank(rank, n, k))?;
        let b = z.project(map.offset);
        for (j, v) in values.iter_mut().enumerate() {
            let lo = (spec.x0 + j as f64 * h - b) * scale;
            let hi = (spec.x0 + (j + 1) as f64 * h - b) * scale;
            *v += map.weight * inner_density.mass_between(&cum, lo, hi);
        }
    }
    let rhs = DensityGrid {
        x0: spec.x0,
        h,
        values: values.into_iter().map(|m| m / h).collect(),
    };
    let lost = (rhs.mass() - inner_density.mass()).abs();
    if lost > 1e-6 {
        return Err(Error::GridMismatch(format!(
            "recursion pushes {lost} mass outside the grid"
        )));
    }
    Ok(rhs)
}

/// Eight Gaussian bumps spanning `[-extent, extent]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestFamily {
    pub centers: Vec<f64>,
    pub sigma: f64,
}

impl TestFamily {
    pub const SIZE: usize = 8;

    pub fn spanning(extent: f64) -> Self {
        let spacing = 2.0 * extent / Self::SIZE as f64;
        TestFamily {
            centers: (0..Self::SIZE)
                .map(|m| -extent + (m as f64 + 0.5) * spacing)
                .collect(),
            sigma: spacing,
        }
    }

    /// Family covering every projection of the system's bounding disk.
    pub fn for_system(system: &IfsSystem) -> Self {
        let d = system.bounding_disk();
        Self::spanning(d.center.norm() + d.radius)
    }

    #[inline]
    pub fn eval(&self, m: usize, x: f64) -> f64 {
        let u = (x - self.centers[m]) / self.sigma;
        (-0.5 * u * u).exp()
    }

    /// `sup |h_m'| = 1 / (σ √e)`.
    pub fn lipschitz(&self) -> f64 {
        1.0 / (self.sigma * std::f64::consts::E.sqrt())
    }

    /// `∫ h_m d(P_z μ)` for every bump.
    pub fn integrals(&self, measure: &AtomicMeasure2D, z: Direction) -> Vec<f64> {
        let mut acc = vec![KahanSum::new(); self.centers.len()];
        for (w, p) in measure.points.iter().zip(&measure.weights) {
            let x = z.project(*w);
            for (m, a) in acc.iter_mut().enumerate() {
                a.add(p * self.eval(m, x));
            }
        }
        acc.iter().map(KahanSum::value).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepConfig {
    pub n_directions: usize,
    /// Atom depth for densities.
    pub depth: usize,
    pub h: f64,
    pub q: f64,
    /// Depth of the materialized atoms used for test-function integrals.
    pub test_depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub angle: f64,
    pub z: Direction,
    pub lq_norm: f64,
    pub mass: f64,
    pub max_density: f64,
    /// Length of the grid carrying the density.
    pub support_length: f64,
    pub test_integrals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub family: TestFamily,
    /// `max |w|` over the atoms used for test integrals.
    pub max_modulus: f64,
    pub rows: Vec<SweepRow>,
}

/// Norms and test integrals of `P_{z_j} ν` for `z_j = e^{2π i j / n}`.
pub fn direction_sweep(system: &IfsSystem, config: SweepConfig) -> Result<SweepResult> {
    if config.n_directions < 8 {
        return Err(Error::InvalidParameter(
            "a sweep needs at least 8 directions".into(),
        ));
    }
    let atoms = atomic_approx_with_budget(system, config.test_depth, DEFAULT_ATOM_BUDGET)?;
    let family = TestFamily::for_system(system);
    let rows: Result<Vec<SweepRow>> = (0..config.n_directions)
        .into_par_iter()
        .map(|j| {
            let angle = std::f64::consts::TAU * j as f64 / config.n_directions as f64;
            let z = Direction::from_angle(angle);
            let g = projected_density(system, z, config.depth, config.h)?;
            Ok(SweepRow {
                index: j,
                angle,
                z,
                lq_norm: lq_norm(&g, config.q)?,
                mass: g.mass(),
                max_density: g.max_value(),
                support_length: g.values.len() as f64 * g.h,
                test_integrals: family.integrals(&atoms, z),
            })
        })
        .collect();
    Ok(SweepResult {
        config,
        max_modulus: atoms.max_modulus(),
        family,
        rows: rows?,
    })
}

impl SweepResult {
    /// Largest excess of `|∫h dP_zν - ∫h dP_z'ν|` over `Lip(h) |z - z'| max|w|`
    /// across cyclically adjacent rows (≤ 0 when the bound holds everywhere).
    pub fn lipschitz_excess(&self) -> f64 {
        let lip = self.family.lipschitz();
        let n = self.rows.len();
        let mut worst = f64::NEG_INFINITY;
        for j in 0..n {
            let (a, b) = (&self.rows[j], &self.rows[(j + 1) % n]);
            let bound = lip * (a.z.z() - b.z.z()).norm() * self.max_modulus;
            for (x, y) in a.test_integrals.iter().zip(&b.test_integrals) {
                worst = worst.max((x - y).abs() - bound);
            }
        }
        worst
    }

    /// CSV with columns `z_angle,lq_norm,test_integral_0..7`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let m = self.family.centers.len();
        let heads: Vec<String> = (0..m).map(|i| format!("test_integral_{i}")).collect();
        writeln!(out, "z_angle,lq_norm,{}", heads.join(","))?;
        for row in &self.rows {
            let vals: Vec<String> = row.test_integrals.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{},{},{}", row.angle, row.lq_norm, vals.join(","))?;
        }
        Ok(())
    }
}
