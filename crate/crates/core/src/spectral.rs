//! Fourier transforms of atomic approximations, the projection identity
//! `(P_z ν)^(t) = ν^(t z)`, decay fits and Sobolev norms of projected densities.
//!
//! Conventions: `ν^(ξ) = ∫ e^{i <ξ, w>} dν(w)` on the plane and
//! `μ^(t) = ∫ e^{i t x} dμ(x)` on the line. With this convention Parseval
//! reads `∫ |g^|² = 2π ∫ |g|²`, so Sobolev norms carry a `1 / 2π` factor and
//! `||g||_(0)` is the L² norm.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ifs::{inner, ComplexVal, IfsSystem};
use crate::measure::AtomicMeasure2D;
use crate::projection::{Direction, ProjectedAtoms};
use crate::stats::{linear_fit, KahanSum};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "values", rename_all = "snake_case")]
pub enum Frequencies {
    Line(Vec<f64>),
    Plane(Vec<ComplexVal>),
}

impl Frequencies {
    pub fn len(&self) -> usize {
        match self {
            Frequencies::Line(v) => v.len(),
            Frequencies::Plane(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Transform samples of a probability measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumTable {
    pub frequencies: Frequencies,
    pub values: Vec<ComplexVal>,
}

impl SpectrumTable {
    pub fn max_modulus(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// CSV with columns `freq_re,freq_im,value_re,value_im,modulus`
    /// (`t,value_re,value_im,modulus` for line spectra).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        match &self.frequencies {
            Frequencies::Line(ts) => {
                writeln!(out, "t,value_re,value_im,modulus")?;
                for (t, v) in ts.iter().zip(&self.values) {
                    writeln!(out, "{},{},{},{}", t, v.re, v.im, v.norm())?;
                }
            }
            Frequencies::Plane(xs) => {
                writeln!(out, "freq_re,freq_im,value_re,value_im,modulus")?;
                for (x, v) in xs.iter().zip(&self.values) {
                    writeln!(out, "{},{},{},{},{}", x.re, x.im, v.re, v.im, v.norm())?;
                }
            }
        }
        Ok(())
    }
}

fn phase_sum<I: Iterator<Item = (f64, f64)>>(terms: I) -> ComplexVal {
    let (mut re, mut im) = (KahanSum::new(), KahanSum::new());
    for (phase, weight) in terms {
        let (s, c) = phase.sin_cos();
        re.add(weight * c);
        im.add(weight * s);
    }
    ComplexVal::new(re.value(), im.value())
}

/// `ν^(ξ_j) = Σ_k w_k e^{i <ξ_j, w_k>}` by direct summation.
pub fn ft_2d(measure: &AtomicMeasure2D, xi_list: &[ComplexVal]) -> SpectrumTable {
    let values = xi_list
        .par_iter()
        .map(|xi| {
            phase_sum(
                measure
                    .points
                    .iter()
                    .zip(&measure.weights)
                    .map(|(w, p)| (inner(*xi, *w), *p)),
            )
        })
        .collect();
    SpectrumTable {
        frequencies: Frequencies::Plane(xi_list.to_vec()),
        values,
    }
}

/// `(P_z μ)^(t_j)` summed over the projected atoms.
pub fn ft_projection(measure: &AtomicMeasure2D, z: Direction, t_list: &[f64]) -> SpectrumTable {
    let positions: Vec<f64> = measure.points.iter().map(|w| z.project(*w)).collect();
    let values = t_list
        .par_iter()
        .map(|t| {
            phase_sum(
                positions
                    .iter()
                    .zip(&measure.weights)
                    .map(|(x, p)| (t * x, *p)),
            )
        })
        .collect();
    SpectrumTable {
        frequencies: Frequencies::Line(t_list.to_vec()),
        values,
    }
}

/// Transform of the depth-`depth` atomic approximation via the product
/// `ν_d^(ξ) = e^{i <λ̄^d ξ, b>} Π_{j<d} Σ_i p_i e^{i <λ̄^j ξ, a_i>}`.
pub fn ft_2d_product(system: &IfsSystem, depth: usize, xi: ComplexVal) -> ComplexVal {
    let lambda_bar = system.lambda().conj();
    let mut acc = ComplexVal::new(1.0, 0.0);
    let mut x = xi;
    for _ in 0..depth {
        let level: ComplexVal = system
            .translations()
            .iter()
            .zip(system.probs())
            .map(|(a, p)| ComplexVal::from_polar(*p, inner(x, *a)))
            .sum();
        acc *= level;
        x *= lambda_bar;
    }
    acc * ComplexVal::from_polar(1.0, inner(x, system.barycenter()))
}

/// `|ξ| <= r^{-(depth - 2)}`: beyond it the atoms' discreteness dominates.
pub fn trusted_band(system: &IfsSystem, depth: usize) -> f64 {
    system.r().powi(-(depth as i32 - 2))
}

/// Where transform values come from.
#[derive(Debug, Clone, Copy)]
pub enum SpectrumSource<'a> {
    /// Direct summation over given atoms.
    Atoms(&'a AtomicMeasure2D),
    /// Product formula for the depth-`depth` approximation of a system.
    System { system: &'a IfsSystem, depth: usize },
}

impl SpectrumSource<'_> {
    fn eval(&self, xi: ComplexVal) -> ComplexVal {
        match self {
            SpectrumSource::Atoms(m) => ft_2d(m, &[xi]).values[0],
            SpectrumSource::System { system, depth } => ft_2d_product(system, *depth, xi),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub gamma_hat: f64,
    /// Intercept of `log max|ν^|` against `log T` (log of the constant).
    pub intercept: f64,
    pub r2: f64,
    pub freq_range: (f64, f64),
    /// `(T, max |ν^| on |ξ| ∈ [T, 2T])` per rung.
    pub rungs: Vec<(f64, f64)>,
    /// Present when the contraction violates a standing hypothesis.
    pub hypothesis_note: Option<String>,
}

pub const ANNULUS_DIRECTIONS: usize = 64;
pub const ANNULUS_MODULI: usize = 8;

/// Fit `max_{|ξ| ∈ [T, 2T]} |ν^(ξ)| ≈ C T^{-γ}` over a geometric ladder of `T`.
pub fn fit_decay(source: SpectrumSource<'_>, freq_ladder: &[f64]) -> Result<DecayFit> {
    const MIN_RUNGS: usize = 6;
    if freq_ladder.len() < MIN_RUNGS {
        return Err(Error::InsufficientRungs {
            got: freq_ladder.len(),
            need: MIN_RUNGS,
        });
    }
    if freq_ladder.iter().any(|t| !(*t > 0.0)) || freq_ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "frequency ladder must be positive and increasing".into(),
        ));
    }
    let top = 2.0 * freq_ladder[freq_ladder.len() - 1];
    let mut note = None;
    if let SpectrumSource::System { system, depth } = source {
        let band = trusted_band(system, depth);
        if top > band {
            return Err(Error::CutoffOutsideTrustedBand { cutoff: top, band });
        }
        if system.is_real_contraction() {
            note = Some("contraction is real; the decay hypothesis excludes real λ".into());
        }
    }
    let rungs: Vec<(f64, f64)> = freq_ladder
        .par_iter()
        .map(|&t| {
            let mut best: f64 = 0.0;
            for m in 0..ANNULUS_MODULI {
                let modulus = t * 2f64.powf((m as f64 + 0.5) / ANNULUS_MODULI as f64);
                for d in 0..ANNULUS_DIRECTIONS {
                    // Offset successive moduli to spread the sampled angles.
                    let angle = std::f64::consts::TAU
                        * (d as f64 + (m as f64 + 0.5) / ANNULUS_MODULI as f64)
                        / ANNULUS_DIRECTIONS as f64;
                    best = best.max(source.eval(ComplexVal::from_polar(modulus, angle)).norm());
                }
            }
            (t, best)
        })
        .collect();
    let xs: Vec<f64> = rungs.iter().map(|(t, _)| t.ln()).collect();
    let ys: Vec<f64> = rungs.iter().map(|(_, m)| m.max(1e-300).ln()).collect();
    let fit = linear_fit(&xs, &ys)
        .ok_or_else(|| Error::InvalidParameter("degenerate frequency ladder".into()))?;
    Ok(DecayFit {
        gamma_hat: -fit.slope,
        intercept: fit.intercept,
        r2: fit.r2,
        freq_range: (freq_ladder[0], top),
        rungs,
        hypothesis_note: note,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SobolevEstimate {
    pub gamma: f64,
    pub norm: f64,
    /// Largest `|ξ|` integrated.
    pub cutoff: f64,
    pub step: f64,
    /// The last decade `[cutoff / 10, cutoff]` carries more than 10% of the integral.
    pub tail_flag: bool,
    pub tail_fraction: f64,
}

/// `(1/2π ∫_{|ξ| <= cutoff} |g^(ξ)|² (1 + ξ²)^γ dξ)^{1/2}` by the trapezoid
/// rule, for several `γ` sharing one set of transform values.
pub fn sobolev_norms_from<F>(
    transform: F,
    gammas: &[f64],
    cutoff: f64,
    step: f64,
) -> Result<Vec<SobolevEstimate>>
where
    F: Fn(f64) -> ComplexVal + Sync,
{
    if gammas.iter().any(|g| !(*g >= 0.0)) {
        return Err(Error::InvalidParameter("gamma must be >= 0".into()));
    }
    if !(cutoff > 0.0) || !(step > 0.0) {
        return Err(Error::InvalidParameter("cutoff and step must be > 0".into()));
    }
    let n = (cutoff / step).ceil() as usize;
    let h = cutoff / n as f64;
    let power: Vec<f64> = (0..=n)
        .into_par_iter()
        .map(|j| transform(j as f64 * h).norm_sqr())
        .collect();
    let tail_start = cutoff / 10.0;
    Ok(gammas
        .iter()
        .map(|&gamma| {
            let (mut total, mut tail) = (KahanSum::new(), KahanSum::new());
            for (j, p) in power.iter().enumerate() {
                let xi = j as f64 * h;
                let trap = if j == 0 || j == n { 0.5 } else { 1.0 };
                let term = trap * h * p * (1.0 + xi * xi).powf(gamma);
                total.add(term);
                if xi >= tail_start {
                    tail.add(term);
                }
            }
            // Even integrand: double the half line, then divide by 2π.
            let integral = total.value() / std::f64::consts::PI;
            let tail_fraction = if total.value() > 0.0 {
                tail.value() / total.value()
            } else {
                0.0
            };
            SobolevEstimate {
                gamma,
                norm: integral.sqrt(),
                cutoff,
                step: h,
                tail_flag: tail_fraction > 0.1,
                tail_fraction,
            }
        })
        .collect())
}

/// `sin(x) / x`.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0
    } else {
        x.sin() / x
    }
}

/// Sobolev norms of the density of `P_z ν`, using `g_z^ = (P_z ν)^` on the
/// depth-`depth` approximation.
///
/// With `resolution = Some(h)` the density is first averaged over windows of
/// width `h` (transform multiplied by `sinc(ξ h / 2)`), which is the density a
/// histogram of bin width `h` resolves.
pub fn sobolev_norms(
    system: &IfsSystem,
    z: Direction,
    gammas: &[f64],
    depth: usize,
    cutoff: f64,
    step: f64,
    resolution: Option<f64>,
) -> Result<Vec<SobolevEstimate>> {
    let band = trusted_band(system, depth);
    if cutoff > band {
        return Err(Error::CutoffOutsideTrustedBand { cutoff, band });
    }
    if let Some(h) = resolution {
        if !(h > 0.0) {
            return Err(Error::InvalidParameter("resolution must be > 0".into()));
        }
    }
    let atoms = ProjectedAtoms::new(system, z, depth);
    match resolution {
        None => sobolev_norms_from(|t| atoms.fourier(t), gammas, cutoff, step),
        Some(h) => sobolev_norms_from(|t| atoms.fourier(t) * sinc(t * h / 2.0), gammas, cutoff, step),
    }
}

pub fn sobolev_norm(
    system: &IfsSystem,
    z: Direction,
    gamma: f64,
    depth: usize,
    cutoff: f64,
    step: f64,
    resolution: Option<f64>,
) -> Result<SobolevEstimate> {
    Ok(sobolev_norms(system, z, &[gamma], depth, cutoff, step, resolution)?.remove(0))
}
