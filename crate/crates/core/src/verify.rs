//! The acceptance suite: thirteen numerical checks with pinned settings,
//! closed-form oracles and deterministic seeding.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dimension::{correlation_dimension, empirical_dq, DqConfig, DqInput};
use crate::error::Result;
use crate::ifs::{check_irrational_rotation, closed_form_dims, presets, IfsSystem, RotationCheck};
use crate::measure::{atomic_approx, default_word_length, sample_measure};
use crate::projection::{
    direction_sweep, lq_norm, projected_density, selfsim_density_residual, Direction, SweepConfig,
};
use crate::sets::{equivalence_check, project_attractor, project_attractor_inner, slice_set_boxdim};
use crate::slices::{
    dimension_conservation_report, sample_coded_points, shift_pushforward_check,
    slice_mass_empirical, slice_mass_formula, ConservationConfig, DensityCache, DensityRead,
};
use crate::spectral::{ft_2d, ft_projection, sobolev_norms, trusted_band};
use crate::ssc::{check_ssc, SscVerdict};
use crate::stats::{median, quantile};

pub const SCHEMA_VERSION: u32 = 1;

/// Pass thresholds. Defaults are the acceptance values; any of them can be
/// overridden from a JSON file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub dq_abs: f64,
    pub projection_identity: f64,
    pub residual_sys_a: f64,
    pub residual_sys_b: f64,
    /// Allowed growth of the residual from depth 10 to 12 (relative).
    pub residual_growth: f64,
    pub norm_ratio_soft: f64,
    pub mass_abs: f64,
    pub lipschitz_slack: f64,
    pub slice_median_rel: f64,
    pub slice_p90_rel: f64,
    pub slice_dim_abs: f64,
    pub slice_set_dim_abs: f64,
    pub inner_outer_ratio: f64,
    pub coverage_a: f64,
    pub coverage_b: f64,
    pub parseval_rel: f64,
    pub pushforward_abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            dq_abs: 0.10,
            projection_identity: 1e-12,
            residual_sys_a: 0.05,
            residual_sys_b: 0.08,
            residual_growth: 0.20,
            norm_ratio_soft: 5.0,
            mass_abs: 1e-6,
            lipschitz_slack: 1e-12,
            slice_median_rel: 0.10,
            slice_p90_rel: 0.25,
            slice_dim_abs: 0.15,
            slice_set_dim_abs: 0.15,
            inner_outer_ratio: 0.5,
            coverage_a: 0.95,
            coverage_b: 0.99,
            parseval_rel: 0.05,
            pushforward_abs: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub seed: u64,
    pub tolerances: Tolerances,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 20240601,
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub threshold: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Precondition {
    pub system: String,
    pub ssc: SscVerdict,
    pub rotation: RotationCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcceptanceReport {
    pub schema_version: u32,
    pub version: String,
    pub config: VerifyConfig,
    pub preconditions: Vec<Precondition>,
    pub criteria: Vec<CriterionResult>,
    pub all_passed: bool,
}

impl AcceptanceReport {
    /// One `PASS`/`FAIL` line per criterion.
    pub fn summary_lines(&self) -> Vec<String> {
        self.criteria
            .iter()
            .map(|c| {
                format!(
                    "{} [{:>2}] {}: measured {} (threshold {}) {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.id,
                    c.name,
                    fmt(c.measured),
                    c.threshold,
                    c.detail
                )
            })
            .collect()
    }
}

fn fmt(x: f64) -> String {
    if x != 0.0 && (x.abs() < 1e-3 || x.abs() >= 1e4) {
        format!("{x:.3e}")
    } else {
        format!("{x:.5}")
    }
}

fn result(id: u32, name: &str, passed: bool, measured: f64, threshold: String, detail: String) -> CriterionResult {
    CriterionResult {
        id,
        name: name.to_string(),
        passed,
        measured,
        threshold,
        detail,
    }
}

fn systems() -> [(&'static str, IfsSystem); 2] {
    [("SYS-A", presets::sys_a()), ("SYS-B", presets::sys_b())]
}

fn spread_directions(n: usize, offset: f64) -> Vec<Direction> {
    (0..n)
        .map(|j| Direction::from_angle(TAU * j as f64 / n as f64 + offset))
        .collect()
}

/// `n` distinct lines: `z` and `-z` project onto the same line up to reflection.
fn spread_lines(n: usize, offset: f64) -> Vec<Direction> {
    (0..n)
        .map(|j| Direction::from_angle(PI * j as f64 / n as f64 + offset))
        .collect()
}

pub fn closed_form_oracle(config: &VerifyConfig) -> Result<CriterionResult> {
    let tol = config.tolerances.dq_abs;
    let scales = (0.35f64.powi(8), 0.35f64.powi(2));
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (k, (name, s)) in systems().iter().enumerate() {
        let target = closed_form_dims(s, 2.0)?.dq_closed;
        let samples = sample_measure(s, 100_000, default_word_length(s), config.seed + k as u64)?;
        let est = empirical_dq(DqInput::Samples(&samples.points), &DqConfig::for_system(s, 2.0, scales))?;
        let corr = correlation_dimension(&samples.points, scales, None, 20_000)?;
        worst = worst.max((est.dq - target).abs());
        parts.push(format!(
            "{name}: D2 box {:.4} [{:.4}, {:.4}], correlation {:.4}, closed {:.5}",
            est.dq, est.ci95.0, est.ci95.1, corr.dq, target
        ));
    }
    Ok(result(
        1,
        "closed-form D2 oracle",
        worst <= tol,
        worst,
        format!("|D2 - closed| <= {tol}"),
        parts.join("; "),
    ))
}

pub fn projection_identity(config: &VerifyConfig) -> Result<CriterionResult> {
    let tol = config.tolerances.projection_identity;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut worst: f64 = 0.0;
    for (_, s) in systems() {
        let atoms = atomic_approx(&s, 10)?;
        for _ in 0..100 {
            let t: f64 = rng.random_range(-100.0..100.0);
            let z = Direction::from_angle(rng.random_range(0.0..TAU));
            let lhs = ft_projection(&atoms, z, &[t]).values[0];
            let rhs = ft_2d(&atoms, &[z.z() * t]).values[0];
            worst = worst.max((lhs - rhs).norm());
        }
    }
    Ok(result(
        2,
        "Fourier projection identity",
        worst < tol,
        worst,
        format!("< {tol:e}"),
        "100 random (t, z), |t| < 100, per system, depth-10 atoms".into(),
    ))
}

pub fn density_self_similarity(config: &VerifyConfig) -> Result<CriterionResult> {
    let tol = &config.tolerances;
    let cases = [
        ("SYS-A", presets::sys_a(), 0.0, 1usize, tol.residual_sys_a),
        ("SYS-B", presets::sys_b(), 0.7, 2usize, tol.residual_sys_b),
    ];
    let mut passed = true;
    let mut worst_ratio: f64 = 0.0;
    let mut parts = Vec::new();
    for (name, s, theta, k, limit) in cases {
        let z = Direction::from_angle(theta);
        let r10 = selfsim_density_residual(&s, z, k, 10, 0.01)?;
        let r12 = selfsim_density_residual(&s, z, k, 12, 0.01)?;
        let ok = r12 < limit && r12 <= (1.0 + tol.residual_growth) * r10;
        passed &= ok;
        worst_ratio = worst_ratio.max(r12 / limit);
        parts.push(format!(
            "{name}: depth 10 {r10:.5}, depth 12 {r12:.5} (limit {limit}, {})",
            if r12 < r10 { "strictly decreasing" } else { "not strictly decreasing" }
        ));
    }
    Ok(result(
        3,
        "density self-similarity residual",
        passed,
        worst_ratio,
        format!(
            "residual12 / limit < 1 and residual12 <= {}x residual10",
            1.0 + tol.residual_growth
        ),
        parts.join("; "),
    ))
}

fn sys_a_sweep() -> Result<crate::projection::SweepResult> {
    direction_sweep(
        &presets::sys_a(),
        SweepConfig {
            n_directions: 360,
            depth: 10,
            h: 0.01,
            q: 2.0,
            test_depth: 8,
        },
    )
}

pub fn bounded_norms(config: &VerifyConfig, sweep: &crate::projection::SweepResult) -> CriterionResult {
    let tol = &config.tolerances;
    let norms: Vec<f64> = sweep.rows.iter().map(|r| r.lq_norm).collect();
    let finite = sweep
        .rows
        .iter()
        .all(|r| r.lq_norm.is_finite() && r.mass.is_finite() && r.max_density.is_finite());
    let mass_dev = sweep
        .rows
        .iter()
        .map(|r| (r.mass - 1.0).abs())
        .fold(0.0, f64::max);
    let max = norms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = norms.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio = max / median(&norms);
    let soft = ratio < tol.norm_ratio_soft;
    result(
        4,
        "bounded L2 norms over 360 directions",
        finite && mass_dev <= tol.mass_abs,
        ratio,
        format!(
            "all finite, |mass - 1| <= {:e}; soft: max/median < {}",
            tol.mass_abs, tol.norm_ratio_soft
        ),
        format!(
            "SYS-A: L2 norm range [{min:.4}, {max:.4}], max mass deviation {mass_dev:.2e}, soft bound {}",
            if soft { "met" } else { "NOT met" }
        ),
    )
}

pub fn weak_continuity(config: &VerifyConfig, sweep: &crate::projection::SweepResult) -> CriterionResult {
    let slack = config.tolerances.lipschitz_slack;
    let excess = sweep.lipschitz_excess();
    result(
        5,
        "Lipschitz bound for test integrals",
        excess <= slack,
        excess,
        format!("max(|diff| - bound) <= {slack:e}"),
        format!(
            "SYS-A: {} test functions, {} adjacent pairs, Lip {:.4}, max|w| {:.4}",
            sweep.family.centers.len(),
            sweep.rows.len(),
            sweep.family.lipschitz(),
            sweep.max_modulus
        ),
    )
}

pub fn slice_cross_validation(config: &VerifyConfig) -> Result<CriterionResult> {
    let tol = &config.tolerances;
    let s = presets::sys_a();
    let z = Direction::from_angle(0.0);
    let (k, delta) = (2usize, 0.02);
    let cache = DensityCache::new(&s, 12, 0.01);
    cache.prepare(z, k)?;
    let samples = sample_measure(&s, 100_000, default_word_length(&s), config.seed)?;
    let points = sample_coded_points(&s, 100, k, config.seed + 1)?;
    let (mut rel, mut rel_bin) = (Vec::new(), Vec::new());
    let mut skipped = 0;
    for p in &points {
        let formula = match slice_mass_formula(&cache, z, p, k, DensityRead::Window { delta }) {
            Ok(m) => m,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        let emp = slice_mass_empirical(&s, &samples.points, z, p.w, &p.word.prefix(k), delta)?;
        rel.push((formula.mass - emp).abs() / emp);
        if let Ok(b) = slice_mass_formula(&cache, z, p, k, DensityRead::Bin) {
            rel_bin.push((b.mass - emp).abs() / emp);
        }
    }
    let (med, p90) = (median(&rel), quantile(&rel, 0.9));
    Ok(result(
        6,
        "slice-mass formula vs windowed counts",
        med < tol.slice_median_rel && p90 < tol.slice_p90_rel,
        med,
        format!("median < {}, p90 < {}", tol.slice_median_rel, tol.slice_p90_rel),
        format!(
            "SYS-A z=1 k=2 delta={delta}: median {med:.4}, p90 {p90:.4} over {} points ({skipped} below density floor); single-bin reads: median {:.4}, p90 {:.4}",
            rel.len(),
            median(&rel_bin),
            quantile(&rel_bin, 0.9)
        ),
    ))
}

pub fn dimension_conservation(config: &VerifyConfig) -> Result<CriterionResult> {
    let tol = config.tolerances.slice_dim_abs;
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (name, s) in systems() {
        let target = closed_form_dims(&s, 2.0)?.dim_h_measure_closed - 1.0;
        let mut medians = Vec::new();
        let mut skipped = 0;
        for z in spread_lines(8, 0.1) {
            let rep = dimension_conservation_report(
                &s,
                z,
                ConservationConfig {
                    seed: config.seed,
                    ..ConservationConfig::default()
                },
            )?;
            worst = worst.max((rep.median_slice_dim - target).abs());
            skipped += rep.n_skipped;
            medians.push(format!("{:.3}", rep.median_slice_dim));
        }
        parts.push(format!(
            "{name}: target {target:.5}, medians [{}], {skipped} points skipped",
            medians.join(", ")
        ));
    }
    Ok(result(
        7,
        "slice local dimension in 8 directions",
        worst <= tol,
        worst,
        format!("|median - (dim_H nu - 1)| <= {tol}"),
        parts.join("; "),
    ))
}

pub fn slice_set_dimension(config: &VerifyConfig) -> Result<CriterionResult> {
    let tol = config.tolerances.slice_set_dim_abs;
    let s = presets::sys_a();
    let target = closed_form_dims(&s, 2.0)?.dim_h_set_closed - 1.0;
    let samples = sample_measure(&s, 20, default_word_length(&s), config.seed + 2)?;
    let mut worst: f64 = 0.0;
    let mut medians = Vec::new();
    for z in spread_lines(4, 0.1) {
        let slopes = samples
            .points
            .iter()
            .map(|w| slice_set_boxdim(&s, z, z.project(*w), 12).map(|r| r.slope))
            .collect::<Result<Vec<f64>>>()?;
        let m = median(&slopes);
        worst = worst.max((m - target).abs());
        medians.push(format!("{m:.3}"));
    }
    Ok(result(
        8,
        "slice-set box dimension",
        worst <= tol,
        worst,
        format!("|median - (s - 1)| <= {tol}"),
        format!("SYS-A: target {target:.5}, medians [{}] over 20 x-values each", medians.join(", ")),
    ))
}

pub fn uniform_projected_length(config: &VerifyConfig) -> Result<CriterionResult> {
    let ratio_tol = config.tolerances.inner_outer_ratio;
    let s = presets::sys_a();
    let (mut min_outer, mut min_inner) = (f64::INFINITY, f64::INFINITY);
    let (mut arg_outer, mut arg_inner) = (0.0, 0.0);
    for z in spread_directions(360, 0.0) {
        let outer = project_attractor(&s, z, 12).total_length;
        let inner = project_attractor_inner(&s, z, 12).total_length;
        if outer < min_outer {
            min_outer = outer;
            arg_outer = z.angle();
        }
        if inner < min_inner {
            min_inner = inner;
            arg_inner = z.angle();
        }
    }
    Ok(result(
        9,
        "uniform lower bound on projected length",
        min_outer > 0.0 && min_inner > ratio_tol * min_outer,
        min_inner / min_outer,
        format!("min outer > 0 and min inner / min outer > {ratio_tol}"),
        format!(
            "SYS-A depth 12: min outer {min_outer:.4} at angle {arg_outer:.4}, min inner {min_inner:.4} at angle {arg_inner:.4}"
        ),
    ))
}

pub fn equivalence(config: &VerifyConfig) -> Result<CriterionResult> {
    let tol = &config.tolerances;
    let (mut min_a, mut min_b) = (f64::INFINITY, f64::INFINITY);
    let (mut min_a_exact, mut min_b_exact) = (f64::INFINITY, f64::INFINITY);
    for (_, s) in systems() {
        for z in spread_lines(8, 0.1) {
            let rep = equivalence_check(&s, z, 12, 0.01, None)?;
            min_a = min_a.min(rep.cov_a);
            min_b = min_b.min(rep.cov_b);
            min_a_exact = min_a_exact.min(rep.cov_a_exact);
            min_b_exact = min_b_exact.min(rep.cov_b_exact);
        }
    }
    Ok(result(
        10,
        "density support vs projected attractor",
        min_a >= tol.coverage_a && min_b >= tol.coverage_b,
        min_a.min(min_b),
        format!("coverage (a) >= {}, (b) >= {}", tol.coverage_a, tol.coverage_b),
        format!(
            "both systems, 8 directions, depth 12, h=0.01: min (a) {min_a:.4}, min (b) {min_b:.4} at bin resolution; against exact union length: min (a) {min_a_exact:.4}, min (b) {min_b_exact:.4}"
        ),
    ))
}

/// The Sobolev side is computed at the histogram's resolution (window-averaged
/// density) with the cutoff at the edge of the trusted band; the sharp-cutoff
/// estimate at `π / h` is reported alongside.
pub fn sobolev_parseval(config: &VerifyConfig) -> Result<CriterionResult> {
    let tol = config.tolerances.parseval_rel;
    let s = presets::sys_a();
    let (h, depth) = (0.01, 12);
    let gammas = [0.0, 0.05, 0.1];
    let mut worst: f64 = 0.0;
    let mut monotone = true;
    let mut parts = Vec::new();
    for theta in [0.0, 0.9] {
        let z = Direction::from_angle(theta);
        let g = projected_density(&s, z, depth, h)?;
        let l2 = lq_norm(&g, 2.0)?.powi(2);
        let est = sobolev_norms(&s, z, &gammas, depth, trusted_band(&s, depth), 0.05, Some(h))?;
        let sharp = sobolev_norms(&s, z, &gammas, depth, PI / h, 0.05, None)?;
        let rel = (est[0].norm.powi(2) - l2).abs() / l2;
        worst = worst.max(rel);
        monotone &= est.windows(2).all(|w| w[0].norm <= w[1].norm);
        monotone &= sharp.windows(2).all(|w| w[0].norm <= w[1].norm);
        parts.push(format!(
            "z=e^(i{theta}): h*sum g^2 {l2:.5}, resolution-h norm^2 {:.5}, sharp-cutoff norm^2 {:.5} (rel {:.4}), norms [{:.5}, {:.5}, {:.5}]",
            est[0].norm.powi(2),
            sharp[0].norm.powi(2),
            (sharp[0].norm.powi(2) - l2).abs() / l2,
            est[0].norm,
            est[1].norm,
            est[2].norm
        ));
    }
    Ok(result(
        11,
        "Sobolev norm at gamma 0 vs histogram L2",
        worst < tol && monotone,
        worst,
        format!("relative difference < {tol}, monotone in gamma"),
        format!("SYS-A, depth 12, h=0.01: {}; monotone {monotone}", parts.join("; ")),
    ))
}

pub fn shift_measure_preservation(config: &VerifyConfig) -> Result<CriterionResult> {
    let tol = config.tolerances.pushforward_abs;
    let mut worst: f64 = 0.0;
    let mut mismatches = 0;
    for (_, s) in systems() {
        let mut coarse = atomic_approx(&s, 0)?;
        for d in 1..=8 {
            let fine = atomic_approx(&s, d)?;
            let check = shift_pushforward_check(&s, &fine, &coarse, d)?;
            worst = worst
                .max(check.max_position_error)
                .max(check.max_weight_error);
            mismatches += check.coding_mismatches;
            coarse = fine;
        }
    }
    Ok(result(
        12,
        "shift map preserves the measure",
        worst <= tol && mismatches == 0,
        worst,
        format!("position and weight error <= {tol:e}"),
        format!("both systems, depths 1..8, {mismatches} coding mismatches"),
    ))
}

/// Runs the sampled and streamed computations under two thread counts and
/// compares their serialized outputs.
pub fn thread_determinism(config: &VerifyConfig) -> Result<CriterionResult> {
    let s = presets::sys_b();
    let run = || -> Result<String> {
        let samples = sample_measure(&s, 50_000, default_word_length(&s), config.seed)?;
        let g = projected_density(&s, Direction::from_angle(0.3), 11, 0.01)?;
        let est = empirical_dq(
            DqInput::Samples(&samples.points),
            &DqConfig::for_system(&s, 2.0, (0.35f64.powi(6), 0.35f64.powi(2))),
        )?;
        Ok(serde_json::to_string(&(samples, g, est))?)
    };
    let outputs = [1usize, 3]
        .iter()
        .map(|&n| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| crate::error::Error::InvalidParameter(e.to_string()))?
                .install(run)
        })
        .collect::<Result<Vec<String>>>()?;
    let same = outputs[0] == outputs[1];
    Ok(result(
        13,
        "determinism",
        same,
        if same { 0.0 } else { 1.0 },
        "byte-identical outputs".into(),
        format!(
            "samples, density and D2 under 1 and 3 threads: {} bytes, {}",
            outputs[0].len(),
            if same { "identical" } else { "DIFFERENT" }
        ),
    ))
}

pub fn preconditions() -> Vec<Precondition> {
    systems()
        .into_iter()
        .map(|(name, s)| Precondition {
            system: name.to_string(),
            ssc: check_ssc(&s, 8),
            rotation: check_irrational_rotation(&s, 1_000_000),
        })
        .collect()
}

/// Runs every criterion in order.
pub fn run_all(config: &VerifyConfig) -> Result<AcceptanceReport> {
    let sweep = sys_a_sweep()?;
    let criteria = vec![
        closed_form_oracle(config)?,
        projection_identity(config)?,
        density_self_similarity(config)?,
        bounded_norms(config, &sweep),
        weak_continuity(config, &sweep),
        slice_cross_validation(config)?,
        dimension_conservation(config)?,
        slice_set_dimension(config)?,
        uniform_projected_length(config)?,
        equivalence(config)?,
        sobolev_parseval(config)?,
        shift_measure_preservation(config)?,
        thread_determinism(config)?,
    ];
    Ok(AcceptanceReport {
        schema_version: SCHEMA_VERSION,
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: *config,
        preconditions: preconditions(),
        all_passed: criteria.iter().all(|c| c.passed),
        criteria,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerances_override_partially() {
        let t: Tolerances = serde_json::from_str(r#"{"dq_abs": 0.2}"#).unwrap();
        assert_eq!(t.dq_abs, 0.2);
        assert_eq!(t.coverage_b, 0.99);
        assert!(serde_json::from_str::<Tolerances>(r#"{"nope": 1}"#).is_err());
    }

    #[test]
    fn cheap_criteria_pass() {
        let cfg = VerifyConfig::default();
        for c in [
            shift_measure_preservation(&cfg).unwrap(),
            sobolev_parseval(&cfg).unwrap(),
            thread_determinism(&cfg).unwrap(),
        ] {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn summary_line_format() {
        let c = result(3, "x", false, 0.5, "t".into(), "d".into());
        let rep = AcceptanceReport {
            schema_version: SCHEMA_VERSION,
            version: "0".into(),
            config: VerifyConfig::default(),
            preconditions: vec![],
            criteria: vec![c],
            all_passed: false,
        };
        assert_eq!(rep.summary_lines(), vec!["FAIL [ 3] x: measured 0.50000 (threshold t) d"]);
    }
}
