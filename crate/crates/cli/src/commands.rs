use std::fs;

use rayon::prelude::*;
use selfsim_core::dimension::{correlation_dimension, empirical_dq, DqConfig, DqInput};
use selfsim_core::ifs::presets;
use selfsim_core::measure::{default_word_length, sample_measure};
use selfsim_core::projection::{direction_sweep, projected_density, DensityGrid, ProjectedAtoms, SweepConfig};
use selfsim_core::sets::{
    coverage, project_attractor, project_attractor_inner, slice_set_boxdim, write_coverage_csv,
};
use selfsim_core::slices::{
    dimension_conservation_report, sample_coded_points, slice_local_dim, slice_mass_empirical,
    slice_mass_formula, write_slice_csv, ConservationConfig, DensityCache, DensityRead, SliceRow,
};
use selfsim_core::spectral::{
    fit_decay, sobolev_norms, trusted_band, Frequencies, SpectrumSource, SpectrumTable,
};
use selfsim_core::stats::{median, quantile};
use selfsim_core::verify::{run_all, AcceptanceReport, Tolerances, VerifyConfig};
use selfsim_core::{
    check_irrational_rotation, check_ssc, closed_form_dims, lq_norm, Direction, Error, IfsSystem,
    Result, SystemFile,
};
use serde_json::json;

use crate::args::*;
use crate::output::{write_csv_artifact, Envelope};

pub fn load_system(args: &SystemArgs) -> Result<(IfsSystem, SystemFile)> {
    let file = if let Some(path) = &args.system {
        SystemFile::from_json(&fs::read_to_string(path)?)?
    } else if let Some(text) = &args.system_json {
        SystemFile::from_json(text)?
    } else {
        let system = presets::by_name(&args.preset).ok_or_else(|| {
            Error::InvalidParameter(format!("unknown preset '{}'", args.preset))
        })?;
        SystemFile::from_system(&system, Some(&args.preset))
    };
    Ok((file.to_system()?, file))
}

fn config_with_system<T: serde::Serialize>(args: &T, file: &SystemFile) -> Result<serde_json::Value> {
    let mut v = serde_json::to_value(args)?;
    v["system_definition"] = serde_json::to_value(file)?;
    Ok(v)
}

pub fn validate(args: &ValidateArgs) -> Result<Envelope> {
    let (s, file) = load_system(&args.system)?;
    let ssc = check_ssc(&s, args.ssc_depth);
    let mut dims = closed_form_dims(&s, 2.0)?;
    dims.ssc_proven = ssc.is_proven();
    let result = json!({
        "r": s.r(),
        "rotation_angle": s.alpha().arg(),
        "barycenter": s.barycenter(),
        "bounding_disk": s.bounding_disk(),
        "ssc": ssc,
        "rotation": check_irrational_rotation(&s, args.denominator_bound),
        "dimensions": dims,
    });
    Envelope::new("validate", &config_with_system(args, &file)?, &result)
}

pub fn dims(args: &DimsArgs) -> Result<Envelope> {
    let (s, file) = load_system(&args.system)?;
    let closed = closed_form_dims(&s, args.q)?;
    let r = s.r();
    let scales = (
        args.scale_min.unwrap_or(r.powi(8)),
        args.scale_max.unwrap_or(r.powi(2)),
    );
    let samples = sample_measure(&s, args.samples, default_word_length(&s), args.seed)?;
    let mut cfg = DqConfig::for_system(&s, args.q, scales);
    cfg.n_scales = args.n_scales;
    let boxed = empirical_dq(DqInput::Samples(&samples.points), &cfg)?;
    let correlation = if args.q == 2.0 {
        Some(correlation_dimension(
            &samples.points,
            scales,
            args.n_scales,
            args.correlation_points,
        )?)
    } else {
        None
    };
    let agree = correlation
        .as_ref()
        .map(|c| c.ci95.0 <= boxed.ci95.1 && boxed.ci95.0 <= c.ci95.1);
    let result = json!({
        "closed_form": closed,
        "box_counting": boxed,
        "correlation_sum": correlation,
        "intervals_overlap": agree,
    });
    Envelope::new("dims", &config_with_system(args, &file)?, &result)
}

pub fn project(args: &ProjectArgs) -> Result<Envelope> {
    let (s, file) = load_system(&args.system)?;
    let z = Direction::from_angle(args.direction.angle);
    let g = projected_density(&s, z, args.depth, args.h)?;
    let result = json!({
        "mass": g.mass(),
        "lq_norm": lq_norm(&g, args.q)?,
        "max_density": g.max_value(),
        "x0": g.x0,
        "h": g.h,
        "n_bins": g.values.len(),
    });
    let mut env = Envelope::new("project", &config_with_system(args, &file)?, &result)?;
    if let Some(dir) = &args.output.out_dir {
        write_csv_artifact(dir, "density.csv", &mut env, |w| g.write_csv(w))?;
    }
    Ok(env)
}

pub fn sweep(args: &SweepArgs) -> Result<Envelope> {
    let (s, file) = load_system(&args.system)?;
    let res = direction_sweep(
        &s,
        SweepConfig {
            n_directions: args.n_directions,
            depth: args.depth,
            h: args.h,
            q: args.q,
            test_depth: args.test_depth,
        },
    )?;
    let norms: Vec<f64> = res.rows.iter().map(|r| r.lq_norm).collect();
    let max = norms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let result = json!({
        "n_directions": res.rows.len(),
        "min_norm": norms.iter().copied().fold(f64::INFINITY, f64::min),
        "max_norm": max,
        "median_norm": median(&norms),
        "max_over_median": max / median(&norms),
        "all_finite": norms.iter().all(|n| n.is_finite()),
        "max_mass_deviation": res.rows.iter().map(|r| (r.mass - 1.0).abs()).fold(0.0, f64::max),
        "lipschitz_excess": res.lipschitz_excess(),
        "max_modulus": res.max_modulus,
        "test_family": res.family,
    });
    let mut env = Envelope::new("sweep", &config_with_system(args, &file)?, &result)?;
    if let Some(dir) = &args.output.out_dir {
        write_csv_artifact(dir, "sweep.csv", &mut env, |w| res.write_csv(w))?;
    }
    Ok(env)
}

pub fn spectrum(args: &SpectrumArgs) -> Result<Envelope> {
    let (s, file) = load_system(&args.system)?;
    if args.n_freq < 2 {
        return Err(Error::InvalidParameter("n-freq must be >= 2".into()));
    }
    let z = Direction::from_angle(args.direction.angle);
    let atoms = ProjectedAtoms::new(&s, z, args.depth);
    let ts: Vec<f64> = (0..args.n_freq)
        .map(|j| -args.t_max + 2.0 * args.t_max * j as f64 / (args.n_freq - 1) as f64)
        .collect();
    let values = ts.par_iter().map(|t| atoms.fourier(*t)).collect();
    let table = SpectrumTable {
        frequencies: Frequencies::Line(ts),
        values,
    };
    let ladder: Vec<f64> = (0..args.rungs)
        .map(|i| args.ladder_min * 2f64.powi(i as i32))
        .collect();
    let fit = fit_decay(
        SpectrumSource::System {
            system: &s,
            depth: args.depth,
        },
        &ladder,
    )?;
    let result = json!({
        "trusted_band": trusted_band(&s, args.depth),
        "line_max_modulus": table.max_modulus(),
        "decay_fit": fit,
    });
    let mut env = Envelope::new("spectrum", &config_with_system(args, &file)?, &result)?;
    if let Some(dir) = &args.output.out_dir {
        write_csv_artifact(dir, "spectrum.csv", &mut env, |w| table.write_csv(w))?;
    }
    Ok(env)
}

pub fn sobolev(args: &SobolevArgs) -> Result<Envelope> {
    let (s, file) = load_system(&args.system)?;
    let z = Direction::from_angle(args.direction.angle);
    let cutoff = args.cutoff.unwrap_or_else(|| trusted_band(&s, args.depth));
    let est = sobolev_norms(&s, z, &args.gammas, args.depth, cutoff, args.step, args.resolution)?;
    let monotone = {
        let mut pairs: Vec<(f64, f64)> = est.iter().map(|e| (e.gamma, e.norm)).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs.windows(2).all(|w| w[0].1 <= w[1].1)
    };
    let result = json!({ "estimates": est, "monotone_in_gamma": monotone });
    Envelope::new("sobolev", &config_with_system(args, &file)?, &result)
}

fn seed_for_points(seed: u64) -> u64 {
    seed.wrapping_add(1)
}

pub fn slice(args: &SliceArgs) -> Result<Envelope> {
    let (s, file) = load_system(&args.system)?;
    let z = Direction::from_angle(args.direction.angle);
    let delta = args.delta.unwrap_or(2.0 * args.h);
    let read = match args.read {
        ReadMode::Bin => DensityRead::Bin,
        ReadMode::Window => DensityRead::Window { delta },
    };
    let cache = DensityCache::new(&s, args.depth, args.h);
    cache.prepare(z, args.k_max)?;
    let samples = sample_measure(&s, args.samples, default_word_length(&s), args.seed)?;
    let points = sample_coded_points(&s, args.n_points, args.k_max, seed_for_points(args.seed))?;
    let per_point: Vec<Result<Vec<SliceRow>>> = points
        .par_iter()
        .map(|p| {
            let local = slice_local_dim(&cache, z, p, args.k_max).ok().map(|d| d.slope);
            (1..=args.k_max)
                .map(|k| {
                    let m = slice_mass_formula(&cache, z, p, k, read)?;
                    let e = slice_mass_empirical(&s, &samples.points, z, p.w, &p.word.prefix(k), delta)
                        .ok();
                    Ok(SliceRow {
                        z_angle: z.angle(),
                        w: p.w,
                        k,
                        mass_formula: m.mass,
                        mass_empirical: e,
                        local_dim: local,
                    })
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (p, r) in points.iter().zip(per_point) {
        match r {
            Ok(mut v) => rows.append(&mut v),
            Err(e) => skipped.push(json!({ "w": p.w, "error": e.to_string() })),
        }
    }
    let discrepancy_by_k: Vec<serde_json::Value> = (1..=args.k_max)
        .map(|k| {
            let rel: Vec<f64> = rows
                .iter()
                .filter(|r| r.k == k)
                .filter_map(|r| r.mass_empirical.filter(|e| *e > 0.0).map(|e| (r.mass_formula - e).abs() / e))
                .collect();
            json!({ "k": k, "median_rel": median(&rel), "p90_rel": quantile(&rel, 0.9), "n": rel.len() })
        })
        .collect();
    let dims: Vec<f64> = rows
        .iter()
        .filter(|r| r.k == 1)
        .filter_map(|r| r.local_dim)
        .collect();
    let result = json!({
        "n_points": points.len(),
        "n_skipped": skipped.len(),
        "skipped": skipped,
        "median_local_dim": median(&dims),
        "target_local_dim": closed_form_dims(&s, 2.0)?.dim_h_measure_closed - 1.0,
        "discrepancy_by_k": discrepancy_by_k,
    });
    let mut env = Envelope::new("slice", &config_with_system(args, &file)?, &result)?;
    if let Some(dir) = &args.output.out_dir {
        write_csv_artifact(dir, "slices.csv", &mut env, |w| write_slice_csv(&rows, w))?;
    }
    Ok(env)
}

pub fn conserve(args: &ConserveArgs) -> Result<Envelope> {
    let (s, file) = load_system(&args.system)?;
    let report = dimension_conservation_report(
        &s,
        Direction::from_angle(args.direction.angle),
        ConservationConfig {
            n_points: args.n_points,
            seed: args.seed,
            k_max: args.k_max,
            density_depth: args.depth,
            h: args.h,
            tolerance: args.tolerance,
        },
    )?;
    Envelope::new("conserve", &config_with_system(args, &file)?, &report)
}

/// Smallest grid point where the cumulative mass reaches one half.
fn density_median(g: &DensityGrid) -> f64 {
    let cum = g.cumulative();
    let total = cum[cum.len() - 1];
    let j = cum.partition_point(|c| *c < 0.5 * total).max(1);
    let (lo, hi) = (cum[j - 1], cum[j]);
    let frac = if hi > lo { (0.5 * total - lo) / (hi - lo) } else { 0.0 };
    g.edge(j - 1) + frac * g.h
}

pub fn sets(args: &SetsArgs) -> Result<Envelope> {
    let (s, file) = load_system(&args.system)?;
    let z = Direction::from_angle(args.direction.angle);
    let g = projected_density(&s, z, args.depth, args.h)?;
    let outer = project_attractor(&s, z, args.depth);
    let inner = project_attractor_inner(&s, z, args.depth);
    let cov = coverage(&g, &outer, &inner, z, args.depth, args.epsilon);
    let xs = if args.x.is_empty() {
        vec![density_median(&g)]
    } else {
        args.x.clone()
    };
    let slice_dims = xs
        .iter()
        .map(|x| slice_set_boxdim(&s, z, *x, args.depth))
        .collect::<Result<Vec<_>>>()?;
    let result = json!({
        "outer": { "n_intervals": outer.len(), "total_length": outer.total_length },
        "inner": { "n_intervals": inner.len(), "total_length": inner.total_length },
        "coverage": cov,
        "slice_box_dimension": slice_dims,
        "target_slice_dimension": closed_form_dims(&s, 2.0)?.dim_h_set_closed - 1.0,
    });
    let mut env = Envelope::new("sets", &config_with_system(args, &file)?, &result)?;
    if let Some(dir) = &args.output.out_dir {
        write_csv_artifact(dir, "intervals.csv", &mut env, |w| outer.write_csv(w))?;
        write_csv_artifact(dir, "coverage.csv", &mut env, |w| write_coverage_csv(&[cov.clone()], w))?;
    }
    Ok(env)
}

pub fn verify_all(args: &VerifyArgs) -> Result<AcceptanceReport> {
    let tolerances = match &args.tolerances {
        Some(path) => serde_json::from_str::<Tolerances>(&fs::read_to_string(path)?)?,
        None => Tolerances::default(),
    };
    run_all(&VerifyConfig {
        seed: args.seed,
        tolerances,
    })
}
