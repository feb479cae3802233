use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "selfsim", version, about = "Projections, densities, Fourier data and slices of planar self-similar measures")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "SELFSIM_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a system and check separation and the rotation angle.
    Validate(ValidateArgs),
    /// Closed-form dimensions and an empirical L^q dimension.
    Dims(DimsArgs),
    /// Density of one projection.
    Project(ProjectArgs),
    /// Norms and test integrals over a ring of directions.
    Sweep(SweepArgs),
    /// Fourier transform table and decay fit.
    Spectrum(SpectrumArgs),
    /// Sobolev norms of a projected density.
    Sobolev(SobolevArgs),
    /// Slice masses and slice local dimensions.
    Slice(SliceArgs),
    /// Dimension conservation report for one direction.
    Conserve(ConserveArgs),
    /// Projected attractor, density coverage and slice box dimensions.
    Sets(SetsArgs),
    /// Run the full acceptance suite.
    VerifyAll(VerifyArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SystemArgs {
    /// JSON system file with keys lambda_re, lambda_im, translations, probs.
    #[arg(long, conflicts_with_all = ["system_json", "preset"])]
    pub system: Option<PathBuf>,
    /// Inline JSON system definition.
    #[arg(long, conflicts_with = "preset")]
    pub system_json: Option<String>,
    /// Built-in system: sys-a, sys-b or sys-a-thin.
    #[arg(long, default_value = "sys-a")]
    pub preset: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutputArgs {
    /// Directory for CSV artifacts (none are written when omitted).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DirectionArgs {
    /// Direction angle in radians.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub angle: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Deepest level examined by the separation check.
    #[arg(long, default_value_t = 8)]
    pub ssc_depth: usize,
    /// Largest denominator tried by the rotation check.
    #[arg(long, default_value_t = 1_000_000)]
    pub denominator_bound: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DimsArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[arg(long, default_value_t = 2.0)]
    pub q: f64,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long)]
    pub seed: u64,
    /// Smallest box side (default r^8).
    #[arg(long)]
    pub scale_min: Option<f64>,
    /// Largest box side (default r^2).
    #[arg(long)]
    pub scale_max: Option<f64>,
    /// Number of scales (default: ratio about 2).
    #[arg(long)]
    pub n_scales: Option<usize>,
    /// Points used by the correlation-sum estimate.
    #[arg(long, default_value_t = 20_000)]
    pub correlation_points: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ProjectArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[command(flatten)]
    pub direction: DirectionArgs,
    #[arg(long, default_value_t = 12)]
    pub depth: usize,
    #[arg(long, default_value_t = 0.01)]
    pub h: f64,
    #[arg(long, default_value_t = 2.0)]
    pub q: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[arg(long, default_value_t = 360)]
    pub n_directions: usize,
    #[arg(long, default_value_t = 10)]
    pub depth: usize,
    #[arg(long, default_value_t = 0.01)]
    pub h: f64,
    #[arg(long, default_value_t = 2.0)]
    pub q: f64,
    /// Atom depth for the test-function integrals.
    #[arg(long, default_value_t = 8)]
    pub test_depth: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[command(flatten)]
    pub direction: DirectionArgs,
    #[arg(long, default_value_t = 12)]
    pub depth: usize,
    /// Largest |t| in the line table.
    #[arg(long, default_value_t = 200.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 401)]
    pub n_freq: usize,
    /// First rung of the decay ladder.
    #[arg(long, default_value_t = 2.0)]
    pub ladder_min: f64,
    /// Number of rungs (ratio 2).
    #[arg(long, default_value_t = 8)]
    pub rungs: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SobolevArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[command(flatten)]
    pub direction: DirectionArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.05, 0.1])]
    pub gammas: Vec<f64>,
    #[arg(long, default_value_t = 12)]
    pub depth: usize,
    /// Frequency cutoff (default: edge of the trusted band).
    #[arg(long)]
    pub cutoff: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
    /// Average the density over windows of this width first.
    #[arg(long)]
    pub resolution: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadMode {
    Bin,
    Window,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SliceArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[command(flatten)]
    pub direction: DirectionArgs,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub n_points: usize,
    #[arg(long, default_value_t = 8)]
    pub k_max: usize,
    #[arg(long, default_value_t = 12)]
    pub depth: usize,
    #[arg(long, default_value_t = 0.01)]
    pub h: f64,
    /// Half-width of the empirical window (default 2h).
    #[arg(long)]
    pub delta: Option<f64>,
    /// Samples for the empirical estimate.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    /// Density reads in the reported slice masses.
    #[arg(long, value_enum, default_value_t = ReadMode::Window)]
    pub read: ReadMode,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ConserveArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[command(flatten)]
    pub direction: DirectionArgs,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub n_points: usize,
    #[arg(long, default_value_t = 8)]
    pub k_max: usize,
    #[arg(long, default_value_t = 12)]
    pub depth: usize,
    #[arg(long, default_value_t = 0.01)]
    pub h: f64,
    #[arg(long, default_value_t = 0.15)]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SetsArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[command(flatten)]
    pub direction: DirectionArgs,
    #[arg(long, default_value_t = 12)]
    pub depth: usize,
    #[arg(long, default_value_t = 0.01)]
    pub h: f64,
    /// Density threshold (default 1e-3 times the median positive density).
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Line positions for slice box dimensions (default: median of the projection).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub x: Vec<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 20240601)]
    pub seed: u64,
    /// JSON file overriding individual tolerances.
    #[arg(long)]
    pub tolerances: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
}
