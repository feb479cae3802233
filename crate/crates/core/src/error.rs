use thiserror::Error;

/// Errors raised by the library. Every variant maps to a computation error
/// (exit status 2) in the command line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("contraction modulus {0} is not in (0, 1)")]
    ModulusOutOfRange(f64),
    #[error("bad probability vector: {0}")]
    BadProbabilityVector(String),
    #[error("all translations are equal")]
    DegenerateTranslations,
    #[error("symbol {index} out of range for an alphabet of size {alphabet}")]
    IndexOutOfRange { index: usize, alphabet: usize },
    #[error("q = {0} must be > 1")]
    QOutOfRange(f64),
    #[error("{needed} atoms exceed the atom budget of {budget}")]
    AtomBudgetExceeded { needed: u128, budget: usize },
    #[error("no translation is zero and auto-conjugation is disabled")]
    NoZeroTranslation,
    #[error("degenerate scale range: {0}")]
    DegenerateScales(String),
    #[error("too few points: {got} (need at least {need})")]
    TooFewPoints { got: usize, need: usize },
    #[error("position {0} lies outside the density grid")]
    SupportOutOfRange(f64),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("frequency ladder has {got} rungs, need at least {need}")]
    InsufficientRungs { got: usize, need: usize },
    #[error("cutoff {cutoff} lies outside the trusted band |xi| <= {band}")]
    CutoffOutsideTrustedBand { cutoff: f64, band: f64 },
    #[error("point is outside every child disk at level {level}")]
    NotInAttractorNeighborhood { level: usize },
    #[error("coded depth exhausted")]
    DepthExhausted,
    #[error("density read {value} at x = {x} is below the floor {floor}")]
    DensityFloorHit { x: f64, value: f64, floor: f64 },
    #[error("empty window around x = {0}")]
    EmptyWindow(f64),
    #[error("line x = {0} misses the attractor")]
    LineMissesAttractor(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ModulusOutOfRange(_) => "ModulusOutOfRange",
            Error::BadProbabilityVector(_) => "BadProbabilityVector",
            Error::DegenerateTranslations => "DegenerateTranslations",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::QOutOfRange(_) => "QOutOfRange",
            Error::AtomBudgetExceeded { .. } => "AtomBudgetExceeded",
            Error::NoZeroTranslation => "NoZeroTranslation",
            Error::DegenerateScales(_) => "DegenerateScales",
            Error::TooFewPoints { .. } => "TooFewPoints",
            Error::SupportOutOfRange(_) => "SupportOutOfRange",
            Error::GridMismatch(_) => "GridMismatch",
            Error::InsufficientRungs { .. } => "InsufficientRungs",
            Error::CutoffOutsideTrustedBand { .. } => "CutoffOutsideTrustedBand",
            Error::NotInAttractorNeighborhood { .. } => "NotInAttractorNeighborhood",
            Error::DepthExhausted => "DepthExhausted",
            Error::DensityFloorHit { .. } => "DensityFloorHit",
            Error::EmptyWindow(_) => "EmptyWindow",
            Error::LineMissesAttractor(_) => "LineMissesAttractor",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}
