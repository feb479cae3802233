//! Homogeneous planar self-similar measures `ν = Σ p_i f_i ν` with
//! `f_i(w) = λ w + a_i`, `λ = r α`, and numerical checks on their projections,
//! densities, Fourier transforms, slices and attractor projections.

pub mod dimension;
pub mod error;
pub mod ifs;
pub mod measure;
pub mod projection;
pub mod sets;
pub mod slices;
pub mod spectral;
pub mod ssc;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use ifs::{
    check_irrational_rotation, closed_form_dims, cylinder_map, validate_system, ComplexVal,
    CylinderMap, DimReport, IfsSystem, RotationCheck, SystemFile, Word,
};
pub use measure::{atomic_approx, sample_measure, AtomicMeasure2D, SampleSet};
pub use projection::{density, lq_norm, project, AtomicMeasure1D, DensityGrid, Direction};
pub use ssc::{check_ssc, SscStatus, SscVerdict};
pub use dimension::{correlation_dimension, empirical_dq, DqConfig, DqEstimate, DqInput};
pub use sets::{
    equivalence_check, project_attractor, project_attractor_inner, slice_set_boxdim,
    CoverageReport, IntervalUnion, SliceSetDim,
};
pub use slices::{
    code_point, dimension_conservation_report, shift_t, slice_local_dim, slice_mass_empirical,
    slice_mass_formula, CodedPoint, ConservationReport, DensityCache, DensityRead, SliceMass,
};
pub use spectral::{fit_decay, ft_2d, ft_projection, sobolev_norm, sobolev_norms, DecayFit, SpectrumTable};
pub use verify::{run_all, AcceptanceReport, Tolerances, VerifyConfig};
