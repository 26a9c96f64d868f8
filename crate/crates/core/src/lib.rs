//! 2-D gravity forward modeling and focusing inversion.
//!
//! The crate reconstructs subsurface density cross-sections from surface
//! gravity profiles. A rectangular grid of square cells is mapped to station
//! anomalies by an analytic polygon kernel; the resulting underdetermined
//! linear system is solved by iteratively reweighted Tikhonov regularization
//! with a minimum-support (or smoothness) stabilizer, depth weighting, hard
//! constraints with bound projection, and a regularization parameter chosen
//! every iteration by L-curve corner detection or GCV minimization on top of
//! a generalized singular value decomposition of the weighted pair.
//!
//! Everything numeric is generic over the scalar type via [`Real`]
//! (`f32`/`f64`); the `F64` aliases below name the common double-precision
//! instantiations.

pub mod error;
pub mod forward;
pub mod geometry;
pub mod gsvd;
pub mod inversion;
pub mod regparam;
pub mod scalar;
pub mod synth;
pub mod weights;

pub use error::{Error, Result};
pub use scalar::Real;

pub use forward::{
    assemble_sensitivity, edge_term, forward_map, polygon_gravity, GravityProfile,
    SensitivityMatrix,
};
pub use geometry::{
    cell_polygon, station_offsets, validate_station_placement, Polygon, StationSet, SurveyGrid,
};
pub use gsvd::{filter_factors, gsvd_factorize, solve_filtered, FilterFactors, GsvdFactors};
pub use inversion::{
    check_termination, invert, invert_with_observer, objective_terms, project_bounds,
    support_count, AlphaGridSpec, Bounds, InversionConfig, InversionResult, IterationRecord,
    ParamMethod, StabilizerKind, Termination, WeVariant,
};
pub use regparam::{
    cooled_alpha, evaluate_curve, gcv_evaluate, gcv_minimize, initial_alpha, lcurve_corner,
    AlphaGrid, CurvePoint, InitialAlphaMean, ParamChoiceResult, ParamStatus,
};
pub use synth::{
    add_noise, chi_squared, noise_sigmas, rectangular_body_model, regional_residual,
    relative_error, upward_continue, NoiseSpec, SigmaVector,
};
pub use weights::{
    compose_stabilizer, data_weights, depth_weights, hard_constrain, ms_weights,
    second_difference_matrix, smoothness_operator, StabilizerOperator, WeightSet,
};

/// Double-precision instantiations of the main types.
pub type SurveyGridF64 = SurveyGrid<f64>;
pub type StationSetF64 = StationSet<f64>;
pub type SensitivityMatrixF64 = SensitivityMatrix<f64>;
pub type GravityProfileF64 = GravityProfile<f64>;
pub type InversionConfigF64 = InversionConfig<f64>;
pub type InversionResultF64 = InversionResult<f64>;
pub type GsvdFactorsF64 = GsvdFactors<f64>;
