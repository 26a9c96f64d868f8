//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Errors produced by geometry construction, modeling, and inversion.
#[derive(Debug, Error)]
pub enum Error {
    /// A cell index does not address a cell of the grid.
    #[error("cell index {index} out of range for grid with {n_cells} cells")]
    CellIndexOutOfRange { index: usize, n_cells: usize },

    /// Invalid grid, station, or polygon geometry.
    #[error("invalid geometry: {0}")]
    Geometry(String),

    /// The gravity kernel is singular for this station/cell pair.
    #[error("singular kernel for station {station}, cell {cell}: {reason}")]
    SingularKernel {
        station: usize,
        cell: usize,
        reason: String,
    },

    /// Two operands that must agree in length or shape do not.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// An input value violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration value is out of its admissible range.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Stations are not uniformly spaced where an operation requires it.
    #[error("non-uniform station spacing: {0}")]
    NonUniformSpacing(String),

    /// The matrix pair violates the trivial-intersection null-space condition.
    #[error("null-space condition violated: {0}")]
    NullSpace(String),

    /// A factorization or solve failed numerically.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A parameter-choice curve carries no usable information.
    #[error("degenerate parameter-choice curve: {0}")]
    DegenerateCurve(String),
}

/// Crate-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;
