use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidModel(String),

    #[error("chain of {requested} sites exceeds capacity of {capacity}")]
    Capacity { requested: usize, capacity: usize },

    #[error("site {site} out of range for a chain of {sites} sites")]
    SiteOutOfRange { site: i64, sites: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("axis is not a unit vector (norm {norm})")]
    NotUnitVector { norm: f64 },

    #[error("operator is not {property} (deviation {deviation:e})")]
    OperatorProperty { property: &'static str, deviation: f64 },

    #[error("expectation has imaginary residue {residue:e}")]
    ImaginaryResidue { residue: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("ground state is degenerate (gap {gap:e})")]
    DegenerateGroundState { gap: f64 },

    #[error("placement violation: {0}")]
    Placement(String),

    #[error("protocol degenerate: {0}")]
    Degenerate(String),

    #[error("operation set is incomplete (deviation {deviation:e})")]
    IncompleteOperations { deviation: f64 },

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("protocol refused: {0}")]
    Refused(String),
}
