use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}x{expected}, found {found_rows}x{found_cols}")]
    DimensionMismatch {
        expected: usize,
        found_rows: usize,
        found_cols: usize,
    },

    #[error("coherence pair ({j}, {k}) is invalid for dimension {dim} (need j < k < dim)")]
    IndexOutOfRange { j: usize, k: usize, dim: usize },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid decoherence channel: {0}")]
    InvalidChannel(String),

    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),

    #[error("invalid control grid: {0}")]
    InvalidGrid(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite {what} encountered at step {step}")]
    NonFinite { what: &'static str, step: usize },

    #[error(
        "control direction is singular at t = {t}: |Phi| = {phi:e} is below the guard {guard:e}"
    )]
    SingularControlDirection { t: f64, phi: f64, guard: f64 },

    #[error("infeasible start: C^2(rho0) = {value} lies outside [{alpha}, {beta}]")]
    InfeasibleStart { value: f64, alpha: f64, beta: f64 },

    #[error("linearised constraint problem failed: {0}")]
    ConstraintSolve(String),

    #[error("{what} has imaginary residue {residue:e}, expected a real value")]
    ComplexResidue { what: &'static str, residue: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
