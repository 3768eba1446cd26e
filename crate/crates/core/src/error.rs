use thiserror::Error;

/// Errors produced by the simulation engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid subsystem: {0}")]
    InvalidSubsystem(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not unitary (max deviation {0:e})")]
    NotUnitary(f64),

    #[error("not a valid density matrix: {0}")]
    InvalidState(String),

    #[error("state is not diagonal in the energy basis (off-diagonal magnitude {0:e})")]
    NotDiagonal(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("steady state is not unique: eigenvalue-1 multiplicity {multiplicity}")]
    NonUniqueSteadyState { multiplicity: usize },

    #[error("integration unstable at t = {t}: trace drift {drift:e}")]
    IntegrationUnstable { t: f64, drift: f64 },

    #[error("Born probability {0} outside [0, 1]")]
    NumericalPositivity(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
