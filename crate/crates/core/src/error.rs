use thiserror::Error;

use crate::netdsl::Diagnostic;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no models")]
    NoModels,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("scattering matrix is not unitary (residual {residual:.3e})")]
    NotUnitary { residual: f64 },

    #[error("Hamiltonian matrix is not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("matrix is not unitary (residual {residual:.3e})")]
    NonUnitaryRotation { residual: f64 },

    #[error("invalid adjacency: {0}")]
    Adjacency(String),

    #[error("algebraic loop not well-posed (condition number {condition:.3e})")]
    AlgebraicLoop { condition: f64 },

    #[error("port count mismatch: upstream has {upstream}, downstream has {downstream}")]
    PortCountMismatch { upstream: usize, downstream: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state is not normalized (squared norm {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },

    #[error("resolvent (sI - A) is singular at s = {re} + {im}i")]
    SingularResolvent { re: f64, im: f64 },

    #[error("no rising-exponential solution: drift is neither stable nor anti-stable")]
    NoRisingExponential,

    #[error("pulse grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid time window: {0}")]
    InvalidTimes(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{0}")]
    Parse(#[from] Diagnostic),

    /// A failure while compiling a network description, tagged with the
    /// source position it arose from.
    #[error("{diagnostic}: {cause}")]
    Located { diagnostic: Diagnostic, cause: Box<Error> },

    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        if let Error::Located { cause, .. } = self {
            return cause.is_numerical();
        }
        matches!(
            self,
            Error::AlgebraicLoop { .. }
                | Error::SingularResolvent { .. }
                | Error::NoRisingExponential
                | Error::Numerical(_)
        )
    }
}
