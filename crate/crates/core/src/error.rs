use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("detuning {value} at t = {t} exceeds bound {bound}")]
    BoundViolation { t: f64, value: f64, bound: f64 },

    #[error("detuning {delta} lies within {radius} of an AC-Stark pole")]
    PoleProximity { delta: f64, radius: f64 },

    #[error("integrator failure at t = {t}: {reason}")]
    IntegratorFailure { t: f64, reason: String },

    #[error("grid cannot resolve wave packet: {0}")]
    Resolution(String),

    #[error("momentum shift pushes amplitude past the grid cutoff ({0:e} probability lost)")]
    SpectralOverflow(f64),

    #[error("projector removed all probability")]
    EmptyState,

    #[error("quasi-momentum {0} leaves the first Brillouin zone")]
    OutOfZone(f64),

    #[error("no fringe extrema found: {0}")]
    NoExtremaFound(String),

    #[error("optimization budget exhausted after {evaluations} evaluations")]
    BudgetExhausted { evaluations: usize },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { field: field.into(), reason: reason.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
