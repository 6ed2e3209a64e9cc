use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is outside its domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// A finite-key guard failed. Signals a zero key, not a fault.
    #[error("infeasible bounds: {guard}")]
    InfeasibleBounds { guard: String },

    #[error("degenerate decoy denominator: mu_y equals mu_x")]
    DegenerateDenominator,

    #[error("switch port constraint violated: {used} ports used, {available} available ({mode})")]
    ConstraintViolation {
        used: u64,
        available: u64,
        mode: &'static str,
    },

    #[error("size guard: {0}")]
    SizeGuard(String),

    /// Malformed input file.
    #[error("{source_name}: {message}")]
    Parse { source_name: String, message: String },

    #[error("{0}")]
    Io(String),

    #[error("no evaluated parameter point yields a positive key rate")]
    InfeasibleEverywhere,
}

impl Error {
    pub(crate) fn infeasible(guard: impl Into<String>) -> Self {
        Error::InfeasibleBounds {
            guard: guard.into(),
        }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::InfeasibleBounds { .. } | Error::DegenerateDenominator | Error::InfeasibleEverywhere
        )
    }
}
