use faer::c64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("boundary loss needs the vacuum-extended basis")]
    LossNeedsVacuum,

    #[error("vector of length {0} is not a vectorized square matrix")]
    NotSquare(usize),

    #[error(
        "spectrum is numerically defective: eigenvector condition estimate {cond:.3e} exceeds {limit:.0e}; closest eigenvalues {closest:?}"
    )]
    DefectiveSpectrum {
        cond: f64,
        limit: f64,
        closest: (c64, c64),
    },

    #[error("eigensolver failed to converge: {0}")]
    NoConvergence(String),

    #[error("steady state is not unique: {0} eigenvalues within the zero tolerance")]
    DegenerateSteadyState(usize),

    #[error("zero mode has vanishing trace ({0:.3e}); refusing to renormalize")]
    TracelessZeroMode(f64),

    #[error("steady state check failed: {0}")]
    SteadyStateCheck(String),

    #[error("state has weight {0:.3e} outside the number-diagonal sector")]
    OutsideSector(f64),

    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("mode index {index} out of range for {count} modes")]
    ModeOutOfRange { index: usize, count: usize },

    #[error("no nontrivial mode carries weight above {0:.1e}")]
    NoNontrivialWeight(f64),

    #[error("matrix exponential overflow: ‖A‖₁ = {norm:.3e} needs {squarings} squarings")]
    ExpmOverflow { norm: f64, squarings: u64 },

    #[error("sample times are not sorted at position {0}")]
    UnsortedTimes(usize),

    #[error("sample time {time} outside [0, {horizon}]")]
    TimeOutOfRange { time: f64, horizon: f64 },

    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),

    #[error("trajectories are sampled on different grids")]
    GridMismatch,

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Wraps `self` with a description of what was being computed.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True for malformed input documents, as opposed to numerical or I/O failures.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config { .. } => true,
            Error::Context { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
