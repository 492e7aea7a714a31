use thiserror::Error;

/// Errors raised by the analytic layer, the grid oracle, the click simulator
/// and the experiment front end.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The post-selection denominator fell to or below the cutoff.
    #[error("near-orthogonal post-selection: denominator {denominator:e} <= {cutoff:e}")]
    NearOrthogonalPostselection { denominator: f64, cutoff: f64 },

    #[error("internal consistency failure: {0}")]
    InternalConsistency(String),

    /// A grid operation would push non-zero amplitude off the domain.
    #[error("pointer support leaves the grid domain: {0}")]
    Truncation(String),

    #[error(
        "joint state needs {entries} entries, limit is {limit}; use a smaller n or a coarser grid"
    )]
    MemoryGuard { entries: u128, limit: u128 },

    #[error("no accepted click within {trials} trials")]
    NoClick { trials: u64 },

    #[error("degenerate calibration: {0}")]
    DegenerateCalibration(String),

    #[error("config: {0}")]
    Config(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Process exit status used by the command-line front end.
    ///
    /// 1 for bad input, 2 for numerical or physical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_)
            | Error::Config(_)
            | Error::DegenerateCalibration(_)
            | Error::Io(_) => 1,
            Error::NearOrthogonalPostselection { .. }
            | Error::InternalConsistency(_)
            | Error::Truncation(_)
            | Error::MemoryGuard { .. }
            | Error::NoClick { .. } => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
