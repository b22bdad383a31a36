use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("topology error: {0}")]
    Topology(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("quality error: {0}")]
    Quality(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("solver did not converge: {what} (residual {residual:.3e} after {iterations} iterations)")]
    Solver {
        what: String,
        residual: f64,
        iterations: usize,
        history: Vec<f64>,
    },
    #[error("range error: {0}")]
    Range(String),
    #[error("compatibility condition {condition} violated (margin {margin:.3e})")]
    Compatibility { condition: String, margin: f64 },
    #[error("image-space error: {0}")]
    ImageSpace(String),
    #[error("trace error: {0}")]
    Trace(String),
    #[error("obstruction: {0}")]
    Obstruction(String),
    #[error("inversion failed: residual {residual:.3e}")]
    Inversion { residual: f64 },
    #[error("root solve failed: {0}")]
    RootSolver(String),
    #[error("fixed-point iteration diverged: |w| = {norm:.3e} exceeds {bound:.3e}")]
    Divergence { norm: f64, bound: f64 },
    #[error("undefined value: {0}")]
    Undefined(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// CLI exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Compatibility { .. } | Error::Obstruction(_) | Error::ImageSpace(_) => 2,
            Error::Solver { .. }
            | Error::Inversion { .. }
            | Error::RootSolver(_)
            | Error::Divergence { .. } => 3,
            Error::Config(_) | Error::Parameter(_) | Error::Format(_) => 4,
            _ => 1,
        }
    }

    pub(crate) fn solver(what: impl Into<String>, history: Vec<f64>) -> Self {
        Error::Solver {
            what: what.into(),
            residual: history.last().copied().unwrap_or(f64::NAN),
            iterations: history.len(),
            history,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
