use thiserror::Error;

/// Errors raised anywhere in the solver / estimator stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("stencil width {0} unsupported (maximum ghost width is 2)")]
    StencilUnsupported(usize),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("positivity violated: {what} = {value:e} at cell {cell}")]
    Positivity {
        what: &'static str,
        value: f64,
        cell: usize,
    },

    #[error("degenerate initial data: {0}")]
    Degenerate(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("singular banded system at row {0}")]
    Singular(usize),

    #[error("numerical blow-up at step {step}: {detail}")]
    BlowUp { step: usize, detail: String },

    #[error("step count exceeded cap of {0}")]
    Runaway(usize),

    #[error("sample index {index} out of range (max {max})")]
    SampleIndex { index: usize, max: usize },

    #[error("estimator: {0}")]
    Estimator(String),

    #[error("config: {0}")]
    Config(String),

    #[error("stale reference: {0}")]
    StaleReference(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parameter(_) | Error::Unsupported(_) => 2,
            Error::Io(_) | Error::StaleReference(_) => 4,
            _ => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
