//! Error type shared across the crate, with the process exit-code mapping
//! used by the CLI (0 pass, 2 hypothesis refusal, 3 assertion breach,
//! 4 solver failure).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// A study precondition is not satisfied; the run is refused, which is
    /// distinct from a quantitative check failing.
    #[error("hypothesis not met: {0}")]
    Hypothesis(String),

    /// Sampled structure check failed; carries the condition and the witness.
    #[error("structure condition `{condition}` violated at {witness} (margin {margin:.6e})")]
    StructureViolation {
        condition: String,
        witness: String,
        margin: f64,
    },

    #[error(
        "grid too coarse for level {level}: kernel width {width:.6e} is under two grid spacings"
    )]
    GridTooCoarse { level: u32, width: f64 },

    /// A quantitative claim the run was expected to satisfy was breached.
    #[error("assertion breached: {0}")]
    Assertion(String),

    #[error("solver failure at time step {step}: {detail}")]
    Solver { step: usize, detail: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Hypothesis(_)
            | Error::StructureViolation { .. }
            | Error::GridTooCoarse { .. } => 2,
            Error::Assertion(_) => 3,
            Error::Solver { .. } => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
