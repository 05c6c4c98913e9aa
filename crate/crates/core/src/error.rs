//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible batch count: B={b} does not divide N={n}")]
    InfeasibleBatchCount { n: usize, b: usize },

    #[error("infinite {moment}: {reason}")]
    InfiniteMoment { moment: &'static str, reason: String },

    #[error("no closed form for {0}; simulate instead")]
    NoClosedForm(String),

    #[error("degenerate samples: {0}")]
    DegenerateSamples(String),

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("plan cannot complete the job: {0}")]
    NonCovering(String),

    #[error("assignment vectors incomparable: {0}")]
    IncomparableVectors(String),

    #[error("mismatched inputs: {0}")]
    Mismatch(String),

    #[error("no root found in bracket [{lo}, {hi}]")]
    NoRoot { lo: f64, hi: f64 },

    #[error("trace format error at line {line}: {reason}")]
    TraceFormat { line: usize, reason: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
