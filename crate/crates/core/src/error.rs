use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid opinion ({b}, {d}, {u}, a={a}): {reason}")]
    InvalidOpinion {
        b: f64,
        d: f64,
        u: f64,
        a: f64,
        reason: &'static str,
    },
    #[error("invalid evidence (r={r}, s={s}, W={w})")]
    InvalidEvidence { r: f64, s: f64, w: f64 },
    #[error("degenerate fusion: both opinions dogmatic under full trust")]
    DegenerateFusion,
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("population must contain at least one user")]
    EmptyPopulation,
    #[error("user {user} is already a {role} seed")]
    AlreadySeed { user: usize, role: &'static str },
    #[error("empty candidate set")]
    EmptyCandidates,

    #[error("edge list line {line}: {reason}")]
    MalformedEdgeList { line: usize, reason: String },
    #[error("edge list is empty")]
    EmptyEdgeList,
    #[error("node index {index} out of range for a graph of {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },

    #[error("no reward defined for {party} at step {t}")]
    RewardUndefined { party: &'static str, t: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("corrupt parameter file: {0}")]
    CorruptParams(String),
    #[error("parameter shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("report layout `{layout}` is missing cell {cell}")]
    MissingCell { layout: String, cell: String },
    #[error("missing policy file {0}")]
    MissingPolicy(PathBuf),
    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
