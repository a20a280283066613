use std::path::PathBuf;

use thiserror::Error;

use crate::model::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid model: {}", join_violations(.0))]
    Invalid(Vec<Violation>),

    #[error("unknown state `{0}`")]
    UnknownState(String),

    #[error("unknown action `{action}` in state `{state}`")]
    UnknownAction { state: String, action: String },

    #[error("action index {action} is not enabled in state `{state}`")]
    DisabledAction { state: String, action: usize },

    #[error("state `{state}`: {reason}")]
    InvalidDistribution { state: String, reason: String },

    #[error("no horizon up to {max_kappa} makes every deviation unprofitable")]
    HorizonExceeded { max_kappa: u64 },

    #[error("value iteration did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("singular linear system (discount must be below 1 and rows stochastic)")]
    Singular,

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("search space of {size} candidates exceeds the cap of {cap}")]
    CapExceeded { size: String, cap: u64 },

    #[error("infeasible configuration: {0}")]
    InfeasibleConfig(String),

    #[error("unknown builtin `{0}` (expected investment, appendix_ex2, appendix_ex3 or appendix_ex4)")]
    UnknownBuiltin(String),

    #[error("DIMACS line {line}: {message}")]
    Dimacs { line: usize, message: String },

    #[error("expected {expected} principals, found {found}")]
    WrongArity { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    Argument(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
