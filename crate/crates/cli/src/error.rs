use std::path::PathBuf;

use reluplan_core::compiler::CompileError;
use reluplan_core::domains::DomainError;
use reluplan_core::milp::lp_format::LpParseError;
use reluplan_core::milp::SolveError;
use reluplan_core::nn::NetError;
use reluplan_core::potentials::PotentialError;
use reluplan_core::problem::ProblemError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Format(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    LpParse(#[from] LpParseError),
    #[error("refusing to write an invalid plan: {0}")]
    InvalidPlan(String),
}

impl CliError {
    /// 2 for infeasible instances, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Potential(PotentialError::Infeasible) => 2,
            _ => 1,
        }
    }
}
