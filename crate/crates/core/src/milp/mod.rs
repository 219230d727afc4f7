//! Optimization kernel: model builder, dense bounded simplex, branch-and-bound,
//! a diagonal convex QP solver and LP-format text export/import.

use alloc::string::String;

use thiserror::Error;

mod bnb;
pub mod lp_format;
mod model;
mod qp;
mod simplex;

pub use bnb::{solve_milp, solve_milp_with_clock, MilpParams, MilpResult, SolveStats, SolveStatus, TimelinePoint};
pub use model::{Constraint, LinExpr, Model, ObjSense, Objective, Sense, VarId, VarKind, Variable};
pub use qp::{kkt_residual, solve_qp, QpSolution};
pub use simplex::{solve_lp, LpSolution, LpStatus};

/// Primal feasibility tolerance on constraint rows and bounds.
pub const FEAS_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("objective is not convex for its sense")]
    NonConvex,
    #[error("model has quadratic terms; use solve_qp")]
    NotLinear,
    #[error("quadratic program is infeasible")]
    QpInfeasible,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("numerical breakdown: {0}")]
    NumericBreakdown(String),
}
