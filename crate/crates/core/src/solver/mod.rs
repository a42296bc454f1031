//! Dual functional evaluation with truncation, L-BFGS, ε-scaling, and
//! multilevel strategies.

mod config;
mod eval;
mod lbfgs;
mod multilevel;
mod potential;
mod sinkhorn;
mod solve;
mod truncation;

pub use config::SolverConfig;
pub use eval::{evaluate_dual, log_sum_exp, Candidates, DualProblem, EvalResult};
pub use lbfgs::{l1, lbfgs_minimize, LbfgsOutcome, LbfgsParams, Objective, Status};
pub use multilevel::{softmax_refine, solve_multilevel, MultilevelOptions, MultilevelSchedule, Strategy};
pub use potential::{gauge_fix, DualPotential, Gauge};
pub use sinkhorn::{sinkhorn_oracle, SinkhornResult, SINKHORN_MAX_ITER};
pub use solve::{epsilon_schedule, solve, Solution, SolverReport, StageReport};
pub use truncation::{
    cutoff_geometric, cutoff_integrated, cutoff_pointwise, Truncation, TruncationState, ABS_J_FLOOR,
};
