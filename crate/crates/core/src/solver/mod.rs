//! Dense Levenberg-Marquardt over one sliding window, plus Schur-complement
//! marginalization.

mod graph;
mod marginalize;
mod normal;
mod optimize;

pub use graph::{Factor, FactorFamily, FactorGraph};
pub use marginalize::{marginalize, marginalize_oldest, orphaned_by, Marginalized};
pub use normal::{
    build_normal_equations, evaluate_cost, huber_cost, huber_weight, lm_step, NormalEquations,
};
pub use optimize::{optimize, SolverConfig, SolverReport, SolverStatus};
