//! Linear and mixed-integer programming.

mod lp;
mod milp;
mod relu;
mod simplex;

pub use lp::{Cmp, LinearProgram, MixedIntegerProgram, Row, Sense};
pub use milp::{solve_milp, solve_milp_with, Branching, MilpOptions};
pub use relu::{encode_relu_bigm, NeuronEncoding, ReluEncoding};
pub use simplex::{check_feasible, solve_lp, solve_lp_with, FeasibleRegion};

use thiserror::Error;

pub const DEFAULT_FEAS_TOL: f64 = 1e-8;
pub const DEFAULT_GAP_TOL: f64 = 1e-6;
pub const DEFAULT_NODE_LIMIT: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("numerical breakdown: {0}")]
    Numerical(String),
    #[error("iteration limit {0} reached")]
    IterationLimit(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    /// Node budget exhausted: `bound` is a valid outer bound, `x` the incumbent if any.
    BoundOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: Status,
    /// Primal point (empty unless a feasible point is known).
    pub x: Vec<f64>,
    /// Objective at `x`.
    pub objective: f64,
    /// Proven bound in the optimization direction (upper for Max, lower for Min).
    pub bound: f64,
    pub nodes: usize,
    pub iterations: usize,
}

impl SolveResult {
    pub(crate) fn infeasible(iterations: usize) -> Self {
        SolveResult {
            status: Status::Infeasible,
            x: Vec::new(),
            objective: f64::NAN,
            bound: f64::NAN,
            nodes: 0,
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}
