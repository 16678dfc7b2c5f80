//! Built-in optimization backend.
//!
//! [`solve_lp`] is a two-phase dense simplex method with Bland's rule, used
//! for the covering LPs. [`solve_convex`] is a log-barrier method with
//! damped Newton steps for programs built from exponential, log-sum-exp and
//! relative-entropy atoms; it serves both the circuit geometric program (in
//! log variables) and the AGE relative-entropy program.
//!
//! Another exponential-cone solver could sit behind the same
//! [`ConvexProgram`] description; nothing outside this module depends on how
//! the program is solved.

mod convex;
mod lp;

use serde::Serialize;

pub use convex::{solve_convex, Affine, Atom, AtomEval, ConvexProgram, DEFAULT_TOL};
pub use lp::{solve_lp, LinearProgram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

/// KKT residual norms of a returned point.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Residuals {
    /// Convex programs: Newton decrement of the final centering step in
    /// objective units. LPs: largest negative reduced cost.
    pub stationarity: f64,
    /// Largest equality residual or inequality violation.
    pub primal: f64,
    /// Duality-gap surrogate `m / t` of the barrier method; 0 for LPs.
    pub gap: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal).max(self.gap)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSolution {
    pub status: SolverStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub residuals: Residuals,
    pub iterations: usize,
}

impl SolverSolution {
    pub(crate) fn failed(status: SolverStatus, num_vars: usize, iterations: usize) -> Self {
        let objective = match status {
            SolverStatus::Unbounded => f64::NEG_INFINITY,
            _ => f64::NAN,
        };
        Self {
            status,
            x: vec![f64::NAN; num_vars],
            objective,
            residuals: Residuals::default(),
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolverStatus::Optimal
    }
}
