//! Certified global lower bounds for sparse real polynomials.
//!
//! Bounds come from sums of nonnegative circuit polynomials (a geometric
//! program) and from SAGE certificates (a relative entropy program), both
//! solved by the built-in [`solver`]. They are tightened by splitting
//! `R^n` into sign cones, either by [`bnb::branch_and_bound`] or by
//! enumerating the minimal orthants ([`orthants::fork_bound`]).
//! [`minima::sonc_min`] supplies matching upper bounds.
//!
//! ```
//! use sonc_core::{sonc_bound, Polynomial};
//!
//! let motzkin: Polynomial = "x0^4*x1^2 + x0^2*x1^4 - 3*x0^2*x1^2 + 1".parse().unwrap();
//! assert!(sonc_bound(&motzkin).lower_bound.abs() < 1e-6);
//! ```

// NaN-rejecting comparisons like `!(x > 0.0)` are intentional.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bnb;
pub mod bounds;
pub mod circuits;
pub mod error;
pub mod generate;
pub mod minima;
pub mod orthants;
pub mod poly;
pub mod report;
pub mod solver;

pub use bnb::{branch_and_bound, BnbOptions, BnbResult, NodeStrategy, SageMode, StopReason};
pub use bounds::{sage_bound, sonc_bound, BoundOptions, BoundResult};
pub use circuits::{compute_covering, Circuit, Covering, CoveringStrategy};
pub use error::{Error, Result};
pub use minima::{local_min, sonc_min, sonc_min_signed, MinimaResult};
pub use orthants::{fork_bound, minimal_orthants, relax_signed, ForkMethod, SignVector};
pub use poly::Polynomial;
pub use solver::{SolverSolution, SolverStatus};
