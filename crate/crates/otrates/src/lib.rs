//! Entropic optimal transport on finitely supported measures, solved by
//! log-domain Sinkhorn iteration, together with the non-asymptotic
//! convergence-rate and stability machinery needed to certify each run:
//! entropy diagnostics for every iterate, Bolley-Villani constants,
//! rate constants (kappa, t0..t3), a priori growth bounds for the dual
//! iterates, and dominance verification of every bound against the
//! measured trace.
//!
//! The solver works at regularization eps = 1 after folding eps into the
//! cost matrix once at construction; eps-scaling studies rebuild the matrix.

// `!(x > 0.0)` is the NaN-rejecting form of parameter validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod conjugate;
pub mod cost;
pub mod divergence;
pub mod measures;
pub mod runner;
pub mod sinkhorn;

mod error;

pub use error::{Error, Result};
