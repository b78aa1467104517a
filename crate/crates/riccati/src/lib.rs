//! Low-rank solver for the algebraic Riccati equation
//! A^T X + X A + X B B^T X = C^T C, computing symmetric PSD solutions
//! X = Y Y^T by alternating Riemannian trust-region optimization on the
//! fixed-rank quotient manifold (under a Hessian-tuned metric) with
//! rank-one updates.

pub mod benchmarks;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod metric_solver;
pub mod mtx;
pub mod objective;
pub mod problem;
pub mod rtr;
pub mod scheme;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Result, RiccatiError};
pub use geometry::{FactorPoint, MetricKind, MetricTerms, TangentVector};
pub use problem::{ProblemData, SolverConfig, StabilityReport};
