//! Asymptotic-preserving finite-volume IMEX solvers for hyperbolic
//! relaxation systems, with multi-order and multilevel Monte Carlo
//! estimators built on top.

pub mod error;
pub mod estimators;
pub mod harness;
pub mod levels;
pub mod mesh;
pub mod models;
pub mod parallel;
pub mod sampling;
pub mod spatial;
pub mod time;

pub use error::{Error, Result};
