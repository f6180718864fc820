//! Explicit and IMEX Runge-Kutta time integration.

mod advance;
pub mod banded;
mod imex;
mod operators;
mod tableau;

pub use advance::{advance, cfl_dt, Advanced, Solver, StepperConfig, DEFAULT_CFL, DEFAULT_STEP_CAP};
pub use imex::{explicit_rk_step, imex_step, SplitOperator, StageBuffers};
pub use operators::{ImplicitPolicy, ModelOperator, SweElliptic};
pub use tableau::{Butcher, Condition, ImexTableau};
