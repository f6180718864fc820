//! PDE systems, their equilibrium structure and parameterized test data.

mod cases;
mod physics;

pub use cases::{reduced_model_of, Case, ModelSpec, Problem, Quadrature, Scales};
pub use physics::{Ext, Model, ModelKind, Vessel, Wall, MAX_VARS, WALL_VARS};
