//! Levels of an estimator hierarchy: which solver runs at each level, and
//! the scalar field it reports for one random input.

use crate::error::{Error, Result};
use crate::mesh::Grid1D;
use crate::models::{Model, ModelKind, ModelSpec, Quadrature, MAX_VARS};
use crate::parallel::{map_indexed, Workers};
use crate::sampling::SampleHierarchy;
use crate::spatial::cell_averages;
use crate::time::{Solver, StepperConfig};

/// Full model, or its asymptotic-limit reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fidelity {
    Full,
    Reduced,
}

impl std::str::FromStr for Fidelity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Fidelity::Full),
            "reduced" => Ok(Fidelity::Reduced),
            _ => Err(Error::Config(format!("unknown fidelity '{s}'"))),
        }
    }
}

/// One level: solver order, model fidelity, grid size and per-run cost.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSpec {
    pub order: usize,
    pub fidelity: Fidelity,
    pub n_cells: usize,
    pub cost: f64,
}

impl LevelSpec {
    pub fn full(order: usize, n_cells: usize, cost: f64) -> Self {
        LevelSpec {
            order,
            fidelity: Fidelity::Full,
            n_cells,
            cost,
        }
    }

    pub fn reduced(order: usize, n_cells: usize, cost: f64) -> Self {
        LevelSpec {
            fidelity: Fidelity::Reduced,
            ..Self::full(order, n_cells, cost)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.order) {
            return Err(Error::Config(format!("level order {} not in 1..=3", self.order)));
        }
        if !(self.cost > 0.0) || !self.cost.is_finite() {
            return Err(Error::Config(format!("level cost {} not positive", self.cost)));
        }
        if self.n_cells < 4 {
            return Err(Error::Config(format!("level with {} cells", self.n_cells)));
        }
        Ok(())
    }
}

/// Scalar field extracted from a final state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Qoi {
    Var(usize),
    Pressure,
}

impl Qoi {
    /// `u` for the scalar laws, depth for SWE, pressure for blood flow.
    pub fn for_kind(kind: ModelKind) -> Self {
        match kind {
            ModelKind::BloodFlow | ModelKind::BloodFlowElastic => Qoi::Pressure,
            _ => Qoi::Var(0),
        }
    }

    pub fn name(&self, model: &Model) -> String {
        match self {
            Qoi::Var(v) => model.var_names().get(*v).copied().unwrap_or("?").to_string(),
            Qoi::Pressure => "p".into(),
        }
    }
}

/// Deterministic solver for one level.
#[derive(Debug, Clone)]
pub struct LevelSolver {
    pub level: LevelSpec,
    pub spec: ModelSpec,
    pub stepper: StepperConfig,
    pub grid: Grid1D,
    pub t_end: f64,
    pub qoi: Qoi,
}

impl LevelSolver {
    pub fn new(model: &ModelSpec, level: &LevelSpec, t_end: f64, cfl: f64) -> Result<Self> {
        level.validate()?;
        let spec = match level.fidelity {
            Fidelity::Full => model.clone(),
            Fidelity::Reduced => model.reduced()?,
        };
        spec.validate()?;
        let mut stepper = StepperConfig::for_model(spec.kind, level.order)?;
        stepper.cfl = cfl;
        stepper.validate()?;
        let (a, b) = spec.domain();
        let grid = Grid1D::new(a, b, level.n_cells)?;
        Ok(LevelSolver {
            level: level.clone(),
            qoi: Qoi::for_kind(model.kind),
            spec,
            stepper,
            grid,
            t_end,
        })
    }

    /// Final-time quantity of interest for input `z`.
    pub fn evaluate(&self, z: &[f64]) -> Result<Vec<f64>> {
        let problem = self
            .spec
            .instantiate(self.grid.clone(), z, Quadrature::for_order(self.level.order))?;
        let mut solver = Solver::new(&problem, self.stepper.clone())?;
        let out = solver.advance(problem.state.clone(), self.t_end)?;
        let state = out.state;
        match self.qoi {
            Qoi::Var(v) => {
                if v >= state.n_vars {
                    return Err(Error::Dimension(format!("variable {v} of {}", state.n_vars)));
                }
                Ok(state.var(v).to_vec())
            }
            Qoi::Pressure => {
                let pressure = |w: &[f64]| {
                    problem
                        .model
                        .pressure(w)
                        .ok_or_else(|| Error::Unsupported("pressure of a non-vessel model".into()))
                };
                if problem.model.pressure_is_conserved() {
                    let mut w = [0.0; MAX_VARS];
                    (0..state.n_cells())
                        .map(|i| {
                            state.state(i, &mut w);
                            pressure(&w[..state.n_vars])
                        })
                        .collect()
                } else {
                    cell_averages(&state, self.stepper.recon, pressure)
                }
            }
        }
    }

    /// Samples `0..m` of the hierarchy, evaluated on `workers`.
    pub fn evaluate_prefix(&self, h: &SampleHierarchy, m: usize, workers: Workers) -> Result<Vec<Vec<f64>>> {
        let inputs = h.prefix(m)?;
        map_indexed(m, workers, |k| self.evaluate(&inputs[k]))
    }
}
