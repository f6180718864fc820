//! Time-step control and the deterministic time march.

use super::imex::{imex_step, StageBuffers};
use super::operators::{ImplicitPolicy, ModelOperator};
use super::tableau::ImexTableau;
use crate::error::{Error, Result};
use crate::mesh::CellField;
use crate::models::{Model, ModelKind, Problem, MAX_VARS};
use crate::spatial::{FluxKind, Reconstruction, SpatialOperator};

pub const DEFAULT_CFL: f64 = 0.9;
pub const DEFAULT_STEP_CAP: usize = 10_000_000;
const SPEED_FLOOR: f64 = 1e-12;

/// Time scheme, reconstruction, flux and implicit treatment of one solver.
#[derive(Debug, Clone, PartialEq)]
pub struct StepperConfig {
    pub cfl: f64,
    pub tableau: ImexTableau,
    pub recon: Reconstruction,
    pub flux: FluxKind,
    pub policy: ImplicitPolicy,
    pub step_cap: usize,
}

impl StepperConfig {
    /// The solver triple of a given order for a model family: explicit
    /// Heun schemes with Godunov fluxes for Burgers, ARS-type IMEX schemes
    /// otherwise.
    pub fn for_model(kind: ModelKind, order: usize) -> Result<Self> {
        let recon = Reconstruction::from_order(order)?;
        let (tableau, flux, policy) = match kind {
            ModelKind::Burgers => (ImexTableau::explicit_rk(order)?, FluxKind::Godunov, ImplicitPolicy::None),
            ModelKind::JinXin => (ImexTableau::imex(order)?, FluxKind::Rusanov, ImplicitPolicy::Relaxation),
            ModelKind::Swe => (ImexTableau::imex(order)?, FluxKind::Rusanov, ImplicitPolicy::SweElliptic),
            ModelKind::BloodFlow => (ImexTableau::imex(order)?, FluxKind::Dot, ImplicitPolicy::Relaxation),
            ModelKind::BloodFlowElastic => (ImexTableau::imex(order)?, FluxKind::Dot, ImplicitPolicy::None),
        };
        Ok(StepperConfig {
            cfl: DEFAULT_CFL,
            tableau,
            recon,
            flux,
            policy,
            step_cap: DEFAULT_STEP_CAP,
        })
    }

    pub fn order(&self) -> usize {
        self.recon.order()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::Parameter(format!("cfl = {} not in (0, 1]", self.cfl)));
        }
        self.tableau.validate()
    }
}

/// Largest stable step for the explicitly treated waves.
pub fn cfl_dt(model: &Model, field: &CellField, cfl: f64) -> Result<f64> {
    let mut w = [0.0; MAX_VARS];
    let mut smax = 0.0f64;
    for i in 0..field.n_cells() {
        field.state(i, &mut w);
        let s = model.explicit_wave_speed(&w[..field.n_vars]);
        if !s.is_finite() {
            return Err(Error::BlowUp {
                step: 0,
                detail: format!("non-finite wave speed at cell {i}"),
            });
        }
        smax = smax.max(s);
    }
    let dx = field.grid.dx();
    Ok(if smax < SPEED_FLOOR { cfl * dx } else { cfl * dx / smax })
}

/// Outcome of a time march.
#[derive(Debug, Clone)]
pub struct Advanced {
    pub state: CellField,
    pub steps: usize,
    pub time: f64,
}

/// Deterministic solver bound to one problem instance.
#[derive(Debug, Clone)]
pub struct Solver {
    pub config: StepperConfig,
    op: ModelOperator,
    buffers: StageBuffers,
}

impl Solver {
    pub fn new(problem: &Problem, config: StepperConfig) -> Result<Self> {
        config.validate()?;
        let n = problem.state.n_cells();
        let spatial = SpatialOperator::new(problem.model.clone(), config.recon, config.flux, n)?;
        let op = ModelOperator::new(
            spatial,
            config.policy,
            problem.state.boundary,
            problem.state.grid.dx(),
            n,
            problem.tau.clone(),
            config.order(),
        )?;
        Ok(Solver {
            config,
            op,
            buffers: StageBuffers::default(),
        })
    }

    pub fn model(&self) -> &Model {
        &self.op.spatial.model
    }

    /// One step of size `dt`.
    pub fn step(&mut self, state: &mut CellField, dt: f64) -> Result<()> {
        imex_step(&self.config.tableau, &mut self.op, state.values_mut(), dt, &mut self.buffers)
    }

    fn check(&self, state: &CellField, step: usize) -> Result<()> {
        let model = self.model();
        let mut w = [0.0; MAX_VARS];
        for i in 0..state.n_cells() {
            state.state(i, &mut w);
            model.check_state(&w[..state.n_vars], i).map_err(|e| match e {
                Error::BlowUp { detail, .. } => Error::BlowUp { step, detail },
                other => other,
            })?;
        }
        Ok(())
    }

    /// March `state` from zero to `t_end`, landing on `t_end` exactly.
    pub fn advance(&mut self, mut state: CellField, t_end: f64) -> Result<Advanced> {
        if !(t_end >= 0.0) || !t_end.is_finite() {
            return Err(Error::Parameter(format!("t_end = {t_end}")));
        }
        let min_dt = 1e-12 * t_end;
        let mut t = 0.0;
        let mut steps = 0;
        while t < t_end {
            if steps >= self.config.step_cap {
                return Err(Error::Runaway(self.config.step_cap));
            }
            let mut dt = cfl_dt(self.model(), &state, self.config.cfl)
                .map_err(|e| with_step(e, steps))?
                .max(min_dt);
            let last = t + dt >= t_end - min_dt;
            if last {
                dt = t_end - t;
            }
            self.step(&mut state, dt).map_err(|e| with_step(e, steps))?;
            self.check(&state, steps)?;
            steps += 1;
            t = if last { t_end } else { t + dt };
        }
        Ok(Advanced {
            state,
            steps,
            time: t,
        })
    }
}

fn with_step(e: Error, step: usize) -> Error {
    match e {
        Error::BlowUp { detail, .. } => Error::BlowUp { step, detail },
        other => other,
    }
}

/// Solve `problem` up to `t_end` with `config`.
pub fn advance(problem: &Problem, config: StepperConfig, t_end: f64) -> Result<Advanced> {
    let mut solver = Solver::new(problem, config)?;
    solver.advance(problem.state.clone(), t_end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Boundary, Grid1D};
    use crate::models::{Case, ModelSpec, Quadrature};

    #[test]
    fn burgers_dt_formula() {
        let grid = Grid1D::new(0.0, 1.0, 20).unwrap();
        let mut vals = vec![0.5; 20];
        vals[3] = -1.0;
        let f = CellField::from_values(grid, 1, Boundary::Periodic, vals).unwrap();
        let dt = cfl_dt(&Model::Burgers, &f, 0.9).unwrap();
        assert!((dt - 0.045).abs() < 1e-15);
    }

    #[test]
    fn swe_at_rest_uses_floor() {
        let grid = Grid1D::new(0.0, 1.0, 10).unwrap();
        let f = CellField::from_values(grid, 2, Boundary::Transmissive, [vec![1.0; 10], vec![0.0; 10]].concat())
            .unwrap();
        let dt = cfl_dt(&Model::Swe { froude: 0.01 }, &f, 0.9).unwrap();
        assert!((dt - 0.09).abs() < 1e-15);
    }

    #[test]
    fn zero_end_time_returns_initial_state() {
        let spec = ModelSpec::new(ModelKind::Burgers, Case::BurgersGaussian);
        let grid = Grid1D::new(-5.0, 5.0, 40).unwrap();
        let p = spec.instantiate(grid, &[1.0], Quadrature::Midpoint).unwrap();
        let out = advance(&p, StepperConfig::for_model(ModelKind::Burgers, 2).unwrap(), 0.0).unwrap();
        assert_eq!(out.steps, 0);
        assert_eq!(out.state, p.state);
    }

    #[test]
    fn lands_on_end_time() {
        let spec = ModelSpec::new(ModelKind::Burgers, Case::BurgersGaussian);
        let grid = Grid1D::new(-5.0, 5.0, 40).unwrap();
        let p = spec.instantiate(grid, &[0.8], Quadrature::Midpoint).unwrap();
        let out = advance(&p, StepperConfig::for_model(ModelKind::Burgers, 1).unwrap(), 0.37).unwrap();
        assert_eq!(out.time, 0.37);
    }

    #[test]
    fn step_cap_reports_runaway() {
        let spec = ModelSpec::new(ModelKind::Burgers, Case::BurgersGaussian);
        let grid = Grid1D::new(-5.0, 5.0, 40).unwrap();
        let p = spec.instantiate(grid, &[0.8], Quadrature::Midpoint).unwrap();
        let mut cfg = StepperConfig::for_model(ModelKind::Burgers, 1).unwrap();
        cfg.step_cap = 3;
        assert!(matches!(advance(&p, cfg, 2.5), Err(Error::Runaway(3))));
    }

    #[test]
    fn instant_relaxation_lands_on_tube_law() {
        let mut spec = ModelSpec::new(ModelKind::BloodFlow, Case::BloodTest1);
        spec.tau_override = Some(0.0);
        let grid = Grid1D::new(0.0, 1.0, 20).unwrap();
        let p = spec.instantiate(grid, &[0.0], Quadrature::Midpoint).unwrap();
        let mut solver = Solver::new(&p, StepperConfig::for_model(ModelKind::BloodFlow, 2).unwrap()).unwrap();
        let mut state = p.state.clone();
        solver.step(&mut state, 1e-4).unwrap();
        let mut w = [0.0; MAX_VARS];
        for i in 0..20 {
            state.state(i, &mut w);
            let mut s = [0.0; MAX_VARS];
            p.model.relaxation_source(&w[..7], &mut s);
            assert!(s[2].abs() <= 1e-12 * w[2].abs(), "cell {i}: {}", s[2]);
        }
    }
}
