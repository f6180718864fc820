//! Parameterized initial data and the model description that turns a
//! random input `z` into a concrete problem on a grid.

use super::physics::{Model, ModelKind, Vessel, WALL_VARS};
use crate::error::{Error, Result};
use crate::mesh::{Boundary, CellField, Grid1D};
use std::f64::consts::PI;

/// Named initial-data families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Case {
    /// Gaussian of width `z` on `[-5, 5]`.
    BurgersGaussian,
    /// Two depth bumps of width `1 + z` on `[0, 30]`, fluid at rest.
    SweDoubleGaussian,
    /// Single large bump carried by a uniform current.
    SweMovingPulse,
    /// Constant depth at rest.
    SweLakeAtRest,
    /// Sinusoidal vessel, uncertain wall viscosity.
    BloodTest1,
    /// Sinusoidal vessel, uncertain area amplitude.
    BloodTest2,
}

impl std::str::FromStr for Case {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "burgers-gaussian" => Case::BurgersGaussian,
            "swe-double-gaussian" => Case::SweDoubleGaussian,
            "swe-moving-pulse" => Case::SweMovingPulse,
            "swe-lake-at-rest" => Case::SweLakeAtRest,
            "blood-test1" => Case::BloodTest1,
            "blood-test2" => Case::BloodTest2,
            other => return Err(Error::Config(format!("unknown case '{other}'"))),
        })
    }
}

impl std::fmt::Display for Case {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Case::BurgersGaussian => "burgers-gaussian",
            Case::SweDoubleGaussian => "swe-double-gaussian",
            Case::SweMovingPulse => "swe-moving-pulse",
            Case::SweLakeAtRest => "swe-lake-at-rest",
            Case::BloodTest1 => "blood-test1",
            Case::BloodTest2 => "blood-test2",
        })
    }
}

impl Case {
    /// Default spatial domain.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            Case::BurgersGaussian => (-5.0, 5.0),
            Case::SweDoubleGaussian | Case::SweMovingPulse | Case::SweLakeAtRest => (0.0, 30.0),
            Case::BloodTest1 | Case::BloodTest2 => (0.0, 1.0),
        }
    }

    pub fn default_boundary(&self) -> Boundary {
        match self {
            Case::BloodTest1 | Case::BloodTest2 => Boundary::Periodic,
            _ => Boundary::Transmissive,
        }
    }

    pub fn default_t_end(&self) -> f64 {
        match self {
            Case::BurgersGaussian => 2.5,
            Case::BloodTest1 | Case::BloodTest2 => 0.1,
            _ => 1.0,
        }
    }

    /// Support of the scalar random input.
    pub fn z_support(&self) -> (f64, f64) {
        match self {
            Case::SweDoubleGaussian | Case::SweMovingPulse | Case::SweLakeAtRest => (0.0, 1.0),
            _ => (-1.0, 1.0),
        }
    }

    fn is_blood(&self) -> bool {
        matches!(self, Case::BloodTest1 | Case::BloodTest2)
    }

    fn is_swe(&self) -> bool {
        matches!(
            self,
            Case::SweDoubleGaussian | Case::SweMovingPulse | Case::SweLakeAtRest
        )
    }
}

/// Characteristic scales for the blood-flow nondimensionalization.
/// The identity default uses the listed data verbatim.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scales {
    pub length: f64,
    pub time: f64,
    pub density: f64,
    pub area: f64,
    pub viscosity: f64,
}

impl Default for Scales {
    fn default() -> Self {
        Scales {
            length: 1.0,
            time: 1.0,
            density: 1.0,
            area: 1.0,
            viscosity: 1.0,
        }
    }
}

impl Scales {
    fn velocity(&self) -> f64 {
        self.length / self.time
    }

    fn pressure(&self) -> f64 {
        self.density * self.velocity().powi(2)
    }

    fn modulus(&self) -> f64 {
        self.viscosity / self.time
    }

    pub fn reynolds(&self) -> f64 {
        self.density * self.velocity() * self.length / self.viscosity
    }
}

/// Cell-average rule used at initialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    Midpoint,
    Gauss3,
}

impl Quadrature {
    pub fn for_order(order: usize) -> Self {
        if order >= 3 {
            Quadrature::Gauss3
        } else {
            Quadrature::Midpoint
        }
    }

    /// Nodes on `[-1/2, 1/2]` and weights summing to one.
    fn rule(&self) -> (&'static [f64], &'static [f64]) {
        const G: f64 = 0.387_298_334_620_741_7; // sqrt(3/5) / 2
        match self {
            Quadrature::Midpoint => (&[0.0], &[1.0]),
            Quadrature::Gauss3 => (&[-G, 0.0, G], &[5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0]),
        }
    }
}

/// Model family, initial data and physical parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub case: Case,
    pub boundary: Boundary,
    /// SWE Froude number.
    pub froude: f64,
    /// Jin-Xin relaxation rate.
    pub eps: f64,
    /// Jin-Xin characteristic speed as a multiple of `max |u0|`.
    pub a_factor: f64,
    /// Blood density (dimensional).
    pub rho: f64,
    /// Wall thickness (dimensional).
    pub h0: f64,
    /// Overrides the viscosity-derived relaxation time in every cell.
    pub tau_override: Option<f64>,
    /// Start on the equilibrium manifold: the relaxed variable of the
    /// initial data is replaced by its equilibrium value. This is the state
    /// the exact solution reaches after an initial layer of width O(tau).
    pub prepared: bool,
    pub scales: Scales,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, case: Case) -> Self {
        ModelSpec {
            kind,
            case,
            boundary: case.default_boundary(),
            froude: 1.0,
            eps: 1e-6,
            a_factor: 1.05,
            rho: 1050.0,
            h0: 0.0015,
            tau_override: None,
            prepared: false,
            scales: Scales::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let compatible = match self.kind {
            ModelKind::Burgers | ModelKind::JinXin => self.case == Case::BurgersGaussian,
            ModelKind::Swe => self.case.is_swe(),
            ModelKind::BloodFlow | ModelKind::BloodFlowElastic => self.case.is_blood(),
        };
        if !compatible {
            return Err(Error::Config(format!(
                "case {} does not apply to model {}",
                self.case, self.kind
            )));
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Parameter(format!("{name} must be positive, got {v}")))
            }
        };
        positive("froude", self.froude)?;
        positive("a_factor", self.a_factor)?;
        positive("rho", self.rho)?;
        positive("h0", self.h0)?;
        for s in [
            self.scales.length,
            self.scales.time,
            self.scales.density,
            self.scales.area,
            self.scales.viscosity,
        ] {
            positive("scale", s)?;
        }
        if !(self.eps >= 0.0) {
            return Err(Error::Parameter(format!("eps must be >= 0, got {}", self.eps)));
        }
        if let Some(t) = self.tau_override {
            if !(t >= 0.0) {
                return Err(Error::Parameter(format!("tau must be >= 0, got {t}")));
            }
        }
        if self.a_factor <= 1.0 && self.kind == ModelKind::JinXin {
            return Err(Error::Parameter(
                "a_factor must exceed 1 for the sub-characteristic condition".into(),
            ));
        }
        Ok(())
    }

    /// Dimensionless spatial domain.
    pub fn domain(&self) -> (f64, f64) {
        let (a, b) = self.case.domain();
        if self.case.is_blood() {
            (a / self.scales.length, b / self.scales.length)
        } else {
            (a, b)
        }
    }

    fn vessel(&self) -> Vessel {
        let s = &self.scales;
        Vessel {
            rho: self.rho / s.density,
            re: s.reynolds(),
            h0: self.h0 / s.area.sqrt(),
        }
    }

    /// Asymptotic-limit model sharing the case and parameters.
    pub fn reduced(&self) -> Result<ModelSpec> {
        let kind = match self.kind {
            ModelKind::JinXin => ModelKind::Burgers,
            ModelKind::BloodFlow => ModelKind::BloodFlowElastic,
            other => {
                return Err(Error::Unsupported(format!("{other} has no reduced model")));
            }
        };
        Ok(ModelSpec {
            kind,
            tau_override: None,
            ..self.clone()
        })
    }

    /// Build the model, its cell-averaged initial state and per-cell
    /// relaxation times for input `z`.
    pub fn instantiate(&self, grid: Grid1D, z: &[f64], quad: Quadrature) -> Result<Problem> {
        self.validate()?;
        let z0 = *z
            .first()
            .ok_or_else(|| Error::Dimension("empty random input".into()))?;
        let (lo, hi) = self.case.z_support();
        if !(z0 >= lo && z0 <= hi) {
            return Err(Error::Parameter(format!(
                "z = {z0} outside support [{lo}, {hi}]"
            )));
        }
        let n = grid.n_cells;
        let (nodes, weights) = quad.rule();
        let dx = grid.dx();
        let average = |i: usize, f: &dyn Fn(f64) -> f64| -> f64 {
            let xc = grid.center(i);
            nodes
                .iter()
                .zip(weights)
                .map(|(xi, w)| w * f(xc + xi * dx))
                .sum()
        };

        match self.kind {
            ModelKind::Burgers | ModelKind::JinXin => {
                let sigma = z0;
                if sigma == 0.0 {
                    return Err(Error::Degenerate("Gaussian width sigma(z) = 0".into()));
                }
                let amp = 1.0 / ((2.0 * PI).sqrt() * sigma);
                let u0 = |x: f64| amp * (-x * x / (2.0 * sigma * sigma)).exp();
                let u: Vec<f64> = (0..n).map(|i| average(i, &u0)).collect();
                if self.kind == ModelKind::Burgers {
                    let field = CellField::from_values(grid, 1, self.boundary, u)?;
                    return Ok(Problem::plain(Model::Burgers, field));
                }
                let umax = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let a = (self.a_factor * umax).max(1e-8);
                let v: Vec<f64> = u.iter().map(|ui| 0.5 * ui * ui).collect();
                let mut values = u;
                values.extend(v);
                let field = CellField::from_values(grid, 2, self.boundary, values)?;
                let model = Model::JinXin { a, eps: self.eps };
                let tau = vec![self.eps; n];
                Ok(Problem {
                    model,
                    state: field,
                    tau,
                })
            }
            ModelKind::Swe => {
                let h0 = |x: f64| -> f64 {
                    match self.case {
                        Case::SweDoubleGaussian => {
                            let s2 = 2.0 * (1.0 + z0).powi(2);
                            1.0 + 0.01 * (-(x - 10.0).powi(2) / s2).exp()
                                + 0.01 * (-(x - 20.0).powi(2) / s2).exp()
                        }
                        Case::SweMovingPulse => {
                            1.0 + 0.2 * (1.0 + z0) * (-(x - 12.0).powi(2) / 8.0).exp()
                        }
                        _ => 1.0,
                    }
                };
                let u0 = match self.case {
                    Case::SweMovingPulse => 0.5,
                    _ => 0.0,
                };
                let h: Vec<f64> = (0..n).map(|i| average(i, &h0)).collect();
                let hu: Vec<f64> = (0..n).map(|i| average(i, &|x| u0 * h0(x))).collect();
                let mut values = h;
                values.extend(hu);
                let field = CellField::from_values(grid, 2, self.boundary, values)?;
                Ok(Problem::plain(
                    Model::Swe {
                        froude: self.froude,
                    },
                    field,
                ))
            }
            ModelKind::BloodFlow | ModelKind::BloodFlowElastic => self.blood(grid, z0, &average),
        }
        .map(|p| if self.prepared { p.prepared() } else { p })
    }

    fn blood(
        &self,
        grid: Grid1D,
        z0: f64,
        average: &dyn Fn(usize, &dyn Fn(f64) -> f64) -> f64,
    ) -> Result<Problem> {
        let n = grid.n_cells;
        let s = self.scales;
        let l = s.length;
        let amp = match self.case {
            Case::BloodTest2 => 0.0001 * (1.0 + 0.5 * z0),
            _ => 0.0001,
        };
        let eta = match self.case {
            Case::BloodTest1 => 5e5 * (1.0 + z0),
            _ => 5e5,
        };
        let sn = |x: f64| (2.0 * PI * x * l).sin();
        let cs = |x: f64| (2.0 * PI * x * l).cos();
        // dimensional profiles evaluated at dimensionless x
        let area = |x: f64| (0.0005 + amp * sn(x)) / s.area;
        let flow = |_x: f64| 0.00005 / (s.area * s.velocity());
        let pressure = |x: f64| (15000.0 + 5000.0 * sn(x)) / s.pressure();
        let p0 = |x: f64| (5000.0 + 500.0 * cs(x)) / s.pressure();
        let e0 = |x: f64| (1.0e6 + 1.0e5 * sn(x)) / s.modulus();
        let einf = |x: f64| (8.0e5 + 1.0e5 * sn(x)) / s.modulus();

        let full = self.kind == ModelKind::BloodFlow;
        let n_cons = if full { 3 } else { 2 };
        let n_ext = n_cons + WALL_VARS;
        let mut values = vec![0.0; n_ext * n];
        let profiles: Vec<&dyn Fn(f64) -> f64> = if full {
            vec![&area, &flow, &pressure, &area, &p0, &e0, &einf]
        } else {
            vec![&area, &flow, &area, &p0, &e0, &einf]
        };
        for (v, f) in profiles.iter().enumerate() {
            for i in 0..n {
                values[v * n + i] = average(i, *f);
            }
        }
        let state = CellField::from_values(grid, n_ext, self.boundary, values)?;
        let vessel = self.vessel();
        let model = if full {
            Model::BloodFlow(vessel)
        } else {
            Model::BloodFlowElastic(vessel)
        };
        let mut w = [0.0; super::physics::MAX_VARS];
        for i in 0..n {
            state.state(i, &mut w);
            model.check_state(&w, i)?;
            let (e0_i, einf_i) = (w[n_cons + 2], w[n_cons + 3]);
            if !(einf_i < e0_i) {
                return Err(Error::Parameter(format!(
                    "E_inf >= E0 at cell {i} ({einf_i} vs {e0_i})"
                )));
            }
            if w[n_cons] <= 0.0 {
                return Err(Error::Positivity {
                    what: "A0",
                    value: w[n_cons],
                    cell: i,
                });
            }
        }
        let tau = if full {
            match self.tau_override {
                Some(t) => vec![t; n],
                None => {
                    let eta_nd = eta / s.viscosity;
                    (0..n)
                        .map(|i| {
                            let e0_i = state.get(n_cons + 2, i);
                            let einf_i = state.get(n_cons + 3, i);
                            // eta / E0 (1 - E_inf / E0), in units of the time scale
                            eta_nd / e0_i * (1.0 - einf_i / e0_i)
                        })
                        .collect()
                }
            }
        } else {
            vec![0.0; n]
        };
        Ok(Problem { model, state, tau })
    }
}

/// A concrete deterministic problem: model, initial state (extended with
/// any coefficient fields) and per-cell relaxation times.
#[derive(Debug, Clone)]
pub struct Problem {
    pub model: Model,
    pub state: CellField,
    pub tau: Vec<f64>,
}

impl Problem {
    /// Project every cell onto the local equilibrium.
    pub fn prepared(mut self) -> Self {
        let nv = self.state.n_vars;
        let mut w = [0.0; super::physics::MAX_VARS];
        for i in 0..self.state.n_cells() {
            self.state.state(i, &mut w);
            if let Some((k, value)) = self.model.equilibrium_value(&w[..nv]) {
                self.state.set(k, i, value);
            }
        }
        self
    }

    fn plain(model: Model, state: CellField) -> Self {
        let n = state.n_cells();
        Problem {
            model,
            state,
            tau: vec![0.0; n],
        }
    }

    /// Largest `F'(u)^2 / a^2` over the state (Jin-Xin only); values
    /// below one satisfy the sub-characteristic condition.
    pub fn subcharacteristic_ratio(&self) -> Option<f64> {
        match self.model {
            Model::JinXin { a, .. } => {
                let umax = self.state.var(0).iter().fold(0.0f64, |m, u| m.max(u.abs()));
                Some((umax / a).powi(2))
            }
            _ => None,
        }
    }
}

/// Reduced (equilibrium) counterpart of a relaxation model.
pub fn reduced_model_of(spec: &ModelSpec) -> Result<ModelSpec> {
    spec.reduced()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prepared_blood_data_sits_on_the_tube_law() {
        let spec = ModelSpec {
            prepared: true,
            ..ModelSpec::new(ModelKind::BloodFlow, Case::BloodTest1)
        };
        let p = spec.instantiate(Grid1D::new(0.0, 1.0, 16).unwrap(), &[0.0], Quadrature::Midpoint).unwrap();
        let mut w = [0.0; crate::models::MAX_VARS];
        let mut src = [0.0; crate::models::MAX_VARS];
        for i in 0..16 {
            p.state.state(i, &mut w);
            p.model.relaxation_source(&w[..p.state.n_vars], &mut src);
            assert!(src[2].abs() < 1e-9 * w[2].abs());
        }
        let raw = ModelSpec::new(ModelKind::BloodFlow, Case::BloodTest1)
            .instantiate(Grid1D::new(0.0, 1.0, 16).unwrap(), &[0.0], Quadrature::Midpoint)
            .unwrap();
        assert_eq!(raw.state.var(0), p.state.var(0));
        assert_ne!(raw.state.var(2), p.state.var(2));
    }

    fn point(spec: &ModelSpec, x: f64, z: f64) -> Vec<f64> {
        // tiny cell centered on x
        let grid = Grid1D::new(x - 2e-9, x + 2e-9, 4).unwrap();
        let p = spec.instantiate(grid, &[z], Quadrature::Midpoint).unwrap();
        let mut w = vec![0.0; p.state.n_vars];
        p.state.state(1, &mut w);
        w
    }

    #[test]
    fn burgers_peak_value() {
        let spec = ModelSpec::new(ModelKind::Burgers, Case::BurgersGaussian);
        let w = point(&spec, 0.0, 1.0);
        assert!((w[0] - 0.398_942_280_401_432_7).abs() < 1e-12);
    }

    #[test]
    fn burgers_zero_width_is_degenerate() {
        let spec = ModelSpec::new(ModelKind::Burgers, Case::BurgersGaussian);
        let grid = Grid1D::new(-5.0, 5.0, 10).unwrap();
        assert!(matches!(
            spec.instantiate(grid, &[0.0], Quadrature::Midpoint),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn swe_bump_height() {
        let spec = ModelSpec::new(ModelKind::Swe, Case::SweDoubleGaussian);
        let w = point(&spec, 10.0, 0.0);
        assert!((w[0] - 1.01).abs() < 1e-10);
        assert_eq!(w[1], 0.0);
    }

    #[test]
    fn blood_quarter_point() {
        let spec = ModelSpec::new(ModelKind::BloodFlow, Case::BloodTest1);
        let w = point(&spec, 0.25, 0.0);
        assert!((w[0] - 0.0006).abs() < 1e-12);
        assert!((w[2] - 20000.0).abs() < 1e-6);
        assert!((w[1] - 5e-5).abs() < 1e-18);
    }

    #[test]
    fn blood_relaxation_time_from_viscosity() {
        let spec = ModelSpec::new(ModelKind::BloodFlow, Case::BloodTest1);
        let grid = Grid1D::new(0.0, 1.0, 50).unwrap();
        let p = spec.instantiate(grid, &[0.0], Quadrature::Midpoint).unwrap();
        for i in 0..50 {
            let e0 = p.state.get(5, i);
            let ei = p.state.get(6, i);
            let expect = 5e5 / e0 * (1.0 - ei / e0);
            assert!((p.tau[i] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn reduced_models() {
        let jx = ModelSpec::new(ModelKind::JinXin, Case::BurgersGaussian);
        assert_eq!(jx.reduced().unwrap().kind, ModelKind::Burgers);
        let bf = ModelSpec::new(ModelKind::BloodFlow, Case::BloodTest2);
        let el = reduced_model_of(&bf).unwrap();
        assert_eq!(el.kind, ModelKind::BloodFlowElastic);
        assert_eq!(el.case, bf.case);
        let bu = ModelSpec::new(ModelKind::Burgers, Case::BurgersGaussian);
        assert!(matches!(bu.reduced(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn gauss_average_of_quadratic_is_exact() {
        let (nodes, weights) = Quadrature::Gauss3.rule();
        let avg: f64 = nodes
            .iter()
            .zip(weights)
            .map(|(x, w)| w * (x * x + x + 1.0))
            .sum();
        assert!((avg - (1.0 / 12.0 + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn jinxin_starts_on_equilibrium_and_subcharacteristic() {
        let spec = ModelSpec::new(ModelKind::JinXin, Case::BurgersGaussian);
        let grid = Grid1D::new(-5.0, 5.0, 40).unwrap();
        let p = spec.instantiate(grid, &[0.7], Quadrature::Gauss3).unwrap();
        for i in 0..40 {
            let u = p.state.get(0, i);
            assert_eq!(p.state.get(1, i), 0.5 * u * u);
        }
        assert!(p.subcharacteristic_ratio().unwrap() < 1.0);
    }
}
