//! Pointwise physics: fluxes, nonconservative products, wave speeds,
//! relaxation sources and equilibrium manifolds.
//!
//! Every routine works on an *extended* state slice: the conserved
//! variables first, followed by any spatially varying coefficients the
//! model carries (vessel wall parameters for the blood-flow systems).
//! Coefficients have no time derivative but are reconstructed with the
//! state so interface and quadrature evaluations see consistent values.

use crate::error::{Error, Result};
use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

/// Upper bound on the extended state length across all models.
pub const MAX_VARS: usize = 7;

pub type Ext = [f64; MAX_VARS];

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Constant blood and wall properties (dimensionless).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vessel {
    pub rho: f64,
    pub re: f64,
    pub h0: f64,
}

impl Vessel {
    /// Wall stiffness factor `G(A) = h0 sqrt(pi) / (2 A0 sqrt(A))`.
    #[inline]
    pub fn g(&self, area: f64, a0: f64) -> f64 {
        self.h0 * SQRT_PI / (2.0 * a0 * area.sqrt())
    }

    /// Tube law shape `F(A) = h0 sqrt(pi) / A0 (sqrt(A) - sqrt(A0))`.
    #[inline]
    pub fn f(&self, area: f64, a0: f64) -> f64 {
        self.h0 * SQRT_PI / a0 * (area.sqrt() - a0.sqrt())
    }

    /// Elastic tube law `p0 + E_inf/Re F(A)`.
    #[inline]
    pub fn tube_law(&self, area: f64, wall: &Wall) -> f64 {
        wall.p0 + wall.e_inf / self.re * self.f(area, wall.a0)
    }

    /// Gradient of the tube law with respect to `(A, A0, p0, E_inf)`.
    fn tube_law_gradient(&self, area: f64, wall: &Wall) -> [f64; 4] {
        let sa = area.sqrt();
        let sa0 = wall.a0.sqrt();
        let k = self.h0 * SQRT_PI;
        let d_area = wall.e_inf / self.re * self.g(area, wall.a0);
        let d_a0 = wall.e_inf / self.re
            * k
            * (-(sa - sa0) / (wall.a0 * wall.a0) - 0.5 / (sa0 * wall.a0));
        let d_einf = self.f(area, wall.a0) / self.re;
        [d_area, d_a0, 1.0, d_einf]
    }
}

/// Local wall coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wall {
    pub a0: f64,
    pub p0: f64,
    pub e0: f64,
    pub e_inf: f64,
}

impl Wall {
    #[inline]
    fn from_slice(w: &[f64]) -> Self {
        Wall {
            a0: w[0],
            p0: w[1],
            e0: w[2],
            e_inf: w[3],
        }
    }
}

/// Number of wall coefficients carried by the blood-flow models.
pub const WALL_VARS: usize = 4;

/// A PDE system with its constant parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    /// `u_t + (u^2/2)_x = 0`.
    Burgers,
    /// Relaxation system with flux `(v, a^2 u)` and equilibrium `v = u^2/2`.
    JinXin { a: f64, eps: f64 },
    /// Dimensionless shallow water over a flat bottom, state `(eta, hu)`.
    Swe { froude: f64 },
    /// Viscoelastic vessel, state `(A, q, p)` plus wall coefficients.
    BloodFlow(Vessel),
    /// Elastic limit, state `(A, q)` plus wall coefficients.
    BloodFlowElastic(Vessel),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Burgers,
    JinXin,
    Swe,
    BloodFlow,
    BloodFlowElastic,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "burgers" => ModelKind::Burgers,
            "jinxin" | "jin-xin" => ModelKind::JinXin,
            "swe" | "shallow-water" => ModelKind::Swe,
            "bloodflow" | "blood-flow" => ModelKind::BloodFlow,
            "bloodflow-elastic" | "blood-flow-elastic" => ModelKind::BloodFlowElastic,
            other => return Err(Error::Config(format!("unknown model kind '{other}'"))),
        })
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Burgers => "burgers",
            ModelKind::JinXin => "jinxin",
            ModelKind::Swe => "swe",
            ModelKind::BloodFlow => "bloodflow",
            ModelKind::BloodFlowElastic => "bloodflow-elastic",
        })
    }
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Burgers => ModelKind::Burgers,
            Model::JinXin { .. } => ModelKind::JinXin,
            Model::Swe { .. } => ModelKind::Swe,
            Model::BloodFlow(_) => ModelKind::BloodFlow,
            Model::BloodFlowElastic(_) => ModelKind::BloodFlowElastic,
        }
    }

    /// Number of evolved (conserved or relaxed) variables.
    pub fn n_cons(&self) -> usize {
        match self {
            Model::Burgers => 1,
            Model::JinXin { .. } | Model::Swe { .. } | Model::BloodFlowElastic(_) => 2,
            Model::BloodFlow(_) => 3,
        }
    }

    /// Number of spatially varying coefficients appended to the state.
    pub fn n_aux(&self) -> usize {
        match self {
            Model::BloodFlow(_) | Model::BloodFlowElastic(_) => WALL_VARS,
            _ => 0,
        }
    }

    pub fn n_ext(&self) -> usize {
        self.n_cons() + self.n_aux()
    }

    pub fn var_names(&self) -> &'static [&'static str] {
        match self {
            Model::Burgers => &["u"],
            Model::JinXin { .. } => &["u", "v"],
            Model::Swe { .. } => &["h", "hu"],
            Model::BloodFlow(_) => &["A", "q", "p"],
            Model::BloodFlowElastic(_) => &["A", "q"],
        }
    }

    /// Whether the system has terms not in conservation form.
    pub fn has_nonconservative(&self) -> bool {
        matches!(self, Model::BloodFlow(_) | Model::BloodFlowElastic(_))
    }

    /// Whether the stiff relaxation source is active.
    pub fn has_relaxation(&self) -> bool {
        matches!(self, Model::JinXin { .. } | Model::BloodFlow(_))
    }

    fn wall(&self, w: &[f64]) -> Wall {
        Wall::from_slice(&w[self.n_cons()..])
    }

    /// Admissibility of a state (positive depth / area, finite entries).
    pub fn check_state(&self, w: &[f64], cell: usize) -> Result<()> {
        for (k, v) in w.iter().take(self.n_ext()).enumerate() {
            if !v.is_finite() {
                return Err(Error::BlowUp {
                    step: 0,
                    detail: format!("non-finite entry {k} at cell {cell}"),
                });
            }
        }
        match self {
            Model::Swe { .. } if w[0] <= 0.0 => Err(Error::Positivity {
                what: "h",
                value: w[0],
                cell,
            }),
            Model::BloodFlow(_) | Model::BloodFlowElastic(_) if w[0] <= 0.0 => {
                Err(Error::Positivity {
                    what: "A",
                    value: w[0],
                    cell,
                })
            }
            _ => Ok(()),
        }
    }

    /// Conservative flux of the full system.
    pub fn physical_flux(&self, w: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_state(w, 0)?;
        self.flux_full(w, out);
        Ok(())
    }

    #[inline]
    fn flux_full(&self, w: &[f64], out: &mut [f64]) {
        match self {
            Model::Burgers => out[0] = 0.5 * w[0] * w[0],
            Model::JinXin { a, .. } => {
                out[0] = w[1];
                out[1] = a * a * w[0];
            }
            Model::Swe { .. } => {
                out[0] = w[1];
                out[1] = w[1] * w[1] / w[0];
            }
            Model::BloodFlow(_) => {
                out[0] = w[1];
                out[1] = w[1] * w[1] / w[0];
                out[2] = 0.0;
            }
            Model::BloodFlowElastic(_) => {
                out[0] = w[1];
                out[1] = w[1] * w[1] / w[0];
            }
        }
    }

    /// Flux of the explicitly integrated part. For SWE the mass flux and
    /// the pressure gradient are integrated implicitly, leaving only the
    /// momentum convection here.
    #[inline]
    pub fn explicit_flux(&self, w: &[f64], out: &mut [f64]) {
        match self {
            Model::Swe { .. } => {
                out[0] = 0.0;
                out[1] = w[1] * w[1] / w[0];
            }
            _ => self.flux_full(w, out),
        }
    }

    /// `B(w) dw`: nonconservative products for the conserved rows, where
    /// `dw` is an increment of the extended state.
    #[inline]
    pub fn nc_product(&self, w: &[f64], dw: &[f64], out: &mut [f64]) {
        match self {
            Model::BloodFlow(v) => {
                let wall = self.wall(w);
                out[0] = 0.0;
                out[1] = w[0] / v.rho * dw[2];
                out[2] = wall.e0 / v.re * v.g(w[0], wall.a0) * dw[1];
            }
            Model::BloodFlowElastic(v) => {
                let wall = self.wall(w);
                let grad = v.tube_law_gradient(w[0], &wall);
                // dp = dp/dA dA + dp/dA0 dA0 + dp0 + dp/dEinf dEinf
                let dp = grad[0] * dw[0] + grad[1] * dw[2] + grad[2] * dw[3] + grad[3] * dw[5];
                out[0] = 0.0;
                out[1] = w[0] / v.rho * dp;
            }
            _ => {
                for o in out.iter_mut().take(self.n_cons()) {
                    *o = 0.0;
                }
            }
        }
    }

    /// Sound speed of the blood-flow systems.
    #[inline]
    fn pulse_speed(&self, w: &[f64]) -> f64 {
        match self {
            Model::BloodFlow(v) => {
                let wall = self.wall(w);
                (wall.e0 / v.re * v.g(w[0], wall.a0) * w[0] / v.rho).sqrt()
            }
            Model::BloodFlowElastic(v) => {
                let wall = self.wall(w);
                (wall.e_inf / v.re * v.g(w[0], wall.a0) * w[0] / v.rho).sqrt()
            }
            _ => 0.0,
        }
    }

    /// Spectral radius of the full quasilinear matrix.
    #[inline]
    pub fn max_wave_speed(&self, w: &[f64]) -> f64 {
        match self {
            Model::Burgers => w[0].abs(),
            Model::JinXin { a, .. } => *a,
            Model::Swe { froude } => (w[1] / w[0]).abs() + w[0].sqrt() / froude,
            Model::BloodFlow(_) | Model::BloodFlowElastic(_) => {
                (w[1] / w[0]).abs() + self.pulse_speed(w)
            }
        }
    }

    /// Fastest speed of the explicitly integrated part. For SWE this is
    /// the spectral radius `2|u|` of the convective flux `(0, (hu)^2/h)`;
    /// the elastic system is upwinded with the frozen structure of its
    /// viscoelastic parent (see [`Model::lift_to_parent`]), so its step
    /// is limited by the instantaneous-modulus speed.
    #[inline]
    pub fn explicit_wave_speed(&self, w: &[f64]) -> f64 {
        match self {
            Model::Swe { .. } => 2.0 * (w[1] / w[0]).abs(),
            Model::BloodFlowElastic(v) => {
                let wall = self.wall(w);
                (w[1] / w[0]).abs() + (wall.e0 / v.re * v.g(w[0], wall.a0) * w[0] / v.rho).sqrt()
            }
            _ => self.max_wave_speed(w),
        }
    }

    /// Relaxation system whose DOT dissipation and nonconservative path
    /// integrals discretize this one, with the state lifted into it. The
    /// elastic system uses the viscoelastic one at the equilibrium
    /// pressure: the frozen speeds dominate the elastic ones
    /// (`E_inf < E0`), and the resulting scheme is exactly the stiff limit
    /// of the viscoelastic scheme. `None` for every other model.
    pub fn lift_to_parent(&self, w: &[f64], out: &mut [f64]) -> Option<Model> {
        match self {
            Model::BloodFlowElastic(v) => {
                out[0] = w[0];
                out[1] = w[1];
                out[2] = v.tube_law(w[0], &self.wall(w));
                out[3..3 + WALL_VARS].copy_from_slice(&w[2..2 + WALL_VARS]);
                Some(Model::BloodFlow(*v))
            }
            _ => None,
        }
    }

    /// Quasilinear matrix `df/dq + B` restricted to the conserved
    /// variables, row-major, for the blood-flow systems.
    pub fn quasilinear_matrix(&self, w: &[f64]) -> Option<Vec<f64>> {
        match self {
            Model::BloodFlow(v) => {
                let wall = self.wall(w);
                let u = w[1] / w[0];
                let k = wall.e0 / v.re * v.g(w[0], wall.a0);
                Some(vec![
                    0.0,
                    1.0,
                    0.0,
                    -u * u,
                    2.0 * u,
                    w[0] / v.rho,
                    0.0,
                    k,
                    0.0,
                ])
            }
            Model::BloodFlowElastic(_) => {
                let u = w[1] / w[0];
                let c = self.pulse_speed(w);
                Some(vec![0.0, 1.0, c * c - u * u, 2.0 * u])
            }
            _ => None,
        }
    }

    /// `|M(w)| dq` through the eigen-decomposition of the quasilinear
    /// matrix. Returns `false` when the matrix is not diagonalizable with
    /// a well-conditioned eigenbasis.
    pub fn abs_quasilinear_apply(&self, w: &[f64], dq: &[f64], out: &mut [f64]) -> bool {
        match self {
            Model::BloodFlow(v) => {
                let wall = self.wall(w);
                let area = w[0];
                let u = w[1] / area;
                let k = wall.e0 / v.re * v.g(area, wall.a0);
                let c = (k * area / v.rho).sqrt();
                if !(c > 0.0) {
                    return false;
                }
                let (l1, l3) = (u - c, u + c);
                // columns: eigenvectors for u - c, 0, u + c
                let r = Matrix3::new(
                    1.0,
                    1.0,
                    1.0,
                    l1,
                    0.0,
                    l3,
                    k,
                    u * u * v.rho / area,
                    k,
                );
                let Some(r_inv) = r.try_inverse() else {
                    return false;
                };
                let alpha = r_inv * Vector3::new(dq[0], dq[1], dq[2]);
                if !alpha.iter().all(|a| a.is_finite()) {
                    return false;
                }
                let scaled = Vector3::new(l1.abs() * alpha[0], 0.0, l3.abs() * alpha[2]);
                let res = r * scaled;
                out[..3].copy_from_slice(res.as_slice());
                true
            }
            Model::BloodFlowElastic(_) => {
                let u = w[1] / w[0];
                let c = self.pulse_speed(w);
                if !(c > 0.0) {
                    return false;
                }
                let (l1, l2) = (u - c, u + c);
                let r = Matrix2::new(1.0, 1.0, l1, l2);
                let Some(r_inv) = r.try_inverse() else {
                    return false;
                };
                let alpha = r_inv * Vector2::new(dq[0], dq[1]);
                let res = r * Vector2::new(l1.abs() * alpha[0], l2.abs() * alpha[1]);
                out[..2].copy_from_slice(res.as_slice());
                true
            }
            _ => false,
        }
    }

    /// `S(w)` with the stiff term written as `-(1/scaling) S(w)`.
    pub fn relaxation_source(&self, w: &[f64], out: &mut [f64]) {
        for o in out.iter_mut().take(self.n_cons()) {
            *o = 0.0;
        }
        match self {
            Model::JinXin { .. } => out[1] = w[1] - 0.5 * w[0] * w[0],
            Model::BloodFlow(v) => {
                let wall = self.wall(w);
                out[2] = w[2] - v.tube_law(w[0], &wall);
            }
            _ => {}
        }
    }

    /// Equilibrium value of the relaxed variable given the others.
    #[inline]
    pub fn equilibrium_value(&self, w: &[f64]) -> Option<(usize, f64)> {
        match self {
            Model::JinXin { .. } => Some((1, 0.5 * w[0] * w[0])),
            Model::BloodFlow(v) => Some((2, v.tube_law(w[0], &self.wall(w)))),
            _ => None,
        }
    }

    /// Project onto the local equilibrium manifold (identity for models
    /// without relaxation).
    pub fn equilibrium_project(&self, w: &mut [f64]) {
        if let Some((k, value)) = self.equilibrium_value(w) {
            w[k] = value;
        }
    }

    /// Pressure of a blood-flow state (stored for the full model, from
    /// the tube law for the elastic one).
    /// Whether the pressure is a conserved variable, so that its cell
    /// average is part of the state.
    pub fn pressure_is_conserved(&self) -> bool {
        matches!(self, Model::BloodFlow(_))
    }

    pub fn pressure(&self, w: &[f64]) -> Option<f64> {
        match self {
            Model::BloodFlow(_) => Some(w[2]),
            Model::BloodFlowElastic(v) => Some(v.tube_law(w[0], &self.wall(w))),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vessel() -> Vessel {
        Vessel {
            rho: 1050.0,
            re: 1.0,
            h0: 0.0015,
        }
    }

    fn blood_state(area: f64, q: f64, p: f64) -> Vec<f64> {
        vec![area, q, p, 5e-4, 5000.0, 1.0e6, 8.0e5]
    }

    #[test]
    fn flux_examples() {
        let mut out = [0.0; 3];
        Model::Burgers.physical_flux(&[2.0], &mut out).unwrap();
        assert_eq!(out[0], 2.0);

        let jx = Model::JinXin { a: 2.0, eps: 1.0 };
        jx.physical_flux(&[1.0, 3.0], &mut out).unwrap();
        assert_eq!(&out[..2], &[3.0, 4.0]);

        let bf = Model::BloodFlow(vessel());
        bf.physical_flux(&blood_state(1.0, 2.0, 0.0), &mut out).unwrap();
        assert_eq!(&out[..2], &[2.0, 4.0]);
    }

    #[test]
    fn flux_rejects_nonpositive_area_and_depth() {
        let mut out = [0.0; 3];
        let bf = Model::BloodFlow(vessel());
        assert!(matches!(
            bf.physical_flux(&blood_state(0.0, 1.0, 0.0), &mut out),
            Err(Error::Positivity { what: "A", .. })
        ));
        let swe = Model::Swe { froude: 1.0 };
        assert!(matches!(
            swe.physical_flux(&[-1.0, 0.0], &mut out),
            Err(Error::Positivity { what: "h", .. })
        ));
    }

    #[test]
    fn wave_speed_examples() {
        assert_eq!(Model::Burgers.max_wave_speed(&[-3.0]), 3.0);
        let swe = Model::Swe { froude: 1.0 };
        assert_eq!(swe.max_wave_speed(&[1.0, 0.0]), 1.0);
        assert_eq!(swe.explicit_wave_speed(&[1.0, 0.0]), 0.0);

        let v = vessel();
        let bf = Model::BloodFlow(v);
        let w = blood_state(5e-4, 0.0, 15000.0);
        let c = (1.0e6 / v.re * v.g(5e-4, 5e-4) * 5e-4 / v.rho).sqrt();
        assert!((bf.max_wave_speed(&w) - c).abs() < 1e-12 * c);
    }

    #[test]
    fn relaxation_source_examples() {
        let jx = Model::JinXin { a: 3.0, eps: 1e-3 };
        let mut s = [0.0; 3];
        jx.relaxation_source(&[2.0, 5.0], &mut s);
        assert_eq!(s[1], 3.0);
        jx.relaxation_source(&[2.0, 2.0], &mut s);
        assert_eq!(s[1], 0.0);

        let v = vessel();
        let bf = Model::BloodFlow(v);
        let mut w = blood_state(6e-4, 1e-5, 0.0);
        let wall = Wall::from_slice(&w[3..]);
        w[2] = v.tube_law(6e-4, &wall);
        bf.relaxation_source(&w, &mut s);
        assert_eq!(s[2], 0.0);
    }

    #[test]
    fn projection_examples() {
        let jx = Model::JinXin { a: 3.0, eps: 1e-3 };
        let mut w = [1.0, 7.0];
        jx.equilibrium_project(&mut w);
        assert_eq!(w, [1.0, 0.5]);
        let again = w;
        jx.equilibrium_project(&mut w);
        assert_eq!(w, again);

        let bf = Model::BloodFlow(vessel());
        let mut w = blood_state(5e-4, 0.0, 1.0);
        bf.equilibrium_project(&mut w);
        assert_eq!(w[2], 5000.0);
    }

    #[test]
    fn abs_matrix_of_elastic_matches_dense_route() {
        // |M| dq against |M| = R |L| R^-1 assembled densely from the
        // quasilinear matrix eigenvalues.
        let v = vessel();
        let el = Model::BloodFlowElastic(v);
        let w = vec![5.5e-4, 4e-5, 5e-4, 5000.0, 1.0e6, 8.0e5];
        let m = el.quasilinear_matrix(&w).unwrap();
        let mat = Matrix2::new(m[0], m[1], m[2], m[3]);
        let eig = mat.complex_eigenvalues();
        let mut lam: Vec<f64> = eig.iter().map(|z| z.re).collect();
        lam.sort_by(f64::total_cmp);
        let r = Matrix2::new(1.0, 1.0, lam[0], lam[1]);
        let abs_m = r * Matrix2::new(lam[0].abs(), 0.0, 0.0, lam[1].abs()) * r.try_inverse().unwrap();
        let dq = Vector2::new(1e-5, -2e-6);
        let dense = abs_m * dq;
        let mut out = [0.0; 2];
        assert!(el.abs_quasilinear_apply(&w, dq.as_slice(), &mut out));
        for k in 0..2 {
            assert!((out[k] - dense[k]).abs() <= 1e-9 * dense.norm());
        }
    }
}
