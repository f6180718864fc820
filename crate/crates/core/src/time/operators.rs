//! Split operators for the model families: finite-volume explicit part
//! plus the matching implicit solve.

use super::banded::CyclicBanded;
use super::imex::SplitOperator;
use crate::error::{Error, Result};
use crate::mesh::{wrap_index, Boundary};
use crate::models::{Model, MAX_VARS};
use crate::spatial::SpatialOperator;

/// How the implicit stage equations are solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImplicitPolicy {
    /// No implicit terms.
    None,
    /// Cellwise linear solve for the relaxed variable.
    Relaxation,
    /// Depth-pressure coupling through a banded elliptic system.
    SweElliptic,
}

impl ImplicitPolicy {
    pub fn for_model(model: &Model) -> Self {
        match model {
            Model::JinXin { .. } | Model::BloodFlow(_) => ImplicitPolicy::Relaxation,
            Model::Swe { .. } => ImplicitPolicy::SweElliptic,
            _ => ImplicitPolicy::None,
        }
    }
}

/// Elliptic depth solve for the semi-implicit shallow-water split.
#[derive(Debug, Clone)]
pub struct SweElliptic {
    n: usize,
    boundary: Boundary,
    dx: f64,
    froude: f64,
    fourth_order: bool,
    sweeps: usize,
    mat: CyclicBanded,
    eta_star: Vec<f64>,
    m_star: Vec<f64>,
    /// face arrays for faces `-1 ..= n + 1` (index `j + 1` is face `j - 1/2`)
    m_face: Vec<f64>,
    h_face: Vec<f64>,
    flux: Vec<f64>,
}

impl SweElliptic {
    pub fn new(n: usize, boundary: Boundary, dx: f64, froude: f64, order: usize) -> Self {
        let fourth_order = order >= 3;
        SweElliptic {
            n,
            boundary,
            dx,
            froude,
            fourth_order,
            sweeps: order.max(1),
            mat: CyclicBanded::new(n, if fourth_order { 2 } else { 1 }),
            eta_star: vec![0.0; n],
            m_star: vec![0.0; n],
            m_face: vec![0.0; n + 3],
            h_face: vec![0.0; n + 3],
            flux: vec![0.0; n + 3],
        }
    }

    /// Index of cell `j` under zero-gradient (copy) or periodic ghosts.
    #[inline]
    fn cell(&self, j: isize) -> usize {
        wrap_index(j, self.n, self.boundary)
    }

    /// Mirror index: the depth gradient vanishes at a transmissive edge.
    #[inline]
    fn mirror(&self, j: isize) -> usize {
        let n = self.n as isize;
        match self.boundary {
            Boundary::Periodic => j.rem_euclid(n) as usize,
            Boundary::Transmissive => {
                let k = if j < 0 {
                    -j - 1
                } else if j >= n {
                    2 * n - 1 - j
                } else {
                    j
                };
                k.clamp(0, n - 1) as usize
            }
        }
    }

    /// Point value at face `j - 1/2` from cell averages.
    #[inline]
    fn interp(&self, v: &[f64], j: isize) -> f64 {
        if self.fourth_order {
            (-v[self.cell(j - 2)] + 7.0 * v[self.cell(j - 1)] + 7.0 * v[self.cell(j)]
                - v[self.cell(j + 1)])
                / 12.0
        } else {
            0.5 * (v[self.cell(j - 1)] + v[self.cell(j)])
        }
    }

    /// Stencil of the depth gradient at face `j - 1/2`: (cells, weights).
    #[inline]
    fn gradient_stencil(&self, j: isize) -> ([usize; 4], [f64; 4], usize) {
        let inv = 1.0 / self.dx;
        if self.fourth_order {
            let w = inv / 12.0;
            (
                [
                    self.mirror(j - 2),
                    self.mirror(j - 1),
                    self.mirror(j),
                    self.mirror(j + 1),
                ],
                [w, -15.0 * w, 15.0 * w, -w],
                4,
            )
        } else {
            ([self.mirror(j - 1), self.mirror(j), 0, 0], [-inv, inv, 0.0, 0.0], 2)
        }
    }

    fn gradient(&self, eta: &[f64], j: isize) -> f64 {
        let (idx, w, len) = self.gradient_stencil(j);
        (0..len).map(|k| w[k] * eta[idx[k]]).sum()
    }

    /// Solve the stage system for `y = (eta, hu)` in place.
    pub fn solve(&mut self, y: &mut [f64], dt_a: f64) -> Result<()> {
        let n = self.n;
        self.eta_star.copy_from_slice(&y[..n]);
        self.m_star.copy_from_slice(&y[n..2 * n]);
        let ni = n as isize;
        for j in -1..=(ni + 1) {
            self.m_face[(j + 1) as usize] = self.interp(&self.m_star, j);
        }
        let inv_dx = 1.0 / self.dx;
        let c = dt_a * dt_a / (self.froude * self.froude);
        let mut eta = self.eta_star.clone();
        for _ in 0..self.sweeps {
            // depth frozen at the latest iterate
            for j in -1..=(ni + 1) {
                self.h_face[(j + 1) as usize] = self.interp(&eta, j);
            }
            self.mat.clear();
            let mut rhs = vec![0.0; n];
            for i in 0..n {
                let ii = i as isize;
                rhs[i] = self.eta_star[i]
                    - dt_a * (self.m_face[i + 2] - self.m_face[i + 1]) * inv_dx;
                self.mat.add(i, i, 1.0);
                for (face, sign) in [(ii + 1, 1.0), (ii, -1.0)] {
                    let h = self.h_face[(face + 1) as usize];
                    let (idx, w, len) = self.gradient_stencil(face);
                    for k in 0..len {
                        self.mat.add(i, idx[k], -sign * c * inv_dx * h * w[k]);
                    }
                }
            }
            self.mat.solve(&mut rhs)?;
            eta = rhs;
        }
        // face pressure fluxes h dη/dx, then back-substitute momentum
        for j in -1..=(ni + 1) {
            let jj = (j + 1) as usize;
            self.flux[jj] = self.h_face[jj] * self.gradient(&eta, j);
        }
        let k = dt_a / (self.froude * self.froude);
        for i in 0..n {
            let q = |f: isize| self.flux[(f + 1) as usize];
            let ii = i as isize;
            let avg = if self.fourth_order {
                (-q(ii - 1) + 13.0 * q(ii) + 13.0 * q(ii + 1) - q(ii + 2)) / 24.0
            } else {
                0.5 * (q(ii) + q(ii + 1))
            };
            y[n + i] = self.m_star[i] - k * avg;
        }
        y[..n].copy_from_slice(&eta);
        Ok(())
    }
}

/// Finite-volume explicit residual plus the implicit policy of a model.
#[derive(Debug, Clone)]
pub struct ModelOperator {
    pub spatial: SpatialOperator,
    pub policy: ImplicitPolicy,
    boundary: Boundary,
    dx: f64,
    n: usize,
    tau: Vec<f64>,
    swe: Option<SweElliptic>,
}

impl ModelOperator {
    pub fn new(
        spatial: SpatialOperator,
        policy: ImplicitPolicy,
        boundary: Boundary,
        dx: f64,
        n: usize,
        tau: Vec<f64>,
        elliptic_order: usize,
    ) -> Result<Self> {
        let expected = ImplicitPolicy::for_model(&spatial.model);
        if policy != expected && policy != ImplicitPolicy::None {
            return Err(Error::Unsupported(format!(
                "{policy:?} policy for {} model",
                spatial.model.kind()
            )));
        }
        if tau.len() != n {
            return Err(Error::Dimension(format!("{} relaxation times for {n} cells", tau.len())));
        }
        let swe = match (&spatial.model, policy) {
            (Model::Swe { froude }, ImplicitPolicy::SweElliptic) => {
                Some(SweElliptic::new(n, boundary, dx, *froude, elliptic_order))
            }
            _ => None,
        };
        Ok(ModelOperator {
            spatial,
            policy,
            boundary,
            dx,
            n,
            tau,
            swe,
        })
    }

    fn relax(&self, y: &mut [f64], dt_a: f64) {
        let model = &self.spatial.model;
        let n = self.n;
        let ne = model.n_ext();
        let mut w = [0.0; MAX_VARS];
        for i in 0..n {
            for v in 0..ne {
                w[v] = y[v * n + i];
            }
            if let Some((r, eq)) = model.equilibrium_value(&w[..ne]) {
                let tau = self.tau[i];
                // tau (x - rhs) = -dt_a (x - eq), multiplied through
                y[r * n + i] = (tau * w[r] + dt_a * eq) / (tau + dt_a);
            }
        }
    }
}

impl SplitOperator for ModelOperator {
    fn n_evolved(&self) -> usize {
        self.spatial.model.n_cons() * self.n
    }

    fn explicit_rate(&mut self, y: &[f64], out: &mut [f64]) {
        let (b, dx) = (self.boundary, self.dx);
        self.spatial.residual(y, b, dx, out);
        if self.policy == ImplicitPolicy::None {
            // stiff terms of a relaxation model left explicit
            let model = &self.spatial.model;
            if model.has_relaxation() {
                let n = self.n;
                let ne = model.n_ext();
                let mut w = [0.0; MAX_VARS];
                let mut s = [0.0; MAX_VARS];
                for i in 0..n {
                    for v in 0..ne {
                        w[v] = y[v * n + i];
                    }
                    model.relaxation_source(&w[..ne], &mut s);
                    for v in 0..model.n_cons() {
                        out[v * n + i] -= s[v] / self.tau[i];
                    }
                }
            }
        }
    }

    fn implicit_solve(&mut self, y: &mut [f64], dt_a: f64) -> Result<()> {
        match self.policy {
            ImplicitPolicy::None => Ok(()),
            ImplicitPolicy::Relaxation => {
                self.relax(y, dt_a);
                Ok(())
            }
            ImplicitPolicy::SweElliptic => self
                .swe
                .as_mut()
                .expect("elliptic solver present for SWE")
                .solve(y, dt_a),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lake_at_rest_is_fixed() {
        for order in 1..=3 {
            for b in [Boundary::Transmissive, Boundary::Periodic] {
                let n = 16;
                let mut e = SweElliptic::new(n, b, 0.5, 0.1, order);
                let mut y = [vec![1.0; n], vec![0.0; n]].concat();
                e.solve(&mut y, 0.3).unwrap();
                for i in 0..n {
                    assert!((y[i] - 1.0).abs() < 1e-12);
                    assert!(y[n + i].abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn elliptic_conserves_mass_on_periodic_grid() {
        let n = 20;
        let mut e = SweElliptic::new(n, Boundary::Periodic, 0.1, 0.3, 3);
        let mut y: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.1 * (i as f64 * 0.3).sin())
            .chain((0..n).map(|i| 0.2 * (i as f64 * 0.5).cos()))
            .collect();
        let before: f64 = y[..n].iter().sum();
        e.solve(&mut y, 0.05).unwrap();
        let after: f64 = y[..n].iter().sum();
        assert!((before - after).abs() < 1e-12);
    }

    #[test]
    fn mirror_indices() {
        let e = SweElliptic::new(5, Boundary::Transmissive, 1.0, 1.0, 3);
        assert_eq!(e.mirror(-1), 0);
        assert_eq!(e.mirror(-2), 1);
        assert_eq!(e.mirror(5), 4);
        assert_eq!(e.mirror(6), 3);
    }
}
