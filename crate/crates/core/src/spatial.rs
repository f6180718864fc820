//! Finite-volume semi-discretization: face reconstruction, numerical
//! fluxes and the explicit residual.

use crate::error::{Error, Result};
use crate::mesh::{Boundary, CellField, Ghosted, GHOST_WIDTH};
use crate::models::{Ext, Model, MAX_VARS};

/// WENO3 regularizer.
pub const WENO_EPS: f64 = 1e-6;

/// Three-point Gauss-Legendre rule on `[0, 1]`.
const GL_S: [f64; 3] = [
    0.112_701_665_379_258_31,
    0.5,
    0.887_298_334_620_741_7,
];
const GL_W: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reconstruction {
    /// Piecewise constant.
    Constant,
    /// Piecewise linear, minmod-limited slopes.
    Minmod,
    /// Two-substencil WENO.
    Weno3,
}

impl Reconstruction {
    pub fn from_order(order: usize) -> Result<Self> {
        match order {
            1 => Ok(Reconstruction::Constant),
            2 => Ok(Reconstruction::Minmod),
            3 => Ok(Reconstruction::Weno3),
            o => Err(Error::Parameter(format!("reconstruction order {o} not in 1..=3"))),
        }
    }

    pub fn order(&self) -> usize {
        match self {
            Reconstruction::Constant => 1,
            Reconstruction::Minmod => 2,
            Reconstruction::Weno3 => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluxKind {
    Godunov,
    Rusanov,
    Dot,
}

impl std::str::FromStr for FluxKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "godunov" => Ok(FluxKind::Godunov),
            "rusanov" => Ok(FluxKind::Rusanov),
            "dot" => Ok(FluxKind::Dot),
            o => Err(Error::Config(format!("unknown flux '{o}'"))),
        }
    }
}

impl FluxKind {
    /// Flux pairing used for each model family.
    pub fn default_for(model: &Model) -> Self {
        match model {
            Model::Burgers => FluxKind::Godunov,
            Model::JinXin { .. } | Model::Swe { .. } => FluxKind::Rusanov,
            Model::BloodFlow(_) | Model::BloodFlowElastic(_) => FluxKind::Dot,
        }
    }

    pub fn check_pairing(&self, model: &Model) -> Result<()> {
        let ok = match self {
            FluxKind::Godunov => matches!(model, Model::Burgers),
            FluxKind::Dot => model.has_nonconservative(),
            FluxKind::Rusanov => !model.has_nonconservative(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Unsupported(format!(
                "{self:?} flux with {} model",
                model.kind()
            )))
        }
    }
}

#[inline]
pub fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Face values `(left, right)` of the middle cell of `(um, u0, up)`.
#[inline]
pub fn reconstruct_faces(r: Reconstruction, um: f64, u0: f64, up: f64) -> (f64, f64) {
    match r {
        Reconstruction::Constant => (u0, u0),
        Reconstruction::Minmod => {
            let half = 0.5 * minmod(u0 - um, up - u0);
            (u0 - half, u0 + half)
        }
        Reconstruction::Weno3 => {
            let b_left = (u0 - um) * (u0 - um);
            let b_right = (up - u0) * (up - u0);
            // right face: upwind-biased substencil weight 1/3, centred 2/3
            let a0 = (1.0 / 3.0) / ((WENO_EPS + b_left) * (WENO_EPS + b_left));
            let a1 = (2.0 / 3.0) / ((WENO_EPS + b_right) * (WENO_EPS + b_right));
            let right = (a0 * (1.5 * u0 - 0.5 * um) + a1 * 0.5 * (u0 + up)) / (a0 + a1);
            // left face: mirror image
            let c0 = (1.0 / 3.0) / ((WENO_EPS + b_right) * (WENO_EPS + b_right));
            let c1 = (2.0 / 3.0) / ((WENO_EPS + b_left) * (WENO_EPS + b_left));
            let left = (c0 * (1.5 * u0 - 0.5 * up) + c1 * 0.5 * (u0 + um)) / (c0 + c1);
            (left, right)
        }
    }
}

/// Reconstructed states at the left and right faces of cell `i`.
pub fn reconstruct(ghosted: &Ghosted, r: Reconstruction, i: usize) -> (Vec<f64>, Vec<f64>) {
    let i = i as isize;
    (0..ghosted.n_vars)
        .map(|v| {
            reconstruct_faces(
                r,
                ghosted.at(v, i - 1),
                ghosted.at(v, i),
                ghosted.at(v, i + 1),
            )
        })
        .unzip()
}

/// Exact Riemann flux for `f(u) = u^2 / 2`.
#[inline]
pub fn godunov_flux(ul: f64, ur: f64) -> f64 {
    let a = ul.max(0.0);
    let b = ur.min(0.0);
    (0.5 * a * a).max(0.5 * b * b)
}

/// Local Lax-Friedrichs flux on the explicitly integrated part.
pub fn rusanov_flux(model: &Model, ql: &[f64], qr: &[f64], out: &mut [f64]) {
    let nc = model.n_cons();
    let s = model
        .explicit_wave_speed(ql)
        .max(model.explicit_wave_speed(qr));
    let mut fl = [0.0; MAX_VARS];
    let mut fr = [0.0; MAX_VARS];
    model.explicit_flux(ql, &mut fl);
    model.explicit_flux(qr, &mut fr);
    for k in 0..nc {
        out[k] = 0.5 * (fl[k] + fr[k]) - 0.5 * s * (qr[k] - ql[k]);
    }
}

/// Osher-type flux with the absolute quasilinear matrix integrated along
/// the straight segment between the states.
pub fn dot_flux(model: &Model, ql: &[f64], qr: &[f64], out: &mut [f64]) {
    let nc = model.n_cons();
    let mut fl = [0.0; MAX_VARS];
    let mut fr = [0.0; MAX_VARS];
    model.explicit_flux(ql, &mut fl);
    model.explicit_flux(qr, &mut fr);
    let mut diss = [0.0; MAX_VARS];
    let mut ll = [0.0; MAX_VARS];
    let mut lr = [0.0; MAX_VARS];
    match (model.lift_to_parent(ql, &mut ll), model.lift_to_parent(qr, &mut lr)) {
        (Some(parent), Some(_)) => {
            let ne = parent.n_ext();
            dot_dissipation(&parent, &ll[..ne], &lr[..ne], &mut diss);
        }
        _ => dot_dissipation(model, ql, qr, &mut diss),
    }
    for k in 0..nc {
        out[k] = 0.5 * (fl[k] + fr[k]) - 0.5 * diss[k];
    }
}

/// `int_0^1 |M(psi(s))| ds (qr - ql)` by Gauss-Legendre quadrature, with a
/// Rusanov fallback where the eigenbasis degenerates.
fn dot_dissipation(model: &Model, ql: &[f64], qr: &[f64], diss: &mut [f64]) {
    let nc = model.n_cons();
    let ne = model.n_ext();
    let mut dq = [0.0; MAX_VARS];
    for k in 0..nc {
        dq[k] = qr[k] - ql[k];
    }
    let mut psi = [0.0; MAX_VARS];
    let mut term = [0.0; MAX_VARS];
    for k in 0..nc {
        diss[k] = 0.0;
    }
    for (s, w) in GL_S.iter().zip(GL_W) {
        for k in 0..ne {
            psi[k] = ql[k] + s * (qr[k] - ql[k]);
        }
        if !model.abs_quasilinear_apply(&psi[..ne], &dq[..nc], &mut term) {
            let s = model.max_wave_speed(ql).max(model.max_wave_speed(qr));
            for k in 0..nc {
                diss[k] = s * dq[k];
            }
            return;
        }
        for k in 0..nc {
            diss[k] += w * term[k];
        }
    }
}

/// `int_0^1 B(psi(s)) ds (wr - wl)` along the straight segment.
fn nc_jump(model: &Model, wl: &[f64], wr: &[f64], out: &mut [f64]) {
    let mut ll = [0.0; MAX_VARS];
    let mut lr = [0.0; MAX_VARS];
    if let (Some(parent), Some(_)) = (model.lift_to_parent(wl, &mut ll), model.lift_to_parent(wr, &mut lr)) {
        let ne = parent.n_ext();
        return nc_jump(&parent, &ll[..ne], &lr[..ne], out);
    }
    let ne = model.n_ext();
    let nc = model.n_cons();
    let mut dw = [0.0; MAX_VARS];
    for k in 0..ne {
        dw[k] = wr[k] - wl[k];
    }
    let mut psi = [0.0; MAX_VARS];
    let mut term = [0.0; MAX_VARS];
    for k in 0..nc {
        out[k] = 0.0;
    }
    for (s, w) in GL_S.iter().zip(GL_W) {
        for k in 0..ne {
            psi[k] = wl[k] + s * dw[k];
        }
        model.nc_product(&psi[..ne], &dw[..ne], &mut term);
        for k in 0..nc {
            out[k] += w * term[k];
        }
    }
}

/// Value and (cell-scaled) slope at `xi` in `[-1/2, 1/2]` of the polynomial
/// with the given cell average and face values: a parabola for WENO, the
/// linear profile otherwise.
fn cell_polynomial(r: Reconstruction, mean: f64, wl: f64, wr: f64, xi: f64) -> (f64, f64) {
    let slope = wr - wl;
    match r {
        Reconstruction::Weno3 => {
            let curv = 3.0 * (wr + wl - 2.0 * mean);
            (mean + slope * xi + curv * (xi * xi - 1.0 / 12.0), slope + 2.0 * curv * xi)
        }
        Reconstruction::Minmod => (mean + slope * xi, slope),
        Reconstruction::Constant => (mean, 0.0),
    }
}

/// Cell averages of a nonlinear function of the state, integrated over the
/// reconstruction polynomials. For functions of conserved variables alone
/// this is the plain cell average; otherwise `f(mean)` would only be
/// second-order accurate.
pub fn cell_averages<F>(field: &CellField, r: Reconstruction, f: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let nv = field.n_vars;
    let g = field.fill_ghosts(GHOST_WIDTH)?;
    let mut mean = [0.0; MAX_VARS];
    let mut w = [0.0; MAX_VARS];
    (0..field.n_cells())
        .map(|i| {
            field.state(i, &mut mean);
            if r == Reconstruction::Constant {
                return f(&mean[..nv]);
            }
            let (wl, wr) = reconstruct(&g, r, i);
            let mut acc = 0.0;
            for (s, gw) in GL_S.iter().zip(GL_W) {
                for k in 0..nv {
                    w[k] = cell_polynomial(r, mean[k], wl[k], wr[k], s - 0.5).0;
                }
                acc += gw * f(&w[..nv])?;
            }
            Ok(acc)
        })
        .collect()
}

/// `int_cell B(w) w_x dx` using the reconstruction polynomial through the
/// cell average and face values.
fn nc_interior(
    model: &Model,
    r: Reconstruction,
    mean: &[f64],
    wl: &[f64],
    wr: &[f64],
    out: &mut [f64],
) {
    let ne = model.n_ext();
    let nc = model.n_cons();
    for k in 0..nc {
        out[k] = 0.0;
    }
    if r == Reconstruction::Constant {
        return;
    }
    let mut p = [0.0; MAX_VARS];
    let mut dp = [0.0; MAX_VARS];
    let mut term = [0.0; MAX_VARS];
    for (s, w) in GL_S.iter().zip(GL_W) {
        for k in 0..ne {
            (p[k], dp[k]) = cell_polynomial(r, mean[k], wl[k], wr[k], s - 0.5);
        }
        model.nc_product(&p[..ne], &dp[..ne], &mut term);
        for k in 0..nc {
            out[k] += w * term[k];
        }
    }
}

/// Reusable buffers for residual evaluation on one grid.
#[derive(Debug, Clone)]
pub struct SpatialOperator {
    pub model: Model,
    pub recon: Reconstruction,
    pub flux: FluxKind,
    n_cells: usize,
    ghost: Ghosted,
    /// face values of cells `-1..=n`, variable-major with stride `n + 2`
    left: Vec<f64>,
    right: Vec<f64>,
}

impl SpatialOperator {
    pub fn new(model: Model, recon: Reconstruction, flux: FluxKind, n_cells: usize) -> Result<Self> {
        flux.check_pairing(&model)?;
        let ne = model.n_ext();
        Ok(SpatialOperator {
            ghost: Ghosted::new(ne, n_cells, GHOST_WIDTH),
            left: vec![0.0; ne * (n_cells + 2)],
            right: vec![0.0; ne * (n_cells + 2)],
            n_cells,
            model,
            recon,
            flux,
        })
    }

    #[inline]
    fn face_state(&self, buf: &[f64], cell: isize, out: &mut Ext) {
        let stride = self.n_cells + 2;
        let j = (cell + 1) as usize;
        for v in 0..self.model.n_ext() {
            out[v] = buf[v * stride + j];
        }
    }

    fn interface_flux(&self, ql: &[f64], qr: &[f64], out: &mut [f64]) {
        match self.flux {
            FluxKind::Godunov => out[0] = godunov_flux(ql[0], qr[0]),
            FluxKind::Rusanov => rusanov_flux(&self.model, ql, qr, out),
            FluxKind::Dot => dot_flux(&self.model, ql, qr, out),
        }
    }

    /// `dU/dt` of the explicit part for the conserved rows, written to
    /// `out` (variable-major, `n_cons * n_cells`).
    pub fn residual(&mut self, values: &[f64], boundary: Boundary, dx: f64, out: &mut [f64]) {
        let n = self.n_cells;
        let ne = self.model.n_ext();
        let nc = self.model.n_cons();
        let stride = n + 2;
        self.ghost.load_slices(values, boundary);
        for v in 0..ne {
            for c in -1..=(n as isize) {
                let (l, r) = reconstruct_faces(
                    self.recon,
                    self.ghost.at(v, c - 1),
                    self.ghost.at(v, c),
                    self.ghost.at(v, c + 1),
                );
                let j = (c + 1) as usize;
                self.left[v * stride + j] = l;
                self.right[v * stride + j] = r;
            }
        }

        let nc_terms = self.model.has_nonconservative();
        let mut ql: Ext = [0.0; MAX_VARS];
        let mut qr: Ext = [0.0; MAX_VARS];
        let mut f_prev = [0.0; MAX_VARS];
        let mut f_next = [0.0; MAX_VARS];
        let mut j_prev = [0.0; MAX_VARS];
        let mut j_next = [0.0; MAX_VARS];
        let mut interior = [0.0; MAX_VARS];
        let mut mean = [0.0; MAX_VARS];

        // interface at the left edge of cell 0
        self.face_state(&self.right, -1, &mut ql);
        self.face_state(&self.left, 0, &mut qr);
        self.interface_flux(&ql[..ne], &qr[..ne], &mut f_prev);
        if nc_terms {
            nc_jump(&self.model, &ql[..ne], &qr[..ne], &mut j_prev);
        }
        let inv_dx = 1.0 / dx;
        for i in 0..n {
            let ii = i as isize;
            self.face_state(&self.right, ii, &mut ql);
            self.face_state(&self.left, ii + 1, &mut qr);
            self.interface_flux(&ql[..ne], &qr[..ne], &mut f_next);
            if nc_terms {
                nc_jump(&self.model, &ql[..ne], &qr[..ne], &mut j_next);
                let mut wl: Ext = [0.0; MAX_VARS];
                self.face_state(&self.left, ii, &mut wl);
                for v in 0..ne {
                    mean[v] = values[v * n + i];
                }
                nc_interior(&self.model, self.recon, &mean[..ne], &wl[..ne], &ql[..ne], &mut interior);
            }
            for k in 0..nc {
                let mut r = -(f_next[k] - f_prev[k]) * inv_dx;
                if nc_terms {
                    r -= (interior[k] + 0.5 * (j_next[k] + j_prev[k])) * inv_dx;
                }
                out[k * n + i] = r;
            }
            f_prev = f_next;
            j_prev = j_next;
        }
    }
}

/// Explicit residual of a field, returned as a field of the conserved
/// variables.
pub fn explicit_residual(
    model: &Model,
    field: &CellField,
    recon: Reconstruction,
    flux: FluxKind,
) -> Result<CellField> {
    if field.n_vars != model.n_ext() {
        return Err(Error::Dimension(format!(
            "field has {} vars, model needs {}",
            field.n_vars,
            model.n_ext()
        )));
    }
    let mut op = SpatialOperator::new(model.clone(), recon, flux, field.n_cells())?;
    let mut out = vec![0.0; model.n_cons() * field.n_cells()];
    op.residual(field.values(), field.boundary, field.grid.dx(), &mut out);
    CellField::from_values(field.grid, model.n_cons(), field.boundary, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Grid1D;

    #[test]
    fn minmod_examples() {
        assert_eq!(reconstruct_faces(Reconstruction::Minmod, 1.0, 2.0, 3.0), (1.5, 2.5));
        assert_eq!(reconstruct_faces(Reconstruction::Minmod, 1.0, 2.0, 1.0), (2.0, 2.0));
        assert_eq!(reconstruct_faces(Reconstruction::Constant, 1.0, 2.0, 7.0), (2.0, 2.0));
    }

    #[test]
    fn weno3_reproduces_linears() {
        let (l, r) = reconstruct_faces(Reconstruction::Weno3, 0.3, 0.5, 0.7);
        assert!((l - 0.4).abs() < 1e-15);
        assert!((r - 0.6).abs() < 1e-15);
    }

    #[test]
    fn weno3_small_amplitude_is_third_order_exact_on_parabola() {
        // averages of s*x^2 over unit cells centred at -1, 0, 1; the right
        // face value is s/4 once the weights are linear
        let s = 1e-6;
        let avg = |c: f64| s * (c * c + 1.0 / 12.0);
        let (l, r) = reconstruct_faces(Reconstruction::Weno3, avg(-1.0), avg(0.0), avg(1.0));
        assert!((r - 0.25 * s).abs() < 1e-15);
        assert!((l - 0.25 * s).abs() < 1e-15);
    }

    #[test]
    fn cell_averages_of_the_state_are_the_means() {
        let grid = Grid1D::new(0.0, 1.0, 16).unwrap();
        let values: Vec<f64> = (0..16).map(|i| (0.4 * i as f64).sin()).collect();
        let field = CellField::from_values(grid, 1, Boundary::Periodic, values.clone()).unwrap();
        for r in [Reconstruction::Constant, Reconstruction::Minmod, Reconstruction::Weno3] {
            let avg = cell_averages(&field, r, |w| Ok(w[0])).unwrap();
            for (a, v) in avg.iter().zip(&values) {
                assert!((a - v).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn cell_averages_integrate_squares_of_linear_data() {
        // u = x on cells of width 1: the average of u^2 is c^2 + 1/12
        let grid = Grid1D::new(0.0, 8.0, 8).unwrap();
        let values: Vec<f64> = (0..8).map(|i| i as f64 + 0.5).collect();
        let field = CellField::from_values(grid, 1, Boundary::Transmissive, values.clone()).unwrap();
        let avg = cell_averages(&field, Reconstruction::Weno3, |w| Ok(w[0] * w[0])).unwrap();
        for i in 1..7 {
            assert!((avg[i] - (values[i] * values[i] + 1.0 / 12.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn godunov_examples() {
        assert_eq!(godunov_flux(1.0, 0.0), 0.5);
        assert_eq!(godunov_flux(-1.0, 1.0), 0.0);
        assert_eq!(godunov_flux(1.5, 1.5), 1.125);
        assert_eq!(godunov_flux(-2.0, -2.0), 2.0);
    }

    #[test]
    fn rusanov_jinxin_example() {
        let m = Model::JinXin { a: 2.0, eps: 1.0 };
        let mut out = [0.0; 2];
        rusanov_flux(&m, &[0.0, 0.0], &[1.0, 0.0], &mut out);
        assert_eq!(out, [-1.0, 2.0]);
    }

    #[test]
    fn rusanov_lake_at_rest() {
        let m = Model::Swe { froude: 0.1 };
        let mut out = [0.0; 2];
        rusanov_flux(&m, &[1.0, 0.0], &[1.0, 0.0], &mut out);
        assert_eq!(out, [0.0, 0.0]);
    }

    #[test]
    fn constant_field_has_zero_residual() {
        let grid = Grid1D::new(0.0, 1.0, 8).unwrap();
        let field =
            CellField::from_values(grid, 2, Boundary::Periodic, [vec![1.3; 8], vec![0.4; 8]].concat())
                .unwrap();
        let m = Model::JinXin { a: 2.0, eps: 1.0 };
        for r in [Reconstruction::Constant, Reconstruction::Minmod, Reconstruction::Weno3] {
            let res = explicit_residual(&m, &field, r, FluxKind::Rusanov).unwrap();
            assert!(res.values().iter().all(|v| v.abs() < 1e-14));
        }
    }

    #[test]
    fn godunov_paired_only_with_burgers() {
        let m = Model::Swe { froude: 1.0 };
        assert!(SpatialOperator::new(m, Reconstruction::Constant, FluxKind::Godunov, 8).is_err());
    }
}
