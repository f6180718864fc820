//! Additive IMEX Runge-Kutta stage loop.
//!
//! Stage `k` solves
//! `Y_k = U + dt sum_{j<k} Ã_kj E_j + dt sum_{j<=k} A_kj K_j`,
//! where `E_j` are explicit rates and `K_j` implicit ones. The implicit
//! rate of a stage is recovered from its solve as
//! `K_k = (Y_k - rhs_k) / (dt A_kk)`, which stays finite when the stiff
//! scaling vanishes.

use super::tableau::ImexTableau;
use crate::error::{Error, Result};

/// A semi-discrete system `U' = E(U) + I(U)` acting on the leading
/// `n_evolved()` entries of the state vector. Any trailing entries are
/// coefficients carried along unchanged.
pub trait SplitOperator {
    fn n_evolved(&self) -> usize;

    /// `out = E(y)` for the evolved entries.
    fn explicit_rate(&mut self, y: &[f64], out: &mut [f64]);

    /// Replace the evolved part of `y` (holding the stage right-hand side
    /// on entry) with the solution of `y = rhs + dt_a I(y)`.
    fn implicit_solve(&mut self, y: &mut [f64], dt_a: f64) -> Result<()>;
}

/// Scratch storage reused across steps.
#[derive(Debug, Clone, Default)]
pub struct StageBuffers {
    e: Vec<Vec<f64>>,
    k: Vec<Vec<f64>>,
    y: Vec<f64>,
    rhs: Vec<f64>,
}

impl StageBuffers {
    fn prepare(&mut self, stages: usize, n_state: usize, n_evolved: usize) {
        self.e.resize_with(stages, Vec::new);
        self.k.resize_with(stages, Vec::new);
        for v in self.e.iter_mut().chain(self.k.iter_mut()) {
            v.resize(n_evolved, 0.0);
        }
        self.y.resize(n_state, 0.0);
        self.rhs.resize(n_evolved, 0.0);
    }
}

/// One IMEX step of size `dt` applied to `u` in place.
pub fn imex_step<O: SplitOperator + ?Sized>(
    tab: &ImexTableau,
    op: &mut O,
    u: &mut [f64],
    dt: f64,
    buf: &mut StageBuffers,
) -> Result<()> {
    let s = tab.stages();
    let m = op.n_evolved();
    buf.prepare(s, u.len(), m);
    let ex = &tab.explicit;
    let im = &tab.implicit;
    let explicit_only = tab.is_explicit();

    for k in 0..s {
        buf.y.copy_from_slice(u);
        for j in 0..k {
            let ae = dt * ex.a[k][j];
            let ai = dt * im.a[k][j];
            if ae != 0.0 {
                for (y, e) in buf.y[..m].iter_mut().zip(&buf.e[j]) {
                    *y += ae * e;
                }
            }
            if ai != 0.0 {
                for (y, kk) in buf.y[..m].iter_mut().zip(&buf.k[j]) {
                    *y += ai * kk;
                }
            }
        }
        let akk = im.a[k][k];
        if !explicit_only && akk != 0.0 {
            let dt_a = dt * akk;
            buf.rhs.copy_from_slice(&buf.y[..m]);
            op.implicit_solve(&mut buf.y, dt_a)?;
            for ((kk, y), r) in buf.k[k].iter_mut().zip(&buf.y[..m]).zip(&buf.rhs) {
                *kk = (y - r) / dt_a;
            }
        } else {
            buf.k[k].iter_mut().for_each(|v| *v = 0.0);
        }
        if !buf.y[..m].iter().all(|v| v.is_finite()) {
            return Err(Error::BlowUp {
                step: 0,
                detail: format!("non-finite value in stage {}", k + 1),
            });
        }
        let needed = ex.b[k] != 0.0 || (k + 1..s).any(|i| ex.a[i][k] != 0.0);
        if needed {
            let (y, e) = (&buf.y, &mut buf.e[k]);
            op.explicit_rate(y, e);
        }
    }

    for k in 0..s {
        let be = dt * ex.b[k];
        let bi = dt * im.b[k];
        if be != 0.0 {
            for (x, e) in u[..m].iter_mut().zip(&buf.e[k]) {
                *x += be * e;
            }
        }
        if !explicit_only && bi != 0.0 {
            for (x, kk) in u[..m].iter_mut().zip(&buf.k[k]) {
                *x += bi * kk;
            }
        }
    }
    if !u[..m].iter().all(|v| v.is_finite()) {
        return Err(Error::BlowUp {
            step: 0,
            detail: "non-finite value after update".into(),
        });
    }
    Ok(())
}

/// Adapter running a plain right-hand side through the stage loop.
struct ExplicitOnly<F> {
    n: usize,
    f: F,
}

impl<F: FnMut(&[f64], &mut [f64])> SplitOperator for ExplicitOnly<F> {
    fn n_evolved(&self) -> usize {
        self.n
    }
    fn explicit_rate(&mut self, y: &[f64], out: &mut [f64]) {
        (self.f)(y, out)
    }
    fn implicit_solve(&mut self, _y: &mut [f64], _dt_a: f64) -> Result<()> {
        Ok(())
    }
}

/// One step of the explicit Runge-Kutta scheme of order 1, 2 or 3 for
/// `u' = f(u)`.
pub fn explicit_rk_step<F>(order: usize, f: F, u: &mut [f64], dt: f64) -> Result<()>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let tab = ImexTableau::explicit_rk(order)?;
    let mut op = ExplicitOnly { n: u.len(), f };
    imex_step(&tab, &mut op, u, dt, &mut StageBuffers::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_leaves_state() {
        for order in 1..=3 {
            let mut u = vec![1.0, -2.0, 3.5];
            explicit_rk_step(order, |_, out| out.iter_mut().for_each(|v| *v = 0.0), &mut u, 0.3)
                .unwrap();
            assert_eq!(u, vec![1.0, -2.0, 3.5]);
        }
    }

    #[test]
    fn stability_polynomials() {
        let lam = -0.7;
        let dt = 0.4;
        let z: f64 = lam * dt;
        let expect = [1.0 + z, 1.0 + z + z * z / 2.0, 1.0 + z + z * z / 2.0 + z.powi(3) / 6.0];
        for order in 1..=3 {
            let mut u = vec![1.0];
            explicit_rk_step(order, |y, out| out[0] = lam * y[0], &mut u, dt).unwrap();
            assert!((u[0] - expect[order - 1]).abs() < 1e-15, "order {order}");
        }
    }

    /// `y' = -(y - g(t)) / eps + g'(t)` with `t` carried as a second,
    /// explicitly integrated component.
    struct Prothero {
        eps: f64,
    }

    fn g(t: f64) -> f64 {
        t.sin()
    }

    impl SplitOperator for Prothero {
        fn n_evolved(&self) -> usize {
            2
        }
        fn explicit_rate(&mut self, y: &[f64], out: &mut [f64]) {
            out[0] = y[1].cos();
            out[1] = 1.0;
        }
        fn implicit_solve(&mut self, y: &mut [f64], dt_a: f64) -> Result<()> {
            // y0 = rhs + dt_a * (-(y0 - g(t)) / eps) with t fixed in the stage
            let t = y[1];
            y[0] = (self.eps * y[0] + dt_a * g(t)) / (self.eps + dt_a);
            Ok(())
        }
    }

    fn pr_error(tab: &ImexTableau, eps: f64, n: usize) -> f64 {
        let dt = 1.0 / n as f64;
        let mut u = vec![g(0.0) + 0.0, 0.0];
        let mut op = Prothero { eps };
        let mut buf = StageBuffers::default();
        for _ in 0..n {
            imex_step(tab, &mut op, &mut u, dt, &mut buf).unwrap();
        }
        (u[0] - g(1.0)).abs()
    }

    #[test]
    fn prothero_robinson_orders() {
        let tab = ImexTableau::ars222();
        // nonstiff regime: clean second order
        let e1 = pr_error(&tab, 1.0, 40);
        let e2 = pr_error(&tab, 1.0, 80);
        let p = (e1 / e2).log2();
        assert!(p > 1.8, "nonstiff order {p}");
        // stiff regime: first order in dt, error bounded uniformly in eps
        let e = [40, 80, 160].map(|n| pr_error(&tab, 1e-4, n));
        for w in e.windows(2) {
            let p = (w[0] / w[1]).log2();
            assert!(p > 0.95, "stiff order {p}");
        }
        assert!(pr_error(&tab, 1e-8, 40) < 1e-8);
    }
}
