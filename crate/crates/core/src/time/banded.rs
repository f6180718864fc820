//! Banded direct solvers: LU without pivoting, and a cyclic variant that
//! folds the wrap-around corners in with a low-rank correction.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

const PIVOT_TINY: f64 = 1e-300;

/// Square matrix with `p` sub- and super-diagonals.
#[derive(Debug, Clone)]
pub struct Banded {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl Banded {
    pub fn new(n: usize, p: usize) -> Self {
        Banded {
            n,
            p,
            data: vec![0.0; n * (2 * p + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> usize {
        self.p
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (2 * self.p + 1) + (j + self.p - i)
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i.abs_diff(j) <= self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.idx(i, j)]
        } else {
            0.0
        }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(self.in_band(i, j));
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    /// `y = A x`.
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.p);
                let hi = (i + self.p).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// In-place LU factorization (Doolittle, no pivoting).
    pub fn factor(&mut self) -> Result<()> {
        let (n, p) = (self.n, self.p);
        for k in 0..n {
            let piv = self.data[self.idx(k, k)];
            if !(piv.abs() > PIVOT_TINY) || !piv.is_finite() {
                return Err(Error::Singular(k));
            }
            for i in (k + 1)..(k + p + 1).min(n) {
                let li = self.idx(i, k);
                let l = self.data[li] / piv;
                self.data[li] = l;
                for j in (k + 1)..(k + p + 1).min(n) {
                    let kj = self.data[self.idx(k, j)];
                    let ij = self.idx(i, j);
                    self.data[ij] -= l * kj;
                }
            }
        }
        Ok(())
    }

    /// Solve with a matrix already passed through [`Banded::factor`].
    pub fn solve_factored(&self, b: &mut [f64]) {
        let (n, p) = (self.n, self.p);
        for i in 0..n {
            let lo = i.saturating_sub(p);
            let mut acc = b[i];
            for j in lo..i {
                acc -= self.data[self.idx(i, j)] * b[j];
            }
            b[i] = acc;
        }
        for i in (0..n).rev() {
            let hi = (i + p).min(n - 1);
            let mut acc = b[i];
            for j in (i + 1)..=hi {
                acc -= self.data[self.idx(i, j)] * b[j];
            }
            b[i] = acc / self.data[self.idx(i, i)];
        }
    }

    /// Factor and solve `A x = b` in place of `b`.
    pub fn solve(mut self, b: &mut [f64]) -> Result<()> {
        self.factor()?;
        self.solve_factored(b);
        Ok(())
    }
}

/// Banded matrix plus wrap-around entries coupling the first and last
/// `p` rows, as produced by periodic stencils.
#[derive(Debug, Clone)]
pub struct CyclicBanded {
    pub band: Banded,
    /// `(row, col, value)` entries outside the band.
    corners: Vec<(usize, usize, f64)>,
}

impl CyclicBanded {
    pub fn new(n: usize, p: usize) -> Self {
        CyclicBanded {
            band: Banded::new(n, p),
            corners: Vec::new(),
        }
    }

    /// Add `v` at `(i, j)` where the column offset is taken cyclically.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if self.band.in_band(i, j) {
            self.band.add(i, j, v);
        } else if let Some(e) = self.corners.iter_mut().find(|e| e.0 == i && e.1 == j) {
            e.2 += v;
        } else {
            self.corners.push((i, j, v));
        }
    }

    pub fn clear(&mut self) {
        self.band.clear();
        self.corners.clear();
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.band.mul(x);
        for &(i, j, v) in &self.corners {
            y[i] += v * x[j];
        }
        y
    }

    /// Solve `(B + U V^T) x = b` with the Woodbury identity, `U` selecting
    /// the rows that carry corner entries.
    pub fn solve(&self, b: &mut [f64]) -> Result<()> {
        let n = self.band.n();
        let mut lu = self.band.clone();
        lu.factor()?;
        let mut rows: Vec<usize> = self.corners.iter().map(|e| e.0).collect();
        rows.sort_unstable();
        rows.dedup();
        if rows.is_empty() {
            lu.solve_factored(b);
            return Ok(());
        }
        let r = rows.len();
        // Z = B^{-1} U
        let mut z = vec![vec![0.0; n]; r];
        for (k, &row) in rows.iter().enumerate() {
            z[k][row] = 1.0;
            lu.solve_factored(&mut z[k]);
        }
        lu.solve_factored(b);
        // V^T y for a vector y: row k picks the corner entries of rows[k]
        let vt = |y: &[f64], k: usize| -> f64 {
            self.corners
                .iter()
                .filter(|e| e.0 == rows[k])
                .map(|e| e.2 * y[e.1])
                .sum()
        };
        let mut cap = DMatrix::<f64>::identity(r, r);
        for k in 0..r {
            for (m, zm) in z.iter().enumerate() {
                cap[(k, m)] += vt(zm, k);
            }
        }
        let rhs = DVector::from_iterator(r, (0..r).map(|k| vt(b, k)));
        let w = cap
            .lu()
            .solve(&rhs)
            .ok_or(Error::Singular(rows[0]))?;
        for (m, zm) in z.iter().enumerate() {
            for i in 0..n {
                b[i] -= zm[i] * w[m];
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn tridiagonal_solve() {
        let n = 9;
        let mut m = Banded::new(n, 1);
        for i in 0..n {
            m.add(i, i, 4.0);
            if i > 0 {
                m.add(i, i - 1, -1.0);
            }
            if i + 1 < n {
                m.add(i, i + 1, -1.5);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut b = m.mul(&x);
        m.solve(&mut b).unwrap();
        assert!(residual(&b, &x) < 1e-14);
    }

    #[test]
    fn cyclic_pentadiagonal_solve() {
        let n = 12;
        let mut m = CyclicBanded::new(n, 2);
        for i in 0..n {
            let w = |k: isize| ((i as isize + k).rem_euclid(n as isize)) as usize;
            m.add(i, i, 3.0);
            m.add(i, w(-1), -0.8);
            m.add(i, w(1), -0.7);
            m.add(i, w(-2), 0.05);
            m.add(i, w(2), 0.06);
        }
        let x: Vec<f64> = (0..n).map(|i| 1.0 + (0.7 * i as f64).cos()).collect();
        let mut b = m.mul(&x);
        m.solve(&mut b).unwrap();
        assert!(residual(&b, &x) < 1e-13);
    }

    #[test]
    fn zero_pivot_reports_row() {
        let mut m = Banded::new(3, 1);
        m.add(0, 0, 1.0);
        m.add(1, 1, 0.0);
        m.add(2, 2, 1.0);
        assert!(matches!(m.solve(&mut [1.0, 1.0, 1.0]), Err(Error::Singular(1))));
    }
}
