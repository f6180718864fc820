//! Uniform 1D grids, cell-averaged fields and ghost-cell handling.

use crate::error::{Error, Result};

/// Ghost layers available to every stencil (WENO3 needs two).
pub const GHOST_WIDTH: usize = 2;

const MIN_CELLS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub n_cells: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_cells: usize) -> Result<Self> {
        if n_cells < MIN_CELLS {
            return Err(Error::Grid(format!(
                "n_cells = {n_cells}, need at least {MIN_CELLS}"
            )));
        }
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(Error::Grid(format!("bad extent [{x_min}, {x_max}]")));
        }
        Ok(Self {
            x_min,
            x_max,
            n_cells,
        })
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_cells as f64
    }

    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.center(i)).collect()
    }

    /// Same extent, twice the cells.
    pub fn refine(&self) -> Self {
        Self {
            n_cells: self.n_cells * 2,
            ..*self
        }
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    /// Zero-gradient extrapolation.
    Transmissive,
}

impl std::str::FromStr for Boundary {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "periodic" => Ok(Boundary::Periodic),
            "transmissive" | "outflow" => Ok(Boundary::Transmissive),
            other => Err(Error::Config(format!("unknown boundary '{other}'"))),
        }
    }
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Boundary::Periodic => "periodic",
            Boundary::Transmissive => "transmissive",
        })
    }
}

/// Ghost-cell index for position `j` (may be negative or past the end).
#[inline]
pub fn wrap_index(j: isize, n: usize, boundary: Boundary) -> usize {
    let n_i = n as isize;
    match boundary {
        Boundary::Periodic => j.rem_euclid(n_i) as usize,
        Boundary::Transmissive => j.clamp(0, n_i - 1) as usize,
    }
}

/// Cell averages of `n_vars` quantities, stored variable-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    pub grid: Grid1D,
    pub n_vars: usize,
    pub boundary: Boundary,
    values: Vec<f64>,
}

impl CellField {
    pub fn zeros(grid: Grid1D, n_vars: usize, boundary: Boundary) -> Self {
        Self {
            grid,
            n_vars,
            boundary,
            values: vec![0.0; n_vars * grid.n_cells],
        }
    }

    pub fn from_values(
        grid: Grid1D,
        n_vars: usize,
        boundary: Boundary,
        values: Vec<f64>,
    ) -> Result<Self> {
        if values.len() != n_vars * grid.n_cells {
            return Err(Error::Dimension(format!(
                "{} values for {} vars x {} cells",
                values.len(),
                n_vars,
                grid.n_cells
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::BlowUp {
                step: 0,
                detail: format!("non-finite value at flat index {k}"),
            });
        }
        Ok(Self {
            grid,
            n_vars,
            boundary,
            values,
        })
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.grid.n_cells
    }

    #[inline]
    pub fn get(&self, var: usize, i: usize) -> f64 {
        self.values[var * self.grid.n_cells + i]
    }

    #[inline]
    pub fn set(&mut self, var: usize, i: usize, v: f64) {
        let n = self.grid.n_cells;
        self.values[var * n + i] = v;
    }

    pub fn var(&self, var: usize) -> &[f64] {
        let n = self.grid.n_cells;
        &self.values[var * n..(var + 1) * n]
    }

    pub fn var_mut(&mut self, var: usize) -> &mut [f64] {
        let n = self.grid.n_cells;
        &mut self.values[var * n..(var + 1) * n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Gather the state vector of cell `i` into `out[..n_vars]`.
    #[inline]
    pub fn state(&self, i: usize, out: &mut [f64]) {
        let n = self.grid.n_cells;
        for (v, o) in out.iter_mut().take(self.n_vars).enumerate() {
            *o = self.values[v * n + i];
        }
    }

    /// Copy of the field extended by `width` ghost cells on each side.
    pub fn fill_ghosts(&self, width: usize) -> Result<Ghosted> {
        if width > GHOST_WIDTH {
            return Err(Error::StencilUnsupported(width));
        }
        let mut g = Ghosted::new(self.n_vars, self.grid.n_cells, width);
        g.load(self);
        Ok(g)
    }

    /// `dx * sum |a - b|` of one variable.
    pub fn l1_distance(&self, other: &CellField, var: usize) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(l1_norm_slices(self.var(var), other.var(var), self.grid.dx()))
    }

    /// Per-variable L1 distances.
    pub fn l1_norm(&self, other: &CellField) -> Result<Vec<f64>> {
        self.check_compatible(other)?;
        Ok((0..self.n_vars)
            .map(|v| l1_norm_slices(self.var(v), other.var(v), self.grid.dx()))
            .collect())
    }

    /// `dx * sum |a|` of one variable.
    pub fn l1_magnitude(&self, var: usize) -> f64 {
        self.grid.dx() * self.var(var).iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Discrete integral `dx * sum a_i` of one variable.
    pub fn total(&self, var: usize) -> f64 {
        self.grid.dx() * self.var(var).iter().sum::<f64>()
    }

    fn check_compatible(&self, other: &CellField) -> Result<()> {
        if self.grid != other.grid || self.n_vars != other.n_vars {
            return Err(Error::Dimension(format!(
                "fields on {:?}/{} vs {:?}/{}",
                self.grid, self.n_vars, other.grid, other.n_vars
            )));
        }
        Ok(())
    }
}

/// Discrete L1 norm of the difference of two cell arrays.
pub fn l1_norm_slices(a: &[f64], b: &[f64], dx: f64) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    dx * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Ghost-extended scratch copy of a field.
#[derive(Debug, Clone)]
pub struct Ghosted {
    pub n_vars: usize,
    pub n_cells: usize,
    pub width: usize,
    data: Vec<f64>,
}

impl Ghosted {
    pub fn new(n_vars: usize, n_cells: usize, width: usize) -> Self {
        Self {
            n_vars,
            n_cells,
            width,
            data: vec![0.0; n_vars * (n_cells + 2 * width)],
        }
    }

    #[inline]
    fn stride(&self) -> usize {
        self.n_cells + 2 * self.width
    }

    /// Refill from `field` without reallocating.
    pub fn load(&mut self, field: &CellField) {
        self.load_slices(field.values(), field.boundary);
    }

    /// Refill from a variable-major value slice.
    pub fn load_slices(&mut self, values: &[f64], boundary: Boundary) {
        let n = self.n_cells;
        let w = self.width as isize;
        let stride = self.stride();
        for v in 0..self.n_vars {
            let src = &values[v * n..(v + 1) * n];
            let dst = &mut self.data[v * stride..(v + 1) * stride];
            dst[self.width..self.width + n].copy_from_slice(src);
            for k in 1..=w {
                dst[(w - k) as usize] = src[wrap_index(-k, n, boundary)];
                dst[(w + n as isize - 1 + k) as usize] =
                    src[wrap_index(n as isize - 1 + k, n, boundary)];
            }
        }
    }

    /// Value of `var` at cell `i`, where `-width <= i < n_cells + width`.
    #[inline]
    pub fn at(&self, var: usize, i: isize) -> f64 {
        self.data[var * self.stride() + (i + self.width as isize) as usize]
    }

    pub fn left_ghosts(&self, var: usize) -> &[f64] {
        let s = var * self.stride();
        &self.data[s..s + self.width]
    }

    pub fn right_ghosts(&self, var: usize) -> &[f64] {
        let s = var * self.stride() + self.width + self.n_cells;
        &self.data[s..s + self.width]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(vals: &[f64], boundary: Boundary) -> CellField {
        let grid = Grid1D::new(0.0, 1.0, vals.len()).unwrap();
        CellField::from_values(grid, 1, boundary, vals.to_vec()).unwrap()
    }

    #[test]
    fn periodic_ghosts_wrap() {
        let f = field(&[1.0, 2.0, 3.0, 4.0], Boundary::Periodic);
        let g = f.fill_ghosts(1).unwrap();
        assert_eq!(g.left_ghosts(0), &[4.0]);
        assert_eq!(g.right_ghosts(0), &[1.0]);
        let g2 = f.fill_ghosts(2).unwrap();
        assert_eq!(g2.left_ghosts(0), &[3.0, 4.0]);
        assert_eq!(g2.right_ghosts(0), &[1.0, 2.0]);
    }

    #[test]
    fn transmissive_ghosts_copy_edge() {
        let f = field(&[1.0, 2.0, 3.0, 4.0], Boundary::Transmissive);
        let g = f.fill_ghosts(2).unwrap();
        assert_eq!(g.left_ghosts(0), &[1.0, 1.0]);
        assert_eq!(g.right_ghosts(0), &[4.0, 4.0]);
    }

    #[test]
    fn ghost_width_three_rejected() {
        let f = field(&[1.0, 2.0, 3.0, 4.0], Boundary::Periodic);
        assert!(matches!(
            f.fill_ghosts(3),
            Err(Error::StencilUnsupported(3))
        ));
    }

    #[test]
    fn ghost_fill_leaves_interior_alone() {
        let f = field(&[1.0, -2.0, 3.5, 4.0, 0.25], Boundary::Transmissive);
        let g = f.fill_ghosts(2).unwrap();
        for i in 0..5 {
            assert_eq!(g.at(0, i as isize), f.get(0, i));
        }
    }

    #[test]
    fn l1_examples() {
        let a = field(&[1.0, 3.0, 0.0, 0.0], Boundary::Periodic);
        assert_eq!(a.l1_distance(&a, 0).unwrap(), 0.0);

        let ones = field(&[1.0; 8], Boundary::Periodic);
        let zeros = field(&[0.0; 8], Boundary::Periodic);
        assert!((ones.l1_distance(&zeros, 0).unwrap() - 1.0).abs() < 1e-15);

        // two cells on [0,1]: 0.5 * (|1-0| + |3-1|)
        assert_eq!(l1_norm_slices(&[1.0, 3.0], &[0.0, 1.0], 0.5), 1.5);
    }

    #[test]
    fn l1_rejects_mismatched_grids() {
        let a = field(&[1.0; 4], Boundary::Periodic);
        let b = field(&[1.0; 8], Boundary::Periodic);
        assert!(matches!(a.l1_distance(&b, 0), Err(Error::Dimension(_))));
    }

    #[test]
    fn grid_rules() {
        assert!(Grid1D::new(0.0, 1.0, 3).is_err());
        assert!(Grid1D::new(1.0, 1.0, 10).is_err());
        let g = Grid1D::new(-5.0, 5.0, 200).unwrap();
        assert_eq!(g.refine().dx(), g.dx() / 2.0);
        let c = g.centers();
        assert!(c.windows(2).all(|w| w[1] > w[0]));
        assert!((c[0] - (-5.0 + 0.025)).abs() < 1e-14);
    }
}
