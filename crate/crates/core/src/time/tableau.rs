//! Butcher tableaux for explicit and IMEX Runge-Kutta schemes, with a
//! numerical verifier for order conditions and stiff decay.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Butcher {
    /// Row-major `s x s` coefficient matrix.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl Butcher {
    pub fn stages(&self) -> usize {
        self.b.len()
    }

    fn zeros(s: usize) -> Self {
        Butcher {
            a: vec![vec![0.0; s]; s],
            b: vec![0.0; s],
            c: vec![0.0; s],
        }
    }

    fn is_zero(&self) -> bool {
        self.a.iter().flatten().all(|v| *v == 0.0) && self.b.iter().all(|v| *v == 0.0)
    }

    fn mat_vec(&self, v: &[f64]) -> Vec<f64> {
        self.a
            .iter()
            .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Explicit tableau (`Ã`, `b̃`, `c̃`) paired with a diagonally implicit
/// one (`A`, `b`, `c`) sharing the stage count.
#[derive(Debug, Clone, PartialEq)]
pub struct ImexTableau {
    pub name: String,
    pub explicit: Butcher,
    pub implicit: Butcher,
    pub order: usize,
}

/// One order-condition residual.
#[derive(Debug, Clone)]
pub struct Condition {
    pub label: String,
    pub residual: f64,
}

impl ImexTableau {
    pub fn stages(&self) -> usize {
        self.explicit.stages()
    }

    /// Whether the implicit part vanishes (plain explicit Runge-Kutta).
    pub fn is_explicit(&self) -> bool {
        self.implicit.is_zero()
    }

    fn explicit_only(name: &str, order: usize, a: Vec<Vec<f64>>, b: Vec<f64>, c: Vec<f64>) -> Self {
        let s = b.len();
        ImexTableau {
            name: name.into(),
            explicit: Butcher { a, b, c },
            implicit: Butcher::zeros(s),
            order,
        }
    }

    pub fn forward_euler() -> Self {
        Self::explicit_only("FE", 1, vec![vec![0.0]], vec![1.0], vec![0.0])
    }

    pub fn heun2() -> Self {
        Self::explicit_only(
            "Heun2",
            2,
            vec![vec![0.0, 0.0], vec![1.0, 0.0]],
            vec![0.5, 0.5],
            vec![0.0, 1.0],
        )
    }

    pub fn heun3() -> Self {
        Self::explicit_only(
            "Heun3",
            3,
            vec![
                vec![0.0, 0.0, 0.0],
                vec![1.0 / 3.0, 0.0, 0.0],
                vec![0.0, 2.0 / 3.0, 0.0],
            ],
            vec![0.25, 0.0, 0.75],
            vec![0.0, 1.0 / 3.0, 2.0 / 3.0],
        )
    }

    /// Explicit Runge-Kutta scheme of the given order.
    pub fn explicit_rk(order: usize) -> Result<Self> {
        match order {
            1 => Ok(Self::forward_euler()),
            2 => Ok(Self::heun2()),
            3 => Ok(Self::heun3()),
            o => Err(Error::Parameter(format!("explicit RK order {o} not in 1..=3"))),
        }
    }

    /// Implicit-explicit Euler in ARS form.
    pub fn ars111() -> Self {
        ImexTableau {
            name: "ARS(1,1,1)".into(),
            explicit: Butcher {
                a: vec![vec![0.0, 0.0], vec![1.0, 0.0]],
                b: vec![1.0, 0.0],
                c: vec![0.0, 1.0],
            },
            implicit: Butcher {
                a: vec![vec![0.0, 0.0], vec![0.0, 1.0]],
                b: vec![0.0, 1.0],
                c: vec![0.0, 1.0],
            },
            order: 1,
        }
    }

    pub fn ars222() -> Self {
        let g = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
        let d = 1.0 - 1.0 / (2.0 * g);
        ImexTableau {
            name: "ARS(2,2,2)".into(),
            explicit: Butcher {
                a: vec![
                    vec![0.0, 0.0, 0.0],
                    vec![g, 0.0, 0.0],
                    vec![d, 1.0 - d, 0.0],
                ],
                b: vec![d, 1.0 - d, 0.0],
                c: vec![0.0, g, 1.0],
            },
            implicit: Butcher {
                a: vec![
                    vec![0.0, 0.0, 0.0],
                    vec![0.0, g, 0.0],
                    vec![0.0, 1.0 - g, g],
                ],
                b: vec![0.0, 1.0 - g, g],
                c: vec![0.0, g, 1.0],
            },
            order: 2,
        }
    }

    pub fn ars343() -> Self {
        let g = 0.435_866_521_508_459;
        let b1 = -1.5 * g * g + 4.0 * g - 0.25;
        let b2 = 1.5 * g * g - 5.0 * g + 1.25;
        let c3 = 0.5 * (1.0 + g);
        let e42 = 0.552_929_147_9;
        let e31 = 0.321_278_886_272_042_25;
        let e32 = 0.396_654_374_482_187_25;
        let e41 = 1.0 - 2.0 * e42;
        ImexTableau {
            name: "ARS(3,4,3)".into(),
            explicit: Butcher {
                a: vec![
                    vec![0.0, 0.0, 0.0, 0.0],
                    vec![g, 0.0, 0.0, 0.0],
                    vec![e31, e32, 0.0, 0.0],
                    vec![e41, e42, e42, 0.0],
                ],
                b: vec![0.0, b1, b2, g],
                c: vec![0.0, g, c3, 1.0],
            },
            implicit: Butcher {
                a: vec![
                    vec![0.0, 0.0, 0.0, 0.0],
                    vec![0.0, g, 0.0, 0.0],
                    vec![0.0, 0.5 * (1.0 - g), g, 0.0],
                    vec![0.0, b1, b2, g],
                ],
                b: vec![0.0, b1, b2, g],
                c: vec![0.0, g, c3, 1.0],
            },
            order: 3,
        }
    }

    /// IMEX scheme of the given order used for stiff problems.
    pub fn imex(order: usize) -> Result<Self> {
        match order {
            1 => Ok(Self::ars111()),
            2 => Ok(Self::ars222()),
            3 => Ok(Self::ars343()),
            o => Err(Error::Parameter(format!("IMEX order {o} not in 1..=3"))),
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        let key: String = name
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "fe" | "rk1" => Ok(Self::forward_euler()),
            "heun2" | "rk2" => Ok(Self::heun2()),
            "heun3" | "rk3" => Ok(Self::heun3()),
            "ars111" => Ok(Self::ars111()),
            "ars222" => Ok(Self::ars222()),
            "ars343" | "siimex343" | "bpr343" => Ok(Self::ars343()),
            _ => Err(Error::Config(format!("unknown tableau '{name}'"))),
        }
    }

    /// Structural checks the stepper relies on: shapes, strictly lower
    /// triangular explicit part, and an implicit part that is either zero
    /// or of ARS type (vanishing first row and column, positive diagonal
    /// on the remaining stages).
    pub fn validate(&self) -> Result<()> {
        let s = self.stages();
        let shaped = |t: &Butcher| {
            t.a.len() == s && t.a.iter().all(|r| r.len() == s) && t.b.len() == s && t.c.len() == s
        };
        if s == 0 || !shaped(&self.explicit) || !shaped(&self.implicit) {
            return Err(Error::Parameter(format!("{}: inconsistent shapes", self.name)));
        }
        for i in 0..s {
            for j in i..s {
                if self.explicit.a[i][j] != 0.0 {
                    return Err(Error::Parameter(format!(
                        "{}: explicit part not strictly lower triangular",
                        self.name
                    )));
                }
                if j > i && self.implicit.a[i][j] != 0.0 {
                    return Err(Error::Parameter(format!(
                        "{}: implicit part not lower triangular",
                        self.name
                    )));
                }
            }
        }
        if self.is_explicit() {
            return Ok(());
        }
        let first_col_zero = (0..s).all(|i| self.implicit.a[i][0] == 0.0) && self.implicit.b[0] == 0.0;
        let diag_ok = (1..s).all(|i| self.implicit.a[i][i] > 0.0);
        if !(first_col_zero && diag_ok) {
            return Err(Error::Unsupported(format!(
                "{}: only ARS-type implicit parts are supported",
                self.name
            )));
        }
        Ok(())
    }

    /// Residuals of every order condition up to `self.order`, including
    /// all coupling conditions between the two parts.
    pub fn order_conditions(&self) -> Vec<Condition> {
        let ex = &self.explicit;
        let im = &self.implicit;
        let parts: [(&str, &Butcher); 2] = [("E", ex), ("I", im)];
        let mut out = Vec::new();
        let ones = vec![1.0; self.stages()];
        for (n, t) in parts {
            out.push(Condition {
                label: format!("sum b_{n} = 1"),
                residual: t.b.iter().sum::<f64>() - 1.0,
            });
            let rows = t.mat_vec(&ones);
            let worst = rows
                .iter()
                .zip(&t.c)
                .map(|(r, c)| (r - c).abs())
                .fold(0.0, f64::max);
            out.push(Condition {
                label: format!("row sums of A_{n} = c_{n}"),
                residual: worst,
            });
        }
        if self.order >= 2 {
            for (nb, tb) in parts {
                for (nc, tc) in parts {
                    out.push(Condition {
                        label: format!("b_{nb} . c_{nc} = 1/2"),
                        residual: dot(&tb.b, &tc.c) - 0.5,
                    });
                }
            }
        }
        if self.order >= 3 {
            for (nb, tb) in parts {
                for (i, (nc1, tc1)) in parts.iter().enumerate() {
                    for (nc2, tc2) in parts.iter().skip(i) {
                        let cc: Vec<f64> = tc1.c.iter().zip(&tc2.c).map(|(x, y)| x * y).collect();
                        out.push(Condition {
                            label: format!("b_{nb} . (c_{nc1} c_{nc2}) = 1/3"),
                            residual: dot(&tb.b, &cc) - 1.0 / 3.0,
                        });
                    }
                }
                for (na, ta) in parts {
                    for (nc, tc) in parts {
                        out.push(Condition {
                            label: format!("b_{nb} . A_{na} c_{nc} = 1/6"),
                            residual: dot(&tb.b, &ta.mat_vec(&tc.c)) - 1.0 / 6.0,
                        });
                    }
                }
            }
        }
        if self.is_explicit() {
            // the zero implicit part satisfies nothing and is never used
            out.retain(|c| !c.label.contains("_I"));
        }
        out
    }

    pub fn max_order_defect(&self) -> f64 {
        self.order_conditions()
            .iter()
            .map(|c| c.residual.abs())
            .fold(0.0, f64::max)
    }

    /// Last implicit row equals `b`.
    pub fn stiffly_accurate(&self) -> bool {
        !self.is_explicit() && self.implicit.a.last() == Some(&self.implicit.b)
    }

    /// `R(inf) = 1 - b^T A^{-1} e` of the implicit part, using the
    /// trailing invertible block for ARS-type tableaux.
    pub fn stability_at_infinity(&self) -> Option<f64> {
        if self.is_explicit() {
            return None;
        }
        let s = self.stages();
        let off = usize::from(self.implicit.a[0][0] == 0.0);
        let m = s - off;
        // forward substitution: A_hat y = e
        let mut y = vec![0.0; m];
        for i in 0..m {
            let row = &self.implicit.a[i + off];
            let mut acc = 1.0;
            for j in 0..i {
                acc -= row[j + off] * y[j];
            }
            let d = row[i + off];
            if d == 0.0 {
                return None;
            }
            y[i] = acc / d;
        }
        Some(1.0 - dot(&self.implicit.b[off..], &y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_tableaux_validate() {
        for t in [
            ImexTableau::forward_euler(),
            ImexTableau::heun2(),
            ImexTableau::heun3(),
            ImexTableau::ars111(),
            ImexTableau::ars222(),
            ImexTableau::ars343(),
        ] {
            t.validate().unwrap();
        }
    }

    #[test]
    fn order_conditions_hold() {
        for t in [
            ImexTableau::forward_euler(),
            ImexTableau::heun2(),
            ImexTableau::heun3(),
            ImexTableau::ars111(),
            ImexTableau::ars222(),
        ] {
            assert!(t.max_order_defect() < 1e-14, "{}: {}", t.name, t.max_order_defect());
        }
        // the published explicit weights of the fourth stage carry ten digits
        assert!(ImexTableau::ars343().max_order_defect() < 1e-12);
    }

    #[test]
    fn broken_tableau_is_caught() {
        let mut t = ImexTableau::heun3();
        t.explicit.b[2] += 1e-6;
        assert!(t.max_order_defect() > 1e-7);
    }

    #[test]
    fn implicit_parts_decay_at_infinity() {
        for t in [ImexTableau::ars111(), ImexTableau::ars222(), ImexTableau::ars343()] {
            assert!(t.stiffly_accurate());
            assert!(t.stability_at_infinity().unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn non_ars_implicit_rejected() {
        let mut t = ImexTableau::ars222();
        t.implicit.a[0][0] = 0.5;
        assert!(matches!(t.validate(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn aliases() {
        assert_eq!(ImexTableau::by_name("BPR(3,4,3)").unwrap().name, "ARS(3,4,3)");
        assert_eq!(ImexTableau::by_name("heun3").unwrap().stages(), 3);
    }
}
