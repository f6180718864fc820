//! Monte Carlo, multi-order and multilevel estimators of the cellwise
//! mean and variance of a random field, plus hierarchy diagnostics.
//!
//! Every estimator consumes pre-computed sample fields: `samples[k][i]`
//! is the value in cell `i` for input `k`. Levels are always listed from
//! the deepest (most samples, cheapest) to the top one, and the samples
//! of a level are a prefix of the sample set of every deeper level.

use crate::error::{Error, Result};

/// Relative floor on the control-variate variance.
pub const VAR_FLOOR_REL: f64 = 1e-14;
/// Absolute floor on the control-variate variance.
pub const VAR_FLOOR_ABS: f64 = 1e-30;

/// Per-cell or spatially averaged control weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlphaMode {
    #[default]
    PerCell,
    Scalar,
}

impl std::str::FromStr for AlphaMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-cell" | "cell" => Ok(AlphaMode::PerCell),
            "scalar" => Ok(AlphaMode::Scalar),
            _ => Err(Error::Config(format!("unknown alpha mode '{s}'"))),
        }
    }
}

/// How the control weights of a multi-order chain are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum AlphaChoice {
    QuasiOptimal(AlphaMode),
    /// One constant per coupling, deepest coupling first.
    Fixed(Vec<f64>),
    /// One field per coupling, deepest coupling first.
    Fields(Vec<Vec<f64>>),
}

/// Per-level quantities entering the statistical error bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// Mean correlation with the next deeper level (`NaN` at the bottom).
    pub rho: Vec<f64>,
    pub sigma: Vec<f64>,
    pub tau: Vec<f64>,
    pub xi: Vec<f64>,
    pub counts: Vec<usize>,
    pub bound: f64,
}

/// Cellwise moments produced by an estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentField {
    pub dx: f64,
    pub expectation: Vec<f64>,
    pub variance: Vec<f64>,
    /// Control weights per coupling, deepest first.
    pub alphas: Vec<Vec<f64>>,
    pub counts: Vec<usize>,
    pub total_cost: f64,
}

impl MomentField {
    pub fn n_cells(&self) -> usize {
        self.expectation.len()
    }

    /// L1 distance of the expectations.
    pub fn expectation_error(&self, reference: &MomentField) -> Result<f64> {
        l1_distance(&self.expectation, &reference.expectation, self.dx)
    }

    /// L1 distance of the variances.
    pub fn variance_error(&self, reference: &MomentField) -> Result<f64> {
        l1_distance(&self.variance, &reference.variance, self.dx)
    }
}

pub fn l1_distance(a: &[f64], b: &[f64], dx: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("{} vs {} cells", a.len(), b.len())));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() * dx)
}

pub fn l1_norm(a: &[f64], dx: f64) -> f64 {
    a.iter().map(|x| x.abs()).sum::<f64>() * dx
}

fn check_samples(samples: &[Vec<f64>], min: usize) -> Result<usize> {
    if samples.len() < min {
        return Err(Error::Estimator(format!(
            "{} samples, need at least {min}",
            samples.len()
        )));
    }
    let n = samples[0].len();
    if let Some(s) = samples.iter().find(|s| s.len() != n) {
        return Err(Error::Dimension(format!("sample with {} cells, expected {n}", s.len())));
    }
    Ok(n)
}

/// Cellwise sample mean.
pub fn sample_mean(samples: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = check_samples(samples, 1)?;
    let mut m = vec![0.0; n];
    for s in samples {
        for (a, v) in m.iter_mut().zip(s) {
            *a += v;
        }
    }
    let inv = 1.0 / samples.len() as f64;
    m.iter_mut().for_each(|a| *a *= inv);
    Ok(m)
}

/// Unbiased cellwise covariance of two sample sets on the same inputs.
pub fn sample_cov(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::Estimator(format!(
            "covariance of {} and {} samples",
            a.len(),
            b.len()
        )));
    }
    let n = check_samples(a, 2)?;
    check_samples(b, 2)?;
    if b[0].len() != n {
        return Err(Error::Dimension(format!("{n} vs {} cells", b[0].len())));
    }
    let ma = sample_mean(a)?;
    let mb = sample_mean(b)?;
    let mut c = vec![0.0; n];
    for (sa, sb) in a.iter().zip(b) {
        for i in 0..n {
            c[i] += (sa[i] - ma[i]) * (sb[i] - mb[i]);
        }
    }
    let inv = 1.0 / (a.len() - 1) as f64;
    c.iter_mut().for_each(|v| *v *= inv);
    Ok(c)
}

/// Unbiased cellwise variance (zero for a single sample).
pub fn sample_var(samples: &[Vec<f64>]) -> Result<Vec<f64>> {
    if samples.len() == 1 {
        return Ok(vec![0.0; check_samples(samples, 1)?]);
    }
    sample_cov(samples, samples)
}

/// Plain Monte Carlo.
pub fn mc_estimate(samples: &[Vec<f64>], dx: f64) -> Result<MomentField> {
    Ok(MomentField {
        dx,
        expectation: sample_mean(samples)?,
        variance: sample_var(samples)?,
        alphas: Vec::new(),
        counts: vec![samples.len()],
        total_cost: 0.0,
    })
}

/// `Cov / Var` cellwise, zero where the control variance is degenerate,
/// clamped to `|alpha| <= sd_high / sd_low`.
pub fn alpha_quasi_optimal(cov: &[f64], var_low: &[f64], var_high: &[f64]) -> Vec<f64> {
    let vmax = var_low.iter().cloned().fold(0.0, f64::max);
    let floor = (VAR_FLOOR_REL * vmax).max(VAR_FLOOR_ABS);
    cov.iter()
        .zip(var_low)
        .zip(var_high)
        .map(|((c, vl), vh)| {
            if !(*vl >= floor) {
                return 0.0;
            }
            let bound = (vh.max(0.0) / vl).sqrt();
            (c / vl).clamp(-bound, bound)
        })
        .collect()
}

/// Spatially averaged weight `sum Cov / sum Var`, broadcast to every cell.
pub fn alpha_scalar(cov: &[f64], var_low: &[f64], var_high: &[f64]) -> Vec<f64> {
    let sv: f64 = var_low.iter().sum();
    let sh: f64 = var_high.iter().sum();
    let sc: f64 = cov.iter().sum();
    let a = if sv > VAR_FLOOR_ABS {
        let bound = (sh.max(0.0) / sv).sqrt();
        (sc / sv).clamp(-bound, bound)
    } else {
        0.0
    };
    vec![a; cov.len()]
}

fn alpha_for(mode: AlphaMode, high: &[Vec<f64>], low_prefix: &[Vec<f64>]) -> Result<Vec<f64>> {
    let cov = sample_cov(high, low_prefix)?;
    let vl = sample_var(low_prefix)?;
    let vh = sample_var(high)?;
    Ok(match mode {
        AlphaMode::PerCell => alpha_quasi_optimal(&cov, &vl, &vh),
        AlphaMode::Scalar => alpha_scalar(&cov, &vl, &vh),
    })
}

/// Two-level control variate: `E_ML[hi] - alpha (E_ML[lo] - E_M(L-1)[lo])`.
/// `low` holds `M_(L-1) >= M_L` samples whose first `M_L` share the inputs
/// of `high`.
pub fn momc_two_level(high: &[Vec<f64>], low: &[Vec<f64>], alpha: &[f64], dx: f64) -> Result<MomentField> {
    let m = high.len();
    if low.len() < m {
        return Err(Error::Estimator(format!(
            "control level has {} samples, top level {m}",
            low.len()
        )));
    }
    momc_chain(
        &[low, high],
        &AlphaChoice::Fields(vec![alpha.to_vec()]),
        dx,
    )
}

/// Recursive multi-order estimate over `levels` (deepest first). Each
/// coupling uses its own quasi-optimal or fixed weights; the variance is
/// assembled with the same weights from the unbiased level variances.
pub fn momc_chain(
    levels: &[&[Vec<f64>]],
    choice: &AlphaChoice,
    dx: f64,
) -> Result<MomentField> {
    if levels.is_empty() {
        return Err(Error::Estimator("no levels".into()));
    }
    let n = check_samples(levels[0], 1)?;
    for w in levels.windows(2) {
        if w[1].len() > w[0].len() {
            return Err(Error::Estimator(format!(
                "sample counts {} below {} are not nested",
                w[0].len(),
                w[1].len()
            )));
        }
    }
    let mut e = sample_mean(levels[0])?;
    let mut v = sample_var(levels[0])?;
    let mut alphas = Vec::new();
    for l in 1..levels.len() {
        let high = levels[l];
        let m = high.len();
        if check_samples(high, 1)? != n {
            return Err(Error::Dimension(format!("level {l} has a different grid")));
        }
        let low_prefix = &levels[l - 1][..m];
        let missing = || Error::Estimator(format!("no weights for coupling {l}"));
        let alpha = match choice {
            AlphaChoice::Fields(a) => a.get(l - 1).cloned().ok_or_else(missing)?,
            AlphaChoice::Fixed(c) => vec![*c.get(l - 1).ok_or_else(missing)?; n],
            AlphaChoice::QuasiOptimal(mode) => {
                if m < 2 {
                    return Err(Error::Estimator(format!("level {l} needs >= 2 samples")));
                }
                alpha_for(*mode, high, low_prefix)?
            }
        };
        if alpha.len() != n {
            return Err(Error::Dimension(format!("{} weights for {n} cells", alpha.len())));
        }
        let eh = sample_mean(high)?;
        let el = sample_mean(low_prefix)?;
        let vh = sample_var(high)?;
        let vl = sample_var(low_prefix)?;
        for i in 0..n {
            e[i] = eh[i] - alpha[i] * (el[i] - e[i]);
            v[i] = (vh[i] - alpha[i] * (vl[i] - v[i])).max(0.0);
        }
        alphas.push(alpha);
    }
    Ok(MomentField {
        dx,
        expectation: e,
        variance: v,
        alphas,
        counts: levels.iter().map(|l| l.len()).collect(),
        total_cost: 0.0,
    })
}

/// Total cost `sum_l M_l C_l`.
pub fn total_cost(counts: &[usize], costs: &[f64]) -> f64 {
    counts.iter().zip(costs).map(|(m, c)| *m as f64 * c).sum()
}

/// Piecewise-constant injection of a coarse field onto a grid refined by
/// an integer factor.
pub fn prolong(coarse: &[f64], n_fine: usize) -> Result<Vec<f64>> {
    let nc = coarse.len();
    if nc == 0 || n_fine % nc != 0 {
        return Err(Error::Estimator(format!("{nc} cells do not nest in {n_fine}")));
    }
    let f = n_fine / nc;
    Ok((0..n_fine).map(|i| coarse[i / f]).collect())
}

/// Telescoping multilevel estimate over levels on nested grids (deepest,
/// i.e. coarsest, first). The coarse partner of level `l` on its `M_l`
/// inputs is the prefix of level `l - 1`, injected onto the finer grid.
/// `dx` is the spacing of the finest grid.
pub fn mlmc_estimate(levels: &[&[Vec<f64>]], dx: f64) -> Result<MomentField> {
    if levels.is_empty() {
        return Err(Error::Estimator("no levels".into()));
    }
    let top = levels[levels.len() - 1];
    let n_top = check_samples(top, 1)?;
    let lift = |s: &Vec<f64>| prolong(s, n_top);
    let base: Vec<Vec<f64>> = levels[0].iter().map(lift).collect::<Result<_>>()?;
    let mut e = sample_mean(&base)?;
    let mut v = sample_var(&base)?;
    for l in 1..levels.len() {
        let m = levels[l].len();
        if m > levels[l - 1].len() {
            return Err(Error::Estimator("sample counts not nested".into()));
        }
        let fine: Vec<Vec<f64>> = levels[l].iter().map(lift).collect::<Result<_>>()?;
        let coarse: Vec<Vec<f64>> = levels[l - 1][..m].iter().map(lift).collect::<Result<_>>()?;
        let ef = sample_mean(&fine)?;
        let ec = sample_mean(&coarse)?;
        let vf = sample_var(&fine)?;
        let vc = sample_var(&coarse)?;
        for i in 0..n_top {
            e[i] += ef[i] - ec[i];
            v[i] = (v[i] + vf[i] - vc[i]).max(0.0);
        }
    }
    Ok(MomentField {
        dx,
        expectation: e,
        variance: v,
        alphas: Vec::new(),
        counts: levels.iter().map(|l| l.len()).collect(),
        total_cost: 0.0,
    })
}

/// Variance of the difference `fine - P coarse` on the shared inputs of
/// each coupling, integrated over the domain.
pub fn level_difference_variance(levels: &[&[Vec<f64>]], dx: f64) -> Result<Vec<f64>> {
    let n_top = check_samples(levels.last().copied().unwrap_or(&[]), 1)?;
    (1..levels.len())
        .map(|l| {
            let m = levels[l].len();
            let d: Vec<Vec<f64>> = levels[l]
                .iter()
                .zip(&levels[l - 1][..m])
                .map(|(f, c)| {
                    let f = prolong(f, n_top)?;
                    let c = prolong(c, n_top)?;
                    Ok(f.iter().zip(&c).map(|(a, b)| a - b).collect())
                })
                .collect::<Result<_>>()?;
            Ok(sample_var(&d)?.iter().sum::<f64>() * dx)
        })
        .collect()
}

/// Per-level correlations, weighted deviations and the predicted
/// statistical bound `sum_l xi_l sigma_l / sqrt(M_l)`.
pub fn hierarchy_diagnostics(levels: &[&[Vec<f64>]], dx: f64) -> Result<Diagnostics> {
    if levels.is_empty() {
        return Err(Error::Estimator("no levels".into()));
    }
    let nl = levels.len();
    let mut rho = vec![f64::NAN; nl];
    let mut sigma = vec![0.0; nl];
    let mut tau = vec![0.0; nl];
    for l in 0..nl {
        let m = levels[l].len();
        if m < 2 {
            return Err(Error::Estimator(format!("level {l} has {m} < 2 samples")));
        }
        let vh = sample_var(levels[l])?;
        if l == 0 {
            sigma[0] = l1_norm(&vh.iter().map(|v| v.sqrt()).collect::<Vec<_>>(), dx);
            continue;
        }
        let low = &levels[l - 1][..m];
        let vl = sample_var(low)?;
        let cov = sample_cov(levels[l], low)?;
        let vmax = vl.iter().chain(&vh).cloned().fold(0.0, f64::max);
        let floor = (VAR_FLOOR_REL * vmax).max(VAR_FLOOR_ABS);
        let r: Vec<f64> = cov
            .iter()
            .zip(&vl)
            .zip(&vh)
            .map(|((c, a), b)| {
                if *a < floor || *b < floor {
                    0.0
                } else {
                    (c / (a * b).sqrt()).clamp(-1.0, 1.0)
                }
            })
            .collect();
        let sd: Vec<f64> = vh.iter().map(|v| v.sqrt()).collect();
        sigma[l] = l1_norm(&r.iter().zip(&sd).map(|(r, s)| (1.0 - r * r).sqrt() * s).collect::<Vec<_>>(), dx);
        tau[l] = l1_norm(&r.iter().zip(&sd).map(|(r, s)| r * s).collect::<Vec<_>>(), dx);
        let active: Vec<f64> = r.iter().cloned().filter(|v| *v != 0.0).collect();
        rho[l] = if active.is_empty() {
            0.0
        } else {
            active.iter().sum::<f64>() / active.len() as f64
        };
    }
    let mut xi = vec![1.0; nl];
    for l in (0..nl.saturating_sub(1)).rev() {
        xi[l] = xi[l + 1] * tau[l + 1];
    }
    let counts: Vec<usize> = levels.iter().map(|l| l.len()).collect();
    let bound = (0..nl)
        .map(|l| xi[l] * sigma[l] / (counts[l] as f64).sqrt())
        .sum();
    Ok(Diagnostics {
        rho,
        sigma,
        tau,
        xi,
        counts,
        bound,
    })
}
