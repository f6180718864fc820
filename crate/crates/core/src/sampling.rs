//! Uniform random inputs drawn from a stateless counter-based generator,
//! and the nested per-level sample counts of a Monte Carlo hierarchy.
//!
//! Sample `k` depends only on `(seed, k)`, so any subset of samples can
//! be produced in any order, on any number of workers.

use crate::error::{Error, Result};

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const DIM_KEY: u64 = 0xd1b5_4a32_d192_ed03;

/// splitmix64 output function.
#[inline]
fn fmix(mut x: u64) -> u64 {
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Keyed 64-bit hash of `(seed, k, dim)`.
#[inline]
pub fn mix(seed: u64, k: u64, dim: u64) -> u64 {
    let key = fmix(seed.wrapping_add(GOLDEN));
    let ctr = fmix(k.wrapping_mul(GOLDEN) ^ key);
    fmix(ctr ^ fmix(dim.wrapping_add(1).wrapping_mul(DIM_KEY) ^ key))
}

/// Top 53 bits as a double in `[0, 1)`.
#[inline]
pub fn unit_interval(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Mix a replication index into a base seed.
pub fn replication_seed(seed: u64, replication: u64) -> u64 {
    if replication == 0 {
        seed
    } else {
        fmix(seed ^ fmix(replication.wrapping_mul(DIM_KEY)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Uniform {
    pub a: f64,
    pub b: f64,
}

impl Uniform {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Parameter(format!("uniform bounds ({a}, {b})")));
        }
        Ok(Uniform { a, b })
    }

    #[inline]
    pub fn map(&self, u: f64) -> f64 {
        self.a + (self.b - self.a) * u
    }

    pub fn mean(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    pub fn variance(&self) -> f64 {
        (self.b - self.a).powi(2) / 12.0
    }
}

/// Product of independent uniform marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSpec {
    pub dims: Vec<Uniform>,
}

impl DistributionSpec {
    pub fn new(dims: Vec<Uniform>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Parameter("distribution needs at least one dimension".into()));
        }
        Ok(DistributionSpec { dims })
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![Uniform::new(a, b)?])
    }

    pub fn d_z(&self) -> usize {
        self.dims.len()
    }
}

/// Seeded sample stream with nested per-level counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleHierarchy {
    pub seed: u64,
    pub dist: DistributionSpec,
    /// Counts from the deepest (largest) level up to the top level.
    pub counts: Vec<usize>,
}

impl SampleHierarchy {
    pub fn new(seed: u64, dist: DistributionSpec, counts: Vec<usize>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Parameter("empty sample hierarchy".into()));
        }
        if counts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Parameter(format!("counts {counts:?} not non-increasing")));
        }
        Ok(SampleHierarchy { seed, dist, counts })
    }

    pub fn max_count(&self) -> usize {
        self.counts[0]
    }

    /// Random input of sample `k`.
    pub fn sample(&self, k: usize) -> Result<Vec<f64>> {
        if k >= self.max_count() {
            return Err(Error::SampleIndex {
                index: k,
                max: self.max_count(),
            });
        }
        Ok(self.draw(k))
    }

    /// Unchecked draw, defined for every `k`.
    pub fn draw(&self, k: usize) -> Vec<f64> {
        self.dist
            .dims
            .iter()
            .enumerate()
            .map(|(d, u)| u.map(unit_interval(mix(self.seed, k as u64, d as u64))))
            .collect()
    }

    /// The first `m` inputs.
    pub fn prefix(&self, m: usize) -> Result<Vec<Vec<f64>>> {
        if m > self.max_count() {
            return Err(Error::SampleIndex {
                index: m,
                max: self.max_count(),
            });
        }
        Ok((0..m).map(|k| self.draw(k)).collect())
    }
}

/// Integer refinement ratio between two adjacent levels:
/// `max(1, ceil(c_hi / c_lo) - 1)`.
pub fn refinement_ratio(c_lo: f64, c_hi: f64) -> usize {
    let q = c_hi / c_lo;
    // guard exact integer ratios against round-off
    let up = (q - 1e-9 * q).ceil() as usize;
    up.saturating_sub(1).max(1)
}

/// Sample counts for costs listed from the cheapest level to the most
/// expensive one, given the top-level count `m_top`. The result is in the
/// same order as `costs`.
pub fn allocate_samples(m_top: usize, costs: &[f64]) -> Result<Vec<usize>> {
    if m_top < 2 {
        return Err(Error::Parameter(format!("top-level count {m_top} < 2")));
    }
    if costs.is_empty() {
        return Err(Error::Parameter("no level costs".into()));
    }
    if let Some(c) = costs.iter().find(|c| !(**c > 0.0) || !c.is_finite()) {
        return Err(Error::Parameter(format!("level cost {c} not positive")));
    }
    if costs.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Parameter(format!("costs {costs:?} not monotone in level")));
    }
    let mut counts = vec![0; costs.len()];
    let last = costs.len() - 1;
    counts[last] = m_top;
    for l in (0..last).rev() {
        let r = refinement_ratio(costs[l], costs[l + 1]);
        counts[l] = counts[l + 1] * (1 + r);
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn allocation_examples() {
        assert_eq!(allocate_samples(100, &[1.0, 4.0, 9.0]).unwrap(), vec![1200, 300, 100]);
        assert_eq!(allocate_samples(50, &[3.0, 12.0, 60.0]).unwrap(), vec![1000, 250, 50]);
        assert_eq!(allocate_samples(10, &[2.0, 2.0]).unwrap(), vec![20, 10]);
        assert!(allocate_samples(10, &[4.0, 1.0]).is_err());
        assert!(allocate_samples(1, &[1.0]).is_err());
    }

    #[test]
    fn out_of_range_index() {
        let h = SampleHierarchy::new(7, DistributionSpec::uniform(-1.0, 1.0).unwrap(), vec![5]).unwrap();
        assert!(matches!(h.sample(5), Err(Error::SampleIndex { index: 5, max: 5 })));
        assert_eq!(h.sample(3).unwrap(), h.sample(3).unwrap());
    }

    #[test]
    fn moments() {
        let h = SampleHierarchy::new(11, DistributionSpec::uniform(-1.0, 1.0).unwrap(), vec![100_000]).unwrap();
        let mean = (0..100_000).map(|k| h.draw(k)[0]).sum::<f64>() / 1e5;
        assert!(mean.abs() < 0.01, "{mean}");

        let h = SampleHierarchy::new(12, DistributionSpec::uniform(0.0, 1.0).unwrap(), vec![100_000]).unwrap();
        let xs: Vec<f64> = (0..100_000).map(|k| h.draw(k)[0]).collect();
        let m = xs.iter().sum::<f64>() / 1e5;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (1e5 - 1.0);
        assert!((v - 1.0 / 12.0).abs() < 0.002, "{v}");
    }

    #[test]
    fn kolmogorov_smirnov() {
        let n = 10_000;
        let h = SampleHierarchy::new(3, DistributionSpec::uniform(0.0, 1.0).unwrap(), vec![n]).unwrap();
        let mut xs: Vec<f64> = (0..n).map(|k| h.draw(k)[0]).collect();
        xs.sort_by(f64::total_cmp);
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let lo = i as f64 / n as f64;
                let hi = (i + 1) as f64 / n as f64;
                (x - lo).abs().max((hi - x).abs())
            })
            .fold(0.0, f64::max);
        // 1% critical value
        assert!(d < 1.628 / (n as f64).sqrt(), "D = {d}");
    }

    #[test]
    fn dimensions_are_decorrelated() {
        let dist = DistributionSpec::new(vec![Uniform::new(0.0, 1.0).unwrap(); 2]).unwrap();
        let h = SampleHierarchy::new(5, dist, vec![20_000]).unwrap();
        let n = 20_000.0;
        let (mut sx, mut sy, mut sxy) = (0.0, 0.0, 0.0);
        for k in 0..20_000 {
            let z = h.draw(k);
            sx += z[0];
            sy += z[1];
            sxy += z[0] * z[1];
        }
        let cov = sxy / n - sx * sy / (n * n);
        assert!(cov.abs() < 3.0 / 12.0 / n.sqrt());
    }
}
