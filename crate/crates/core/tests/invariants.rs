//! Property tests for the sampling stream, sample allocation, control
//! weights, the estimator recursion and discrete conservation.

use momc::estimators::{alpha_quasi_optimal, alpha_scalar, mc_estimate, momc_chain, AlphaChoice};
use momc::levels::{LevelSolver, LevelSpec};
use momc::mesh::{Boundary, Grid1D};
use momc::models::{Case, ModelKind, ModelSpec, Quadrature};
use momc::parallel::{map_indexed, Workers};
use momc::sampling::{allocate_samples, refinement_ratio, DistributionSpec, SampleHierarchy};
use momc::time::{cfl_dt, Solver, StepperConfig, DEFAULT_CFL};
use proptest::prelude::*;

fn field(cells: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, cells)
}

fn samples(m: usize, cells: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(field(cells), m)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prefixes_are_nested(seed in any::<u64>(), a in 1usize..50, b in 1usize..50, lo in -3.0f64..0.0, w in 0.1f64..5.0) {
        let (m1, m2) = (a.min(b), a.max(b));
        let dist = DistributionSpec::uniform(lo, lo + w).unwrap();
        let h = SampleHierarchy::new(seed, dist, vec![m2]).unwrap();
        let short = h.prefix(m1).unwrap();
        let long = h.prefix(m2).unwrap();
        prop_assert_eq!(&short[..], &long[..m1]);
        for z in &long {
            prop_assert!(z[0] >= lo && z[0] < lo + w);
        }
    }

    #[test]
    fn allocation_is_nested_and_monotone(m_top in 2usize..500, raw in prop::collection::vec(0.01f64..50.0, 1..5)) {
        let mut costs = raw.clone();
        costs.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let counts = allocate_samples(m_top, &costs).unwrap();
        let more = allocate_samples(m_top + 1, &costs).unwrap();
        prop_assert_eq!(*counts.last().unwrap(), m_top);
        for l in 0..counts.len() - 1 {
            let r = refinement_ratio(costs[l], costs[l + 1]);
            prop_assert_eq!(counts[l], counts[l + 1] * (1 + r));
            prop_assert!(counts[l] >= counts[l + 1]);
        }
        for (x, y) in counts.iter().zip(&more) {
            prop_assert!(y > x);
        }
    }

    #[test]
    fn alpha_respects_the_variance_bound(cov in field(16), vl in prop::collection::vec(0.0f64..4.0, 16), vh in prop::collection::vec(0.0f64..4.0, 16)) {
        for (i, a) in alpha_quasi_optimal(&cov, &vl, &vh).iter().enumerate() {
            prop_assert!(a.is_finite());
            if vl[i] > 0.0 {
                prop_assert!(a.abs() <= (vh[i] / vl[i]).sqrt() * (1.0 + 1e-12));
            }
        }
        let s = alpha_scalar(&cov, &vl, &vh);
        prop_assert!(s.iter().all(|a| *a == s[0] && a.is_finite()));
    }

    #[test]
    fn zero_weight_is_plain_mc(low in samples(12, 6), high in samples(4, 6)) {
        let chain = momc_chain(&[&low, &high], &AlphaChoice::Fixed(vec![0.0]), 0.5).unwrap();
        let mc = mc_estimate(&high, 0.5).unwrap();
        prop_assert_eq!(chain.expectation, mc.expectation);
        prop_assert_eq!(chain.variance, mc.variance);
    }

    #[test]
    fn identical_levels_telescope(low in samples(12, 6), m in 2usize..12) {
        // with the same solver on both levels and unit weight the estimate
        // collapses to the mean over the deeper level
        let high = low[..m].to_vec();
        let chain = momc_chain(&[&low, &high], &AlphaChoice::Fixed(vec![1.0]), 0.5).unwrap();
        let mc = mc_estimate(&low, 0.5).unwrap();
        for (a, b) in chain.expectation.iter().zip(&mc.expectation) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn indexed_map_ignores_worker_count(n in 0usize..200, w in 1usize..8) {
        let f = |i: usize| Ok((i as f64).sin());
        prop_assert_eq!(map_indexed(n, Workers(w), f).unwrap(), map_indexed(n, Workers(1), f).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn periodic_burgers_conserves_mass(z in 0.0f64..1.0, order in 1usize..=3, steps in 1usize..60) {
        let spec = ModelSpec {
            boundary: Boundary::Periodic,
            ..ModelSpec::new(ModelKind::Burgers, Case::BurgersGaussian)
        };
        let p = spec.instantiate(Grid1D::new(-5.0, 5.0, 64).unwrap(), &[z], Quadrature::for_order(order)).unwrap();
        let cfg = StepperConfig::for_model(ModelKind::Burgers, order).unwrap();
        let mut solver = Solver::new(&p, cfg.clone()).unwrap();
        let mut state = p.state.clone();
        for _ in 0..steps {
            let dt = cfl_dt(&p.model, &state, cfg.cfl).unwrap();
            solver.step(&mut state, dt).unwrap();
        }
        let m0 = p.state.total(0);
        prop_assert!((state.total(0) - m0).abs() <= 1e-12 * m0.abs());
    }

    #[test]
    fn solves_are_bitwise_repeatable(z in 0.0f64..1.0, order in 1usize..=3) {
        let spec = ModelSpec::new(ModelKind::BloodFlow, Case::BloodTest2);
        let ls = LevelSolver::new(&spec, &LevelSpec::full(order, 24, 1.0), 0.02, DEFAULT_CFL).unwrap();
        prop_assert_eq!(ls.evaluate(&[z]).unwrap(), ls.evaluate(&[z]).unwrap());
    }
}
