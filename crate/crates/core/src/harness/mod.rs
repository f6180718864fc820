//! Experiment driver: reference generation, convergence sweeps over the
//! sample count, single deterministic solves and hierarchy diagnostics.
//! All parallel work happens in per-sample solver runs; files are written
//! from the calling thread only.

mod config;

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub use config::{EstimatorKind, ExperimentConfig, RawConfig, ReferenceSpec, SolveSpec};

use crate::error::{Error, Result};
use crate::estimators::{
    hierarchy_diagnostics, mc_estimate, mlmc_estimate, momc_chain, prolong, total_cost, AlphaChoice,
    Diagnostics, MomentField,
};
use crate::levels::{LevelSolver, LevelSpec};
use crate::mesh::Grid1D;
use crate::models::{Quadrature, MAX_VARS};
use crate::parallel::{map_indexed, Workers};
use crate::sampling::{allocate_samples, replication_seed, SampleHierarchy};
use crate::time::Solver;

pub const SWEEP_HEADER: &str =
    "M_L,M_levels,total_cost,err_expectation_L1,err_variance_L1,predicted_bound,replication,wall_ms";

#[inline]
fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Reference moments together with the identity of the run that made them.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub model_hash: String,
    pub seed: u64,
    pub m: usize,
    pub x: Vec<f64>,
    pub moments: MomentField,
}

/// Outcome of one (M_L, replication) sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub m_top: usize,
    pub counts: Vec<usize>,
    pub total_cost: f64,
    pub err_expectation: f64,
    pub err_variance: f64,
    pub predicted_bound: f64,
    /// `None` for replication-averaged rows.
    pub replication: Option<usize>,
    pub wall_ms: f64,
}

impl ConvergenceRecord {
    pub fn csv_row(&self) -> String {
        let counts: Vec<String> = self.counts.iter().map(|c| c.to_string()).collect();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.m_top,
            counts.join(";"),
            fmt(self.total_cost),
            fmt(self.err_expectation),
            fmt(self.err_variance),
            fmt(self.predicted_bound),
            self.replication.map_or("mean".to_string(), |r| r.to_string()),
            fmt(self.wall_ms)
        )
    }
}

fn metadata(cfg: &ExperimentConfig, seed: u64) -> String {
    format!(
        "# seed = {seed}\n# config_hash = {}\n# model_hash = {}\n",
        cfg.raw.hash(),
        cfg.model_hash()
    )
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn top_solver(cfg: &ExperimentConfig, order: usize) -> Result<LevelSolver> {
    LevelSolver::new(&cfg.model, &LevelSpec::full(order, cfg.n_cells, 1.0), cfg.t_end, cfg.cfl)
}

/// Plain Monte Carlo with the reference solver, written to the reference
/// path of `cfg`.
pub fn run_reference(cfg: &ExperimentConfig, workers: Workers) -> Result<Reference> {
    let solver = top_solver(cfg, cfg.reference.order)?;
    let h = SampleHierarchy::new(cfg.reference.seed, cfg.dist.clone(), vec![cfg.reference.m])?;
    let samples = solver.evaluate_prefix(&h, cfg.reference.m, workers)?;
    let mut moments = mc_estimate(&samples, solver.grid.dx())?;
    moments.total_cost = cfg.reference.m as f64;
    let reference = Reference {
        model_hash: cfg.model_hash(),
        seed: cfg.reference.seed,
        m: cfg.reference.m,
        x: solver.grid.centers(),
        moments,
    };
    write_reference(cfg, &reference, &cfg.reference_path())?;
    Ok(reference)
}

fn write_reference(cfg: &ExperimentConfig, r: &Reference, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    write!(w, "{}", metadata(cfg, r.seed))?;
    writeln!(w, "# m_ref = {}", r.m)?;
    writeln!(w, "# cells = {}", r.x.len())?;
    writeln!(w, "x,expectation,variance,ci95_half_width")?;
    let sqrt_m = (r.m as f64).sqrt();
    for i in 0..r.x.len() {
        let e = r.moments.expectation[i];
        let v = r.moments.variance[i];
        writeln!(w, "{},{},{},{}", fmt(r.x[i]), fmt(e), fmt(v), fmt(1.96 * v.sqrt() / sqrt_m))?;
    }
    w.flush()?;
    Ok(())
}

/// Read a reference file and check it belongs to `cfg`.
pub fn load_reference(cfg: &ExperimentConfig, path: &Path) -> Result<Reference> {
    let f = File::open(path)?;
    let mut hash = None;
    let mut seed = None;
    let mut m = None;
    let (mut x, mut e, mut v) = (Vec::new(), Vec::new(), Vec::new());
    for line in BufReader::new(f).lines() {
        let line = line?;
        if let Some(meta) = line.strip_prefix('#') {
            if let Some((k, val)) = meta.split_once('=') {
                let val = val.trim().to_string();
                match k.trim() {
                    "model_hash" => hash = Some(val),
                    "seed" => seed = val.parse().ok(),
                    "m_ref" => m = val.parse().ok(),
                    _ => {}
                }
            }
            continue;
        }
        if line.starts_with('x') || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|err| Error::StaleReference(format!("{}: {err}", path.display())))?;
        if cols.len() < 3 {
            return Err(Error::StaleReference(format!("{}: short row", path.display())));
        }
        x.push(cols[0]);
        e.push(cols[1]);
        v.push(cols[2]);
    }
    let model_hash = hash.ok_or_else(|| Error::StaleReference(format!("{}: no model hash", path.display())))?;
    if model_hash != cfg.model_hash() {
        return Err(Error::StaleReference(format!(
            "{} was made for model {model_hash}, config needs {}",
            path.display(),
            cfg.model_hash()
        )));
    }
    if x.len() != cfg.n_cells {
        return Err(Error::StaleReference(format!("{} cells in reference", x.len())));
    }
    let dx = Grid1D::new(cfg.model.domain().0, cfg.model.domain().1, cfg.n_cells)?.dx();
    Ok(Reference {
        model_hash,
        seed: seed.unwrap_or(cfg.reference.seed),
        m: m.unwrap_or(cfg.reference.m),
        x,
        moments: MomentField {
            dx,
            expectation: e,
            variance: v,
            alphas: Vec::new(),
            counts: vec![m.unwrap_or(cfg.reference.m)],
            total_cost: 0.0,
        },
    })
}

/// Load the reference of `cfg`, computing it first if absent.
pub fn ensure_reference(cfg: &ExperimentConfig, workers: Workers) -> Result<Reference> {
    let path = cfg.reference_path();
    if path.exists() {
        load_reference(cfg, &path)
    } else {
        run_reference(cfg, workers)
    }
}

/// Solver outputs of one replication: per level, samples `0..count`,
/// with the summed run time of each prefix.
struct LevelRuns {
    samples: Vec<Vec<Vec<f64>>>,
    /// cumulative run time in ms: `elapsed[l][k]` covers samples `0..k`
    elapsed: Vec<Vec<f64>>,
}

fn evaluate_levels(
    solvers: &[LevelSolver],
    h: &SampleHierarchy,
    counts: &[usize],
    workers: Workers,
) -> Result<LevelRuns> {
    let tasks: Vec<(usize, usize)> = counts
        .iter()
        .enumerate()
        .flat_map(|(l, &m)| (0..m).map(move |k| (l, k)))
        .collect();
    let out = map_indexed(tasks.len(), workers, |t| {
        let (l, k) = tasks[t];
        let start = Instant::now();
        let u = solvers[l].evaluate(&h.draw(k))?;
        Ok((u, start.elapsed().as_secs_f64() * 1e3))
    })?;
    let mut samples: Vec<Vec<Vec<f64>>> = counts.iter().map(|m| Vec::with_capacity(*m)).collect();
    let mut elapsed: Vec<Vec<f64>> = counts.iter().map(|_| vec![0.0]).collect();
    for ((l, _), (u, ms)) in tasks.into_iter().zip(out) {
        samples[l].push(u);
        let last = *elapsed[l].last().unwrap();
        elapsed[l].push(last + ms);
    }
    Ok(LevelRuns { samples, elapsed })
}

/// Apply the configured estimator to per-level prefixes.
pub fn estimate(cfg: &ExperimentConfig, levels: &[&[Vec<f64>]], dx: f64) -> Result<MomentField> {
    let mut f = match cfg.estimator {
        EstimatorKind::Mc => mc_estimate(levels[0], dx)?,
        EstimatorKind::Mlmc => mlmc_estimate(levels, dx)?,
        EstimatorKind::Momc | EstimatorKind::ApMomcBifidelity => {
            momc_chain(levels, &AlphaChoice::QuasiOptimal(cfg.alpha_mode), dx)?
        }
    };
    let counts: Vec<usize> = levels.iter().map(|l| l.len()).collect();
    f.total_cost = total_cost(&counts, &cfg.costs());
    f.counts = counts;
    Ok(f)
}

fn build_solvers(cfg: &ExperimentConfig) -> Result<Vec<LevelSolver>> {
    cfg.levels
        .iter()
        .map(|l| LevelSolver::new(&cfg.model, l, cfg.t_end, cfg.cfl))
        .collect()
}

/// Bring every sample onto the top grid (identity for single-grid
/// hierarchies).
fn lift(cfg: &ExperimentConfig, runs: &mut LevelRuns) -> Result<()> {
    let n = cfg.n_cells;
    for level in &mut runs.samples {
        for s in level.iter_mut() {
            if s.len() != n {
                *s = prolong(s, n)?;
            }
        }
    }
    Ok(())
}

/// One replication: the estimator at every sweep point, reusing the
/// solver runs of the largest point for all smaller ones.
fn sweep_replication(
    cfg: &ExperimentConfig,
    solvers: &[LevelSolver],
    reference: &Reference,
    r: usize,
    workers: Workers,
) -> Result<Vec<ConvergenceRecord>> {
    let costs = cfg.costs();
    let max_top = *cfg.sweep.iter().max().unwrap();
    let max_counts = allocate_samples(max_top, &costs)?;
    let seed = replication_seed(cfg.seed, r as u64);
    let h = SampleHierarchy::new(seed, cfg.dist.clone(), max_counts.clone())?;
    let mut runs = evaluate_levels(solvers, &h, &max_counts, workers)?;
    lift(cfg, &mut runs)?;
    let dx = reference.moments.dx;
    cfg.sweep
        .iter()
        .map(|&m_top| {
            let start = Instant::now();
            let counts = allocate_samples(m_top, &costs)?;
            let slices: Vec<&[Vec<f64>]> = runs
                .samples
                .iter()
                .zip(&counts)
                .map(|(s, &m)| &s[..m])
                .collect();
            let est = estimate(cfg, &slices, dx)?;
            let bound = hierarchy_diagnostics(&slices, dx).map(|d| d.bound).unwrap_or(f64::NAN);
            let solve_ms: f64 = runs.elapsed.iter().zip(&counts).map(|(e, &m)| e[m]).sum();
            Ok(ConvergenceRecord {
                m_top,
                total_cost: est.total_cost,
                err_expectation: est.expectation_error(&reference.moments)?,
                err_variance: est.variance_error(&reference.moments)?,
                predicted_bound: bound,
                replication: Some(r),
                wall_ms: if cfg.timing {
                    solve_ms + start.elapsed().as_secs_f64() * 1e3
                } else {
                    0.0
                },
                counts,
            })
        })
        .collect()
}

/// Replication-averaged rows, one per sweep point.
pub fn average_records(cfg: &ExperimentConfig, rows: &[ConvergenceRecord]) -> Vec<ConvergenceRecord> {
    cfg.sweep
        .iter()
        .filter_map(|&m| {
            let pts: Vec<&ConvergenceRecord> = rows.iter().filter(|r| r.m_top == m && r.replication.is_some()).collect();
            let first = pts.first()?;
            let n = pts.len() as f64;
            let mean = |f: fn(&ConvergenceRecord) -> f64| pts.iter().map(|r| f(r)).sum::<f64>() / n;
            Some(ConvergenceRecord {
                m_top: m,
                counts: first.counts.clone(),
                total_cost: first.total_cost,
                err_expectation: mean(|r| r.err_expectation),
                err_variance: mean(|r| r.err_variance),
                predicted_bound: mean(|r| r.predicted_bound),
                replication: None,
                wall_ms: mean(|r| r.wall_ms),
            })
        })
        .collect()
}

/// Convergence sweep. Rows are flushed after every replication, so a
/// failure leaves the completed replications on disk.
pub fn run_sweep(cfg: &ExperimentConfig, workers: Workers) -> Result<(PathBuf, Vec<ConvergenceRecord>)> {
    let reference = load_reference(cfg, &cfg.reference_path())?;
    let solvers = build_solvers(cfg)?;
    let path = cfg.out_dir.join(&cfg.sweep_file);
    let mut w = create(&path)?;
    write!(w, "{}", metadata(cfg, cfg.seed))?;
    writeln!(w, "# estimator = {}", cfg.estimator)?;
    writeln!(w, "# replications = {}", cfg.replications)?;
    writeln!(w, "{SWEEP_HEADER}")?;
    let mut rows = Vec::new();
    for r in 0..cfg.replications {
        let rep = match sweep_replication(cfg, &solvers, &reference, r, workers) {
            Ok(rep) => rep,
            Err(e) => {
                w.flush()?;
                return Err(e);
            }
        };
        for row in &rep {
            writeln!(w, "{}", row.csv_row())?;
        }
        w.flush()?;
        rows.extend(rep);
    }
    let avg = average_records(cfg, &rows);
    for row in &avg {
        writeln!(w, "{}", row.csv_row())?;
    }
    w.flush()?;
    rows.extend(avg);
    Ok((path, rows))
}

/// Single deterministic run at the configured `solve.*` input.
pub fn run_solve(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let level = LevelSpec {
        order: cfg.solve.order,
        fidelity: cfg.solve.fidelity,
        n_cells: cfg.n_cells,
        cost: 1.0,
    };
    let ls = LevelSolver::new(&cfg.model, &level, cfg.t_end, cfg.cfl)?;
    let problem = ls
        .spec
        .instantiate(ls.grid.clone(), &cfg.solve.z, Quadrature::for_order(level.order))?;
    let mut solver = Solver::new(&problem, ls.stepper.clone())?;
    let out = solver.advance(problem.state.clone(), cfg.t_end)?;
    let state = out.state;
    let names = problem.model.var_names();
    let pressure = ls.spec.kind == crate::models::ModelKind::BloodFlowElastic;
    let path = cfg.out_dir.join("solution.csv");
    let mut w = create(&path)?;
    writeln!(w, "# seed = {}", cfg.seed)?;
    writeln!(w, "# config_hash = {}", cfg.raw.hash())?;
    writeln!(w, "# model_hash = {}", cfg.model_hash())?;
    writeln!(w, "# z = {:?}", cfg.solve.z)?;
    writeln!(w, "# steps = {}", out.steps)?;
    let mut header = vec!["x".to_string()];
    header.extend(names.iter().map(|s| s.to_string()));
    if pressure {
        header.push("p".into());
    }
    writeln!(w, "{}", header.join(","))?;
    let mut s = [0.0; MAX_VARS];
    for i in 0..state.n_cells() {
        let mut row = vec![fmt(state.grid.center(i))];
        row.extend((0..names.len()).map(|v| fmt(state.get(v, i))));
        if pressure {
            state.state(i, &mut s);
            row.push(fmt(problem.model.pressure(&s[..state.n_vars]).unwrap_or(f64::NAN)));
        }
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(path)
}

/// Hierarchy diagnostics at the largest sweep point of replication 0.
pub fn run_diag(cfg: &ExperimentConfig, workers: Workers) -> Result<(PathBuf, Diagnostics)> {
    let solvers = build_solvers(cfg)?;
    let costs = cfg.costs();
    let max_top = *cfg.sweep.iter().max().unwrap();
    let counts = allocate_samples(max_top, &costs)?;
    let h = SampleHierarchy::new(replication_seed(cfg.seed, 0), cfg.dist.clone(), counts.clone())?;
    let mut runs = evaluate_levels(&solvers, &h, &counts, workers)?;
    lift(cfg, &mut runs)?;
    let slices: Vec<&[Vec<f64>]> = runs.samples.iter().map(|s| s.as_slice()).collect();
    let dx = solvers.last().unwrap().grid.dx();
    let d = hierarchy_diagnostics(&slices, dx)?;
    let est = estimate(cfg, &slices, dx)?;
    let path = cfg.out_dir.join(format!("diag_{}.csv", cfg.estimator));
    let mut w = create(&path)?;
    write!(w, "{}", metadata(cfg, cfg.seed))?;
    writeln!(w, "# predicted_bound = {}", fmt(d.bound))?;
    writeln!(w, "# total_cost = {}", fmt(est.total_cost))?;
    writeln!(w, "level,order,fidelity,cells,M,cost,rho,sigma,tau,xi,alpha_mean")?;
    for (l, spec) in cfg.levels.iter().enumerate() {
        let alpha_mean = if l == 0 || est.alphas.is_empty() {
            f64::NAN
        } else {
            let a = &est.alphas[l - 1];
            a.iter().sum::<f64>() / a.len() as f64
        };
        writeln!(
            w,
            "{l},{},{:?},{},{},{},{},{},{},{},{}",
            spec.order,
            spec.fidelity,
            spec.n_cells,
            d.counts[l],
            fmt(spec.cost),
            fmt(d.rho[l]),
            fmt(d.sigma[l]),
            fmt(d.tau[l]),
            fmt(d.xi[l]),
            fmt(alpha_mean)
        )?;
    }
    w.flush()?;
    Ok((path, d))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(dir: &Path, estimator: &str) -> ExperimentConfig {
        let levels = match estimator {
            "mc" => "levels.0.order = 2\nlevels.0.cost = 4\n",
            _ => "levels.0.order = 1\nlevels.0.cost = 1\nlevels.1.order = 2\nlevels.1.cost = 4\n",
        };
        ExperimentConfig::parse(&format!(
            "model.kind = burgers\nmodel.case = burgers-gaussian\ngrid.cells = 40\ntime.t_end = 0.5\n\
             estimator.kind = {estimator}\n{levels}sweep.m = [4, 8]\nsweep.replications = 2\n\
             reference.m = 16\nreference.order = 2\nseed = 5\noutput.dir = {}\n",
            dir.display()
        ))
        .unwrap()
    }

    #[test]
    fn reference_round_trip_and_staleness() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(dir.path(), "momc");
        let r = run_reference(&cfg, Workers(1)).unwrap();
        let back = load_reference(&cfg, &cfg.reference_path()).unwrap();
        assert_eq!(back.moments.expectation, r.moments.expectation);
        assert_eq!(back.moments.variance, r.moments.variance);
        let other = cfg.with_override("time.t_end", "0.4").unwrap();
        assert!(matches!(
            load_reference(&other, &cfg.reference_path()),
            Err(Error::StaleReference(_))
        ));
    }

    #[test]
    fn sweep_writes_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(dir.path(), "momc");
        run_reference(&cfg, Workers(1)).unwrap();
        let (path, rows) = run_sweep(&cfg, Workers(1)).unwrap();
        assert_eq!(rows.len(), 2 * 2 + 2);
        let text = fs::read_to_string(path).unwrap();
        assert!(text.lines().any(|l| l == SWEEP_HEADER));
        assert!(text.contains("8,32;8,6.4000000000000000e1"));
    }

    #[test]
    fn missing_reference_is_io() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(dir.path(), "mc");
        assert_eq!(run_sweep(&cfg, Workers(1)).unwrap_err().exit_code(), 4);
    }
}
