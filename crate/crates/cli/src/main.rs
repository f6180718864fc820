//! `momc`: batch driver for multi-order Monte Carlo convergence studies.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use momc::harness::{self, ExperimentConfig, RawConfig};
use momc::parallel::Workers;
use momc::Error;

#[derive(Parser)]
#[command(name = "momc", version, about = "Multi-order Monte Carlo experiments for relaxation PDEs")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Single deterministic run at `solve.z`.
    Solve(Common),
    /// Plain Monte Carlo reference with the highest-order solver.
    Reference(Common),
    /// Error-vs-samples / error-vs-cost sweep against the stored reference.
    Sweep(Common),
    /// Per-level correlation diagnostics and the predicted error bound.
    Diag(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment file (flat `key = value` or JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Override the number of sweep replications.
    #[arg(long)]
    replications: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        let mut raw = RawConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            raw.set("seed", s.to_string());
        }
        if let Some(o) = &self.out {
            raw.set("output.dir", o.display().to_string());
        }
        if let Some(r) = self.replications {
            raw.set("sweep.replications", r.to_string());
        }
        ExperimentConfig::from_raw(raw)
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.verb {
        Verb::Solve(c) => {
            let cfg = c.load()?;
            let path = harness::run_solve(&cfg)?;
            println!("wrote {}", path.display());
        }
        Verb::Reference(c) => {
            let cfg = c.load()?;
            let r = harness::run_reference(&cfg, Workers(c.workers))?;
            println!(
                "wrote {} (M = {}, model {})",
                cfg.reference_path().display(),
                r.m,
                &r.model_hash[..12]
            );
        }
        Verb::Sweep(c) => {
            let cfg = c.load()?;
            let (path, rows) = harness::run_sweep(&cfg, Workers(c.workers))?;
            for r in rows.iter().filter(|r| r.replication.is_none()) {
                println!(
                    "M_L = {:>6}  cost = {:>12.1}  err_E = {:.4e}  err_Var = {:.4e}",
                    r.m_top, r.total_cost, r.err_expectation, r.err_variance
                );
            }
            println!("wrote {}", path.display());
        }
        Verb::Diag(c) => {
            let cfg = c.load()?;
            let (path, d) = harness::run_diag(&cfg, Workers(c.workers))?;
            println!("predicted bound {:.4e}", d.bound);
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("momc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
