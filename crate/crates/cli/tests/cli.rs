//! End-to-end runs of the `momc` binary.

use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "model.kind = burgers
model.case = burgers-gaussian
grid.cells = 40
time.t_end = 0.5
estimator.kind = momc
levels.0.order = 1
levels.0.cost = 1
levels.1.order = 3
levels.1.cost = 3
sweep.m = [4, 8]
sweep.replications = 2
reference.order = 3
reference.m = 32
seed = 11
";

fn momc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_momc"))
        .args(args)
        .output()
        .expect("spawn momc")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("exp.conf");
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn run_all(cfg: &str, out: &Path, workers: &str) -> Vec<Vec<u8>> {
    let out_s = out.display().to_string();
    for verb in ["reference", "sweep", "diag"] {
        let o = momc(&[verb, "--config", cfg, "--out", &out_s, "--workers", workers]);
        assert!(o.status.success(), "{verb}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let mut names: Vec<_> = std::fs::read_dir(out).unwrap().map(|e| e.unwrap().path()).collect();
    names.sort();
    names.iter().map(|p| std::fs::read(p).unwrap()).collect()
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let one = run_all(&cfg, &dir.path().join("w1"), "1");
    let four = run_all(&cfg, &dir.path().join("w4"), "4");
    assert_eq!(one.len(), 3);
    assert_eq!(one, four);
}

#[test]
fn solve_writes_a_profile() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL}solve.z = [0.25]\n"));
    let out = dir.path().join("o");
    let o = momc(&["solve", "--config", &cfg, "--out", &out.display().to_string()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("solution.csv")).unwrap();
    let rows = text.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 41, "header plus one row per cell");
}

#[test]
fn bad_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("burgers-gaussian", "no-such-case"));
    let o = momc(&["solve", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unreadable_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = momc(&["solve", "--config", &dir.path().join("absent.conf").display().to_string()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_without_reference_exits_with_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("empty").display().to_string();
    let o = momc(&["sweep", "--config", &cfg, "--out", &out]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn seed_override_changes_the_reference() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let read = |seed: &str| {
        let out = dir.path().join(seed);
        let o = momc(&["reference", "--config", &cfg, "--out", &out.display().to_string(), "--seed", seed]);
        assert!(o.status.success());
        std::fs::read(out.join("reference.csv")).unwrap()
    };
    assert_ne!(read("1"), read("2"));
}
