//! Experiment configuration: flat `key = value` text with dotted keys, or
//! an equivalent JSON document whose nested objects flatten to the same
//! keys.
//!
//! ```text
//! model.kind = burgers
//! model.case = burgers-gaussian
//! grid.cells = 200
//! estimator.kind = momc
//! levels.0.order = 1
//! levels.0.cost = 1
//! sweep.m = [25, 50, 100]
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimators::AlphaMode;
use crate::levels::{Fidelity, LevelSpec};
use crate::mesh::Boundary;
use crate::models::{Case, ModelKind, ModelSpec};
use crate::sampling::{DistributionSpec, Uniform};
use crate::time::DEFAULT_CFL;

/// Raw key/value pairs, sorted by key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pub entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse_flat(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = strip_comment(line).trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let k = k.trim();
            if k.is_empty() || k.contains(char::is_whitespace) {
                return Err(Error::Config(format!("line {}: bad key '{k}'", lineno + 1)));
            }
            let v = unquote(v.trim());
            if entries.insert(k.to_string(), v).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key '{k}'", lineno + 1)));
            }
        }
        Ok(RawConfig { entries })
    }

    pub fn parse_json(text: &str) -> Result<Self> {
        let v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("json: {e}")))?;
        let mut entries = BTreeMap::new();
        flatten("", &v, &mut entries)?;
        Ok(RawConfig { entries })
    }

    /// Parse by content: a leading `{` selects JSON.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            Self::parse_json(text)
        } else {
            Self::parse_flat(text)
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    /// Canonical text: one sorted `key = value` line per entry.
    pub fn canonical(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Hash of the canonical text without `output.dir`: where results are
    /// written does not change them.
    pub fn hash(&self) -> String {
        let text: String = self
            .entries
            .iter()
            .filter(|(k, _)| k.as_str() != "output.dir")
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect();
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| Error::Config(format!("{key} = '{v}': {e}")))
            })
            .transpose()
    }

    fn required<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.parsed(key)?
            .ok_or_else(|| Error::Config(format!("missing key '{key}'")))
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key).map(|v| parse_list(key, v)).transpose()
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn unquote(v: &str) -> String {
    let b = v.as_bytes();
    if b.len() >= 2 && (b[0] == b'"' && b[b.len() - 1] == b'"' || b[0] == b'\'' && b[b.len() - 1] == b'\'') {
        v[1..v.len() - 1].to_string()
    } else {
        v.to_string()
    }
}

fn flatten(prefix: &str, v: &serde_json::Value, out: &mut BTreeMap<String, String>) -> Result<()> {
    use serde_json::Value;
    let join = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                flatten(&join(k), x, out)?;
            }
        }
        Value::Array(items) if items.iter().any(|x| x.is_object()) => {
            // arrays of tables index like levels.0.order
            for (i, x) in items.iter().enumerate() {
                flatten(&join(&i.to_string()), x, out)?;
            }
        }
        Value::Array(items) => {
            let parts: Vec<String> = items.iter().map(scalar).collect::<Result<_>>()?;
            out.insert(prefix.to_string(), format!("[{}]", parts.join(", ")));
        }
        other => {
            out.insert(prefix.to_string(), scalar(other)?);
        }
    }
    Ok(())
}

fn scalar(v: &serde_json::Value) -> Result<String> {
    use serde_json::Value;
    Ok(match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Null => String::new(),
        _ => return Err(Error::Config(format!("nested value {v} not allowed here"))),
    })
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let inner = v
        .trim()
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .unwrap_or(v);
    inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|e| Error::Config(format!("{key}: '{s}': {e}")))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Mc,
    Mlmc,
    Momc,
    ApMomcBifidelity,
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mc" => Ok(EstimatorKind::Mc),
            "mlmc" => Ok(EstimatorKind::Mlmc),
            "momc" => Ok(EstimatorKind::Momc),
            "apmomc-bifidelity" | "bifidelity" => Ok(EstimatorKind::ApMomcBifidelity),
            _ => Err(Error::Config(format!("unknown estimator '{s}'"))),
        }
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EstimatorKind::Mc => "mc",
            EstimatorKind::Mlmc => "mlmc",
            EstimatorKind::Momc => "momc",
            EstimatorKind::ApMomcBifidelity => "apmomc-bifidelity",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSpec {
    pub order: usize,
    pub m: usize,
    pub seed: u64,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveSpec {
    pub z: Vec<f64>,
    pub order: usize,
    pub fidelity: Fidelity,
}

/// A fully validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub raw: RawConfig,
    pub model: ModelSpec,
    pub dist: DistributionSpec,
    pub n_cells: usize,
    pub t_end: f64,
    pub cfl: f64,
    pub estimator: EstimatorKind,
    pub alpha_mode: AlphaMode,
    /// Deepest (cheapest) level first.
    pub levels: Vec<LevelSpec>,
    pub sweep: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    pub reference: ReferenceSpec,
    pub solve: SolveSpec,
    pub out_dir: PathBuf,
    pub sweep_file: String,
    pub timing: bool,
}

/// Seed stream of the reference run, disjoint from the sweep streams.
const REFERENCE_STREAM: u64 = 0x5eed_0000_0000_0001;

impl ExperimentConfig {
    pub fn from_raw(raw: RawConfig) -> Result<Self> {
        let kind: ModelKind = raw.required("model.kind")?;
        let case: Case = raw.required("model.case")?;
        let mut model = ModelSpec::new(kind, case);
        if let Some(b) = raw.parsed::<Boundary>("model.boundary")? {
            model.boundary = b;
        }
        macro_rules! opt {
            ($key:literal, $field:expr) => {
                if let Some(v) = raw.parsed($key)? {
                    $field = v;
                }
            };
        }
        opt!("model.froude", model.froude);
        opt!("model.eps", model.eps);
        opt!("model.a_factor", model.a_factor);
        opt!("model.rho", model.rho);
        opt!("model.h0", model.h0);
        opt!("model.scales.length", model.scales.length);
        opt!("model.scales.time", model.scales.time);
        opt!("model.scales.density", model.scales.density);
        opt!("model.scales.area", model.scales.area);
        opt!("model.scales.viscosity", model.scales.viscosity);
        model.tau_override = raw.parsed("model.tau")?;
        model.prepared = raw.parsed("model.prepared")?.unwrap_or(false);
        model.validate().map_err(as_config)?;

        let (lo, hi) = case.z_support();
        let bounds: Vec<f64> = raw.list("model.z")?.unwrap_or_else(|| vec![lo, hi]);
        if bounds.len() % 2 != 0 || bounds.is_empty() {
            return Err(Error::Config("model.z needs pairs of bounds".into()));
        }
        let dims = bounds
            .chunks(2)
            .map(|c| Uniform::new(c[0], c[1]))
            .collect::<Result<Vec<_>>>()
            .map_err(as_config)?;
        if dims[0].a < lo || dims[0].b > hi {
            return Err(Error::Config(format!(
                "z range ({}, {}) exceeds support [{lo}, {hi}]",
                dims[0].a, dims[0].b
            )));
        }
        let dist = DistributionSpec::new(dims).map_err(as_config)?;

        let n_cells: usize = raw.required("grid.cells")?;
        let t_end: f64 = raw.parsed("time.t_end")?.unwrap_or(case.default_t_end());
        let cfl: f64 = raw.parsed("time.cfl")?.unwrap_or(DEFAULT_CFL);
        if !(t_end >= 0.0) || !t_end.is_finite() {
            return Err(Error::Config(format!("time.t_end = {t_end}")));
        }
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::Config(format!("time.cfl = {cfl}")));
        }

        let estimator: EstimatorKind = raw.required("estimator.kind")?;
        let alpha_mode: AlphaMode = raw.parsed("estimator.alpha")?.unwrap_or_default();

        let mut levels = Vec::new();
        while let Some(order) = raw.parsed::<usize>(&format!("levels.{}.order", levels.len()))? {
            let l = levels.len();
            let cost: f64 = raw.required(&format!("levels.{l}.cost"))?;
            let cells: usize = raw.parsed(&format!("levels.{l}.cells"))?.unwrap_or(n_cells);
            let fidelity: Fidelity = raw
                .parsed(&format!("levels.{l}.fidelity"))?
                .unwrap_or(Fidelity::Full);
            let spec = LevelSpec {
                order,
                fidelity,
                n_cells: cells,
                cost,
            };
            spec.validate()?;
            levels.push(spec);
        }
        if levels.is_empty() {
            return Err(Error::Config("no levels (levels.0.order missing)".into()));
        }
        check_levels(estimator, &levels, n_cells, &model)?;

        let sweep: Vec<usize> = raw
            .list("sweep.m")?
            .ok_or_else(|| Error::Config("missing key 'sweep.m'".into()))?;
        if sweep.is_empty() || sweep.iter().any(|m| *m < 2) {
            return Err(Error::Config("sweep.m must list counts >= 2".into()));
        }
        let replications: usize = raw.parsed("sweep.replications")?.unwrap_or(1);
        if replications == 0 {
            return Err(Error::Config("sweep.replications must be positive".into()));
        }
        let seed: u64 = raw.parsed("seed")?.unwrap_or(0);

        let top_order = levels.iter().map(|l| l.order).max().unwrap_or(1);
        let ref_order: usize = raw.parsed("reference.order")?.unwrap_or(top_order);
        if ref_order < top_order || ref_order > 3 {
            return Err(Error::Config(format!(
                "reference.order {ref_order} below the highest level order {top_order}"
            )));
        }
        let m_ref: usize = raw.required("reference.m")?;
        let max_sweep = *sweep.iter().max().unwrap();
        if m_ref < max_sweep {
            return Err(Error::Config(format!("reference.m {m_ref} < largest sweep M {max_sweep}")));
        }
        let ref_seed: u64 = raw
            .parsed("reference.seed")?
            .unwrap_or_else(|| crate::sampling::replication_seed(seed, REFERENCE_STREAM));
        let out_dir: PathBuf = raw.parsed("output.dir")?.unwrap_or_else(|| PathBuf::from("out"));
        let ref_path: PathBuf = raw
            .parsed("reference.path")?
            .unwrap_or_else(|| PathBuf::from("reference.csv"));

        let solve = SolveSpec {
            z: raw
                .list("solve.z")?
                .unwrap_or_else(|| dist.dims.iter().map(|u| u.mean()).collect()),
            order: raw.parsed("solve.order")?.unwrap_or(top_order),
            fidelity: raw.parsed("solve.fidelity")?.unwrap_or(Fidelity::Full),
        };

        Ok(ExperimentConfig {
            sweep_file: raw
                .parsed("output.sweep")?
                .unwrap_or_else(|| format!("sweep_{estimator}.csv")),
            timing: raw.parsed("output.timing")?.unwrap_or(false),
            raw,
            model,
            dist,
            n_cells,
            t_end,
            cfl,
            estimator,
            alpha_mode,
            levels,
            sweep,
            replications,
            seed,
            reference: ReferenceSpec {
                order: ref_order,
                m: m_ref,
                seed: ref_seed,
                path: ref_path,
            },
            solve,
            out_dir,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_raw(RawConfig::load(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_raw(RawConfig::parse(text)?)
    }

    /// Re-validate after changing raw entries.
    pub fn with_override(&self, key: &str, value: impl Into<String>) -> Result<Self> {
        let mut raw = self.raw.clone();
        raw.set(key, value);
        Self::from_raw(raw)
    }

    pub fn costs(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.cost).collect()
    }

    pub fn reference_path(&self) -> PathBuf {
        if self.reference.path.is_absolute() {
            self.reference.path.clone()
        } else {
            self.out_dir.join(&self.reference.path)
        }
    }

    /// Hash of everything that determines the reference solution.
    pub fn model_hash(&self) -> String {
        let text = format!(
            "{:?}|{:?}|cells={}|t_end={:?}|cfl={:?}|order={}|m={}|seed={}",
            self.model,
            self.dist,
            self.n_cells,
            self.t_end,
            self.cfl,
            self.reference.order,
            self.reference.m,
            self.reference.seed
        );
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

fn check_levels(kind: EstimatorKind, levels: &[LevelSpec], n_cells: usize, model: &ModelSpec) -> Result<()> {
    let top = levels.last().unwrap();
    if top.n_cells != n_cells {
        return Err(Error::Config(format!(
            "top level has {} cells, grid.cells = {n_cells}",
            top.n_cells
        )));
    }
    let full = |l: &LevelSpec| l.fidelity == Fidelity::Full;
    match kind {
        EstimatorKind::Mc => {
            if levels.len() != 1 || !full(top) {
                return Err(Error::Config("mc takes exactly one full-model level".into()));
            }
        }
        EstimatorKind::Momc => {
            if !levels.iter().all(full) || levels.iter().any(|l| l.n_cells != n_cells) {
                return Err(Error::Config("momc levels must be full-model on one grid".into()));
            }
            if levels.windows(2).any(|w| w[0].order >= w[1].order) {
                return Err(Error::Config("momc level orders must increase".into()));
            }
        }
        EstimatorKind::Mlmc => {
            if !levels.iter().all(full) {
                return Err(Error::Config("mlmc levels must be full-model".into()));
            }
            for w in levels.windows(2) {
                if w[1].n_cells % w[0].n_cells != 0 || w[1].n_cells < w[0].n_cells {
                    return Err(Error::Config(format!(
                        "mlmc grids {} and {} are not nested",
                        w[0].n_cells, w[1].n_cells
                    )));
                }
            }
        }
        EstimatorKind::ApMomcBifidelity => {
            let (bottom, rest) = levels.split_first().unwrap();
            if bottom.fidelity != Fidelity::Reduced || bottom.order != 1 {
                return Err(Error::Config("bi-fidelity needs a reduced order-1 level first".into()));
            }
            if rest.is_empty() || !rest.iter().all(full) {
                return Err(Error::Config("bi-fidelity needs full-model levels above the reduced one".into()));
            }
            if rest.windows(2).any(|w| w[0].order >= w[1].order) {
                return Err(Error::Config("level orders must increase".into()));
            }
            if levels.iter().any(|l| l.n_cells != n_cells) {
                return Err(Error::Config("bi-fidelity levels share one grid".into()));
            }
            model.reduced().map_err(as_config)?;
        }
    }
    if levels.windows(2).any(|w| w[1].cost < w[0].cost) {
        return Err(Error::Config("level costs must not decrease".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BURGERS: &str = "
        # three-order hierarchy
        model.kind = burgers
        model.case = burgers-gaussian
        grid.cells = 200
        estimator.kind = momc
        levels.0.order = 1
        levels.0.cost = 1
        levels.1.order = 2
        levels.1.cost = 4
        levels.2.order = 3
        levels.2.cost = 9
        sweep.m = [25, 50, 100]
        sweep.replications = 20
        reference.m = 2000
        seed = 42
    ";

    #[test]
    fn flat_config() {
        let c = ExperimentConfig::parse(BURGERS).unwrap();
        assert_eq!(c.levels.len(), 3);
        assert_eq!(c.sweep, vec![25, 50, 100]);
        assert_eq!(c.costs(), vec![1.0, 4.0, 9.0]);
        assert_eq!(c.t_end, 2.5);
        assert_eq!(c.reference.order, 3);
        assert_eq!(c.dist.dims[0], Uniform::new(-1.0, 1.0).unwrap());
    }

    #[test]
    fn json_mirror_matches() {
        let json = r#"{
            "model": {"kind": "burgers", "case": "burgers-gaussian"},
            "grid": {"cells": 200},
            "estimator": {"kind": "momc"},
            "levels": [{"order": 1, "cost": 1}, {"order": 2, "cost": 4}, {"order": 3, "cost": 9}],
            "sweep": {"m": [25, 50, 100], "replications": 20},
            "reference": {"m": 2000},
            "seed": 42
        }"#;
        let a = ExperimentConfig::parse(json).unwrap();
        let b = ExperimentConfig::parse(BURGERS).unwrap();
        assert_eq!(a.levels, b.levels);
        assert_eq!(a.sweep, b.sweep);
        assert_eq!(a.model_hash(), b.model_hash());
        assert_eq!(a.raw.hash(), b.raw.hash());
    }

    #[test]
    fn invalid_configs() {
        let bad = |k: &str, v: &str| {
            let mut raw = RawConfig::parse(BURGERS).unwrap();
            raw.set(k, v);
            ExperimentConfig::from_raw(raw).unwrap_err()
        };
        assert!(matches!(bad("sweep.m", "[]"), Error::Config(_)));
        assert!(matches!(bad("reference.m", "50"), Error::Config(_)));
        assert!(matches!(bad("levels.1.order", "1"), Error::Config(_)));
        assert!(matches!(bad("estimator.kind", "magic"), Error::Config(_)));
        assert!(matches!(bad("model.case", "blood-test1"), Error::Config(_)));
        assert!(matches!(bad("reference.order", "2"), Error::Config(_)));
        assert!(RawConfig::parse_flat("a = 1\na = 2").is_err());
        assert!(RawConfig::parse_flat("no equals sign").is_err());
    }

    #[test]
    fn model_hash_tracks_parameters() {
        let a = ExperimentConfig::parse(BURGERS).unwrap();
        let b = a.with_override("time.t_end", "2.0").unwrap();
        assert_ne!(a.model_hash(), b.model_hash());
        // estimator settings do not touch the reference
        let c = a.with_override("sweep.replications", "3").unwrap();
        assert_eq!(a.model_hash(), c.model_hash());
    }
}
