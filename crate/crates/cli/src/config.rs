//! Experiment configuration, read from JSON or from `key = value` lines.

use nalgebra::DMatrix;
use noisyctl_core::sdp::SolverSettings;
use noisyctl_core::LtiSystem;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("bad JSON config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Example1,
    Thirdorder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemSpec {
    Preset(Preset),
    /// Row-major matrices.
    Matrices { a: Vec<Vec<f64>>, b: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemSpec,
    pub epsilons: Vec<f64>,
    pub horizons: Vec<usize>,
    pub batch: usize,
    pub seed: u64,
    pub repeats: usize,
    pub feas_tol: f64,
    pub max_newton: usize,
    /// Points per exported boundary polyline.
    pub polyline_points: usize,
    /// Grid steps per axis for membership maps.
    pub grid_steps: usize,
    /// Allowed energy solve-time max/min over the horizon grid.
    pub energy_time_spread: f64,
    /// Allowed Hausdorff distance between consecutive aggregate-set
    /// boundaries of the sweep, relative to the boundary diameter.
    pub boundary_drift_tol: f64,
    pub out_dir: PathBuf,
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            system: SystemSpec::Preset(Preset::Thirdorder),
            epsilons: (1..=20).map(|k| k as f64 / 20.0).collect(),
            horizons: (1..=10).map(|k| k * 100).collect(),
            batch: 100,
            seed: 0,
            repeats: 5,
            feas_tol: 1e-8,
            max_newton: 200,
            polyline_points: 200,
            grid_steps: 101,
            energy_time_spread: 3.0,
            boundary_drift_tol: 0.05,
            out_dir: PathBuf::from("out"),
            workers: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        let cfg = if text.trim_start().starts_with('{') { serde_json::from_str(&text)? } else { Self::parse_kv(&text)? };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `key = value` per line, `#` starts a comment, lists are comma separated.
    pub fn parse_kv(text: &str) -> Result<Self, ConfigError> {
        let mut map = serde_json::Map::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| ConfigError::Line { line: i + 1, msg: msg.into() };
            let (k, v) = line.split_once('=').ok_or_else(|| err("expected key = value"))?;
            let (k, v) = (k.trim(), v.trim());
            let value = match k {
                "system" => serde_json::Value::String(v.into()),
                "out_dir" => serde_json::Value::String(v.into()),
                "epsilons" | "horizons" => {
                    let items: Result<Vec<serde_json::Value>, _> =
                        v.split(',').filter(|s| !s.trim().is_empty()).map(|s| serde_json::from_str(s.trim())).collect();
                    serde_json::Value::Array(items.map_err(|_| err("bad list entry"))?)
                }
                _ => serde_json::from_str(v).map_err(|_| err("bad value"))?,
            };
            map.insert(k.into(), value);
        }
        Ok(serde_json::from_value(serde_json::Value::Object(map))?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.into()));
        if self.epsilons.is_empty() || self.horizons.is_empty() {
            return bad("epsilon and horizon grids must be nonempty");
        }
        if self.epsilons.iter().any(|e| !e.is_finite() || *e < 0.0) {
            return bad("epsilons must be finite and nonnegative");
        }
        if self.horizons.contains(&0) {
            return bad("horizons must be positive");
        }
        if self.batch == 0 || self.repeats == 0 {
            return bad("batch and repeats must be positive");
        }
        if !(self.feas_tol > 0.0) || self.max_newton == 0 {
            return bad("feas_tol and max_newton must be positive");
        }
        if !(self.energy_time_spread >= 1.0) || !(self.boundary_drift_tol > 0.0) {
            return bad("energy_time_spread must be at least 1 and boundary_drift_tol positive");
        }
        if self.polyline_points < 3 || self.grid_steps < 2 {
            return bad("need at least 3 polyline points and 2 grid steps");
        }
        self.system()?;
        Ok(())
    }

    pub fn system(&self) -> Result<LtiSystem, ConfigError> {
        match &self.system {
            SystemSpec::Preset(Preset::Example1) => Ok(LtiSystem::example1()),
            SystemSpec::Preset(Preset::Thirdorder) => Ok(LtiSystem::third_order()),
            SystemSpec::Matrices { a, b } => {
                let m = |rows: &Vec<Vec<f64>>| -> Result<DMatrix<f64>, ConfigError> {
                    let c = rows.first().map_or(0, Vec::len);
                    if rows.is_empty() || c == 0 || rows.iter().any(|r| r.len() != c) {
                        return Err(ConfigError::Invalid("ragged or empty system matrix".into()));
                    }
                    Ok(DMatrix::from_row_iterator(rows.len(), c, rows.iter().flatten().copied()))
                };
                LtiSystem::new(m(a)?, m(b)?).map_err(|e| ConfigError::Invalid(e.to_string()))
            }
        }
    }

    pub fn solver(&self) -> SolverSettings {
        SolverSettings { feas_tol: self.feas_tol, max_newton: self.max_newton, ..SolverSettings::default() }
    }

    /// SHA-256 of the canonical JSON form, ignoring where and how wide it runs.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        c.workers = 0;
        let json = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}
