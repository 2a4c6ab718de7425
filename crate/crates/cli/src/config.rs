//! Sectioned `key = value` configuration with strict key checking.
//!
//! ```text
//! [run]
//! experiment = weights-n2
//! seed = 7
//!
//! [physics]
//! c1sq = 0.3
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::ValueEnum;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Dephasing,
    SolitonFormation,
    TailFit,
    WidthSweep,
    PotentialDynamics,
    BasinMap,
    WeightsN2,
    #[value(name = "weights-nN", alias = "weights-nn")]
    #[serde(rename = "weights-nN")]
    WeightsNN,
    OracleCompare,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Dephasing => "dephasing",
            Experiment::SolitonFormation => "soliton-formation",
            Experiment::TailFit => "tail-fit",
            Experiment::WidthSweep => "width-sweep",
            Experiment::PotentialDynamics => "potential-dynamics",
            Experiment::BasinMap => "basin-map",
            Experiment::WeightsN2 => "weights-n2",
            Experiment::WeightsNN => "weights-nN",
            Experiment::OracleCompare => "oracle-compare",
        }
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Experiment as ValueEnum>::from_str(s, true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Format as ValueEnum>::from_str(s, true)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: `{}`: {}", self.field, self.message),
            None => write!(f, "`{}`: {}", self.field, self.message),
        }
    }
}

fn err(line: Option<usize>, field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

/// Every accepted `section.key`.
pub const KEYS: &[&str] = &[
    "run.experiment",
    "run.seed",
    "run.out",
    "run.format",
    "run.threads",
    "physics.kappa",
    "physics.gamma",
    "physics.t_max",
    "physics.theta0",
    "physics.c1sq",
    "grid.points",
    "grid.length",
    "ensemble.n_trajectories",
    "ensemble.n_states",
    "sweep.kappa_min",
    "sweep.kappa_max",
    "sweep.kappa_points",
    "potential.a",
    "potential.b",
    "potential.x0",
    "basin.resolution",
    "basin.positions",
];

/// Raw `section.key → (value, line)` pairs.
pub type RawConfig = BTreeMap<String, (String, Option<usize>)>;

pub fn parse(text: &str) -> Result<RawConfig, ConfigError> {
    let mut section: Option<String> = None;
    let mut out = RawConfig::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = Some(i + 1);
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err(line_no, line, "unterminated section header"))?
                .trim();
            if !KEYS.iter().any(|k| k.split('.').next() == Some(name)) {
                return Err(err(line_no, name, "unknown section"));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(line_no, line, "expected `key = value`"))?;
        let sec = section
            .as_deref()
            .ok_or_else(|| err(line_no, key.trim(), "key outside of a section"))?;
        let full = format!("{sec}.{}", key.trim());
        if !KEYS.contains(&full.as_str()) {
            return Err(err(line_no, &full, "unknown key"));
        }
        if out.contains_key(&full) {
            return Err(err(line_no, &full, "duplicate key"));
        }
        out.insert(full, (value.trim().to_string(), line_no));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub out: PathBuf,
    pub format: Format,
    pub threads: Option<usize>,
    pub kappa: Option<f64>,
    pub gamma: f64,
    pub t_max: Option<f64>,
    pub theta0: f64,
    pub c1sq: f64,
    pub grid_points: Option<usize>,
    pub grid_length: Option<f64>,
    pub n_trajectories: Option<usize>,
    pub n_states: usize,
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub kappa_points: usize,
    pub potential_a: f64,
    pub potential_b: f64,
    pub x0: f64,
    pub resolution: usize,
    pub positions: Option<[f64; 3]>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Dephasing,
            seed: 1,
            out: PathBuf::from("pointerlab-out"),
            format: Format::Csv,
            threads: None,
            kappa: None,
            gamma: 1.0,
            t_max: None,
            theta0: std::f64::consts::FRAC_PI_4,
            c1sq: 0.3,
            grid_points: None,
            grid_length: None,
            n_trajectories: None,
            n_states: 100,
            kappa_min: 1e-3,
            kappa_max: 1.0,
            kappa_points: 7,
            potential_a: 0.05,
            potential_b: 0.4,
            x0: 2.8,
            resolution: 100,
            positions: None,
        }
    }
}

fn value<T: FromStr>(raw: &RawConfig, key: &str) -> Result<Option<T>, ConfigError> {
    match raw.get(key) {
        None => Ok(None),
        Some((v, line)) => v
            .parse::<T>()
            .map(Some)
            .map_err(|_| err(*line, key, format!("cannot parse `{v}`"))),
    }
}

fn positions(raw: &RawConfig) -> Result<Option<[f64; 3]>, ConfigError> {
    let Some((v, line)) = raw.get("basin.positions") else {
        return Ok(None);
    };
    if v.eq_ignore_ascii_case("saturated") {
        return Ok(None);
    }
    let parts: Vec<f64> = v
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| err(*line, "basin.positions", format!("cannot parse `{v}`")))?;
    let arr: [f64; 3] = parts
        .try_into()
        .map_err(|_| err(*line, "basin.positions", "expected three comma-separated positions"))?;
    Ok(Some(arr))
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let d = Self::default();
        let cfg = Self {
            experiment: value(raw, "run.experiment")?.unwrap_or(d.experiment),
            seed: value(raw, "run.seed")?.unwrap_or(d.seed),
            out: value::<String>(raw, "run.out")?.map(PathBuf::from).unwrap_or(d.out),
            format: value(raw, "run.format")?.unwrap_or(d.format),
            threads: value(raw, "run.threads")?,
            kappa: value(raw, "physics.kappa")?,
            gamma: value(raw, "physics.gamma")?.unwrap_or(d.gamma),
            t_max: value(raw, "physics.t_max")?,
            theta0: value(raw, "physics.theta0")?.unwrap_or(d.theta0),
            c1sq: value(raw, "physics.c1sq")?.unwrap_or(d.c1sq),
            grid_points: value(raw, "grid.points")?,
            grid_length: value(raw, "grid.length")?,
            n_trajectories: value(raw, "ensemble.n_trajectories")?,
            n_states: value(raw, "ensemble.n_states")?.unwrap_or(d.n_states),
            kappa_min: value(raw, "sweep.kappa_min")?.unwrap_or(d.kappa_min),
            kappa_max: value(raw, "sweep.kappa_max")?.unwrap_or(d.kappa_max),
            kappa_points: value(raw, "sweep.kappa_points")?.unwrap_or(d.kappa_points),
            potential_a: value(raw, "potential.a")?.unwrap_or(d.potential_a),
            potential_b: value(raw, "potential.b")?.unwrap_or(d.potential_b),
            x0: value(raw, "potential.x0")?.unwrap_or(d.x0),
            resolution: value(raw, "basin.resolution")?.unwrap_or(d.resolution),
            positions: positions(raw)?,
        };
        Ok(cfg)
    }

    /// Range checks; `lines` maps keys back to the config file for
    /// diagnostics.
    pub fn validate(&self, lines: &RawConfig) -> Result<(), ConfigError> {
        let at = |k: &str| lines.get(k).and_then(|(_, l)| *l);
        let positive = |k: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(err(at(k), k, format!("must be positive and finite, got {v}")))
            }
        };
        if let Some(k) = self.kappa {
            positive("physics.kappa", k)?;
        }
        positive("physics.gamma", self.gamma)?;
        if let Some(t) = self.t_max {
            positive("physics.t_max", t)?;
        }
        if !(0.0..=std::f64::consts::PI).contains(&self.theta0) {
            return Err(err(at("physics.theta0"), "physics.theta0", "must lie in [0, π]"));
        }
        if !(self.c1sq > 0.0 && self.c1sq < 1.0) {
            return Err(err(at("physics.c1sq"), "physics.c1sq", "must lie in (0, 1)"));
        }
        if self.c1sq == 0.5 {
            return Err(err(at("physics.c1sq"), "physics.c1sq", "0.5 is the unstable equal-weight point"));
        }
        if let Some(n) = self.grid_points {
            if n < 8 {
                return Err(err(at("grid.points"), "grid.points", "need at least 8 points"));
            }
        }
        if let Some(l) = self.grid_length {
            positive("grid.length", l)?;
        }
        if let Some(n) = self.n_trajectories {
            if n == 0 {
                return Err(err(at("ensemble.n_trajectories"), "ensemble.n_trajectories", "must be at least 1"));
            }
        }
        if self.n_states == 0 {
            return Err(err(at("ensemble.n_states"), "ensemble.n_states", "must be at least 1"));
        }
        positive("sweep.kappa_min", self.kappa_min)?;
        positive("sweep.kappa_max", self.kappa_max)?;
        if self.kappa_min >= self.kappa_max {
            return Err(err(at("sweep.kappa_max"), "sweep.kappa_max", "must exceed kappa_min"));
        }
        if self.kappa_points < 2 {
            return Err(err(at("sweep.kappa_points"), "sweep.kappa_points", "need at least 2 points"));
        }
        positive("potential.a", self.potential_a)?;
        positive("potential.b", self.potential_b)?;
        if !self.x0.is_finite() {
            return Err(err(at("potential.x0"), "potential.x0", "must be finite"));
        }
        if !(2..=1000).contains(&self.resolution) {
            return Err(err(at("basin.resolution"), "basin.resolution", "must lie in [2, 1000]"));
        }
        if let Some(p) = self.positions {
            if p[0] == p[1] || p[1] == p[2] || p[0] == p[2] || p.iter().any(|v| !v.is_finite()) {
                return Err(err(at("basin.positions"), "basin.positions", "must be three distinct finite values"));
            }
        }
        if self.threads == Some(0) {
            return Err(err(at("run.threads"), "run.threads", "must be at least 1"));
        }
        Ok(())
    }

    /// Canonical `section.key = value` lines of every setting that affects
    /// results. Thread count and output location are excluded.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("run.experiment", self.experiment.name().to_string());
        put("run.seed", self.seed.to_string());
        put("run.format", format!("{:?}", self.format).to_lowercase());
        let opt = |v: Option<f64>| v.map_or("default".to_string(), |x| x.to_string());
        put("physics.kappa", opt(self.kappa));
        put("physics.gamma", self.gamma.to_string());
        put("physics.t_max", opt(self.t_max));
        put("physics.theta0", self.theta0.to_string());
        put("physics.c1sq", self.c1sq.to_string());
        put("grid.points", self.grid_points.map_or("default".into(), |v| v.to_string()));
        put("grid.length", opt(self.grid_length));
        put(
            "ensemble.n_trajectories",
            self.n_trajectories.map_or("default".into(), |v| v.to_string()),
        );
        put("ensemble.n_states", self.n_states.to_string());
        put("sweep.kappa_min", self.kappa_min.to_string());
        put("sweep.kappa_max", self.kappa_max.to_string());
        put("sweep.kappa_points", self.kappa_points.to_string());
        put("potential.a", self.potential_a.to_string());
        put("potential.b", self.potential_b.to_string());
        put("potential.x0", self.x0.to_string());
        put("basin.resolution", self.resolution.to_string());
        put(
            "basin.positions",
            self.positions
                .map_or("saturated".into(), |p| format!("{},{},{}", p[0], p[1], p[2])),
        );
        m
    }

    /// Config file text that reproduces this configuration.
    pub fn to_config_text(&self) -> String {
        let mut out = String::new();
        let mut current = String::new();
        for (k, v) in self.echo() {
            if v == "default" {
                continue;
            }
            let (sec, key) = k.split_once('.').unwrap_or(("run", &k));
            if sec != current {
                if !out.is_empty() {
                    out.push('\n');
                }
                out.push_str(&format!("[{sec}]\n"));
                current = sec.to_string();
            }
            out.push_str(&format!("{key} = {v}\n"));
        }
        out
    }

    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.echo() {
            h.update(format!("{k}={v}\n"));
        }
        hex(&h.finalize())
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
