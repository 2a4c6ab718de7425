//! Experiment harness for pointerlab: config parsing, experiment drivers and
//! reproducible artifact output.

pub mod config;
pub mod experiments;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{ConfigError, Experiment, ExperimentConfig, Format, RawConfig};

#[derive(Debug, Parser)]
#[command(name = "pointerlab", version, about = "Pointer-state dynamics experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and write its artifacts.
    Run(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub experiment: Option<Experiment>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub kappa: Option<f64>,
    /// Number of trajectories.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub c1sq: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Simulation(#[from] pointerlab::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            _ => 1,
        }
    }
}

impl RunArgs {
    /// Merges the config file with command-line overrides.
    pub fn resolve(&self) -> Result<ExperimentConfig, RunError> {
        let mut raw: RawConfig = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ConfigError {
                    line: None,
                    field: "config".into(),
                    message: format!("{}: {e}", p.display()),
                })?;
                config::parse(&text)?
            }
            None => RawConfig::new(),
        };
        let mut set = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                raw.insert(k.to_string(), (v, None));
            }
        };
        set("run.experiment", self.experiment.map(|e| e.name().to_string()));
        set("run.seed", self.seed.map(|v| v.to_string()));
        set("run.out", self.out.as_ref().map(|p| p.display().to_string()));
        set("run.format", self.format.map(|f| format!("{f:?}").to_lowercase()));
        set("run.threads", self.threads.map(|v| v.to_string()));
        set("physics.kappa", self.kappa.map(|v| v.to_string()));
        set("ensemble.n_trajectories", self.n.map(|v| v.to_string()));
        set("physics.c1sq", self.c1sq.map(|v| v.to_string()));
        let cfg = ExperimentConfig::from_raw(&raw)?;
        cfg.validate(&raw)?;
        Ok(cfg)
    }
}

/// Runs an experiment inside a pool of `cfg.threads` workers.
pub fn execute(cfg: &ExperimentConfig) -> Result<output::Manifest, RunError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| std::io::Error::other(e.to_string()))?;
    let artifacts = pool.install(|| experiments::run(cfg))?;
    Ok(output::write_artifacts(cfg, &artifacts)?)
}
