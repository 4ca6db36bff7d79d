//! Configuration-driven experiment runner for `atlas-core`.
//!
//! A run reads a TOML config (see [`config`]), validates it completely,
//! writes the resolved snapshot, runs the experiment on a worker pool and
//! leaves a directory with CSV/JSONL tables plus `summary.json`. The same
//! config and seed produce byte-identical files regardless of the number of
//! workers.

// `!(x > y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod doubling;
pub mod error;
pub mod experiments;
pub mod output;

use std::path::{Path, PathBuf};

use atlas_core::NoiseStream;
use serde::Serialize;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::LabError;

use output::{RunDir, SNAPSHOT_FILE, SUMMARY_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run(ExperimentKind),
    DoublingCheck,
    ValidateConfig,
}

#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Validated(String),
    Written(PathBuf),
}

#[derive(Serialize)]
struct Summary<'a, T: Serialize> {
    kind: &'a str,
    seed: u64,
    report: &'a T,
}

/// Loads, applies the command-line overrides and resolves a config.
pub fn prepare(inv: &Invocation) -> Result<ExperimentConfig, LabError> {
    let mut cfg = ExperimentConfig::load(&inv.config)?;
    if let Command::Run(kind) = inv.command {
        if cfg.kind != kind {
            return Err(LabError::Config(format!("config describes a {} experiment, not {kind}", cfg.kind)));
        }
    }
    if let Some(seed) = inv.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &inv.out {
        cfg.out = Some(out.clone());
    }
    cfg.resolve()
}

fn default_out(cfg: &ExperimentConfig, label: &str) -> PathBuf {
    PathBuf::from("runs").join(format!("{label}-seed{}", cfg.seed))
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, LabError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(LabError::Config("--workers must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| LabError::Io(std::io::Error::other(e)))?;
    Ok(pool.install(f))
}

fn write_snapshot(cfg: &ExperimentConfig, dir: &RunDir) -> Result<(), LabError> {
    let mut snapshot = cfg.clone();
    snapshot.out = None;
    dir.write_string(SNAPSHOT_FILE, &snapshot.to_toml())
}

/// Runs one CLI invocation.
pub fn execute(inv: &Invocation) -> Result<Outcome, LabError> {
    let cfg = prepare(inv)?;
    if inv.command == Command::ValidateConfig {
        return Ok(Outcome::Validated(cfg.to_toml()));
    }
    let label = match inv.command {
        Command::DoublingCheck => "doubling-check",
        _ => cfg.kind.name(),
    };
    let target = cfg.out.clone().unwrap_or_else(|| default_out(&cfg, label));
    let dir = RunDir::create(&target)?;
    write_snapshot(&cfg, &dir)?;
    let noise = NoiseStream::new(cfg.seed, 0);
    match inv.command {
        Command::DoublingCheck => {
            let report = with_pool(inv.workers, || doubling::doubling_check(&cfg, &noise))??;
            report.write(&dir)?;
            dir.write_json(SUMMARY_FILE, &Summary { kind: label, seed: cfg.seed, report: &report })?;
        }
        _ => {
            let report = with_pool(inv.workers, || experiments::run(&cfg, &noise))??;
            experiments::write_outputs(&cfg, &report, &dir)?;
            dir.write_json(SUMMARY_FILE, &Summary { kind: label, seed: cfg.seed, report: &report })?;
        }
    }
    Ok(Outcome::Written(dir.commit()?))
}

/// Reads the summary of a finished run.
pub fn read_summary(dir: &Path) -> Result<serde_json::Value, LabError> {
    let text = std::fs::read_to_string(dir.join(SUMMARY_FILE))?;
    Ok(serde_json::from_str(&text)?)
}
