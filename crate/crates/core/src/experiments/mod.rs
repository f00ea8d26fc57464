//! Config-driven experiment runner: TOML sections in, `curves.csv`,
//! `summary.csv` and `meta.json` out.

mod config;
mod runners;
mod table;

pub use config::{
    emit_config, emit_configs, parse_config, parse_configs, BoundaryFixedEps, BoundaryScaledEps, DaviesConcentration,
    EpsilonRule, EpsilonRuleKind, ExperimentConfig, ExperimentKind, GridParams, LogicalBundle, LogicalParams,
    LogicalScaling, MomentChecks, OracleChecks, ProtectedSeparation, RunParams, SkinBundles, SkinGapScaling,
    SkinParams, DEFAULT_SEED,
};
pub use runners::{derive_seed, logical_fast_state, oracle_models, rank_two_check};
pub use table::{emit_csv, emit_json, format_real, Cell, ResultTable};

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },
    #[error("unknown config keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("output error: {0}")]
    Emit(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Mixing(#[from] crate::mixing::MixingError),
    #[error(transparent)]
    Model(#[from] crate::models::ModelError),
    #[error(transparent)]
    State(#[from] crate::states::StateError),
    #[error(transparent)]
    Law(#[from] crate::laws::LawError),
}

impl ExperimentError {
    pub(crate) fn config(path: &str, message: String) -> Self {
        ExperimentError::Config { path: path.to_string(), message }
    }

    /// Prefixes a config path with its section name.
    pub(crate) fn within(self, section: &str) -> Self {
        match self {
            ExperimentError::Config { path, message } if !path.starts_with(section) => {
                ExperimentError::Config { path: format!("{section}.{path}"), message }
            }
            other => other,
        }
    }

    /// True for errors in the user's configuration rather than in a run.
    pub fn is_config_error(&self) -> bool {
        matches!(self, ExperimentError::Config { .. } | ExperimentError::UnknownKeys(_) | ExperimentError::Parse(_))
    }
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

/// Tables and derived quantities of one run.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub curves: ResultTable,
    pub summary: ResultTable,
    /// Fits, flags and other run-level results.
    pub derived: Value,
    pub warnings: Vec<String>,
}

impl ExperimentOutput {
    pub(crate) fn new(curves: ResultTable, summary: ResultTable, derived: Value, warnings: Vec<String>) -> Self {
        Self { curves, summary, derived, warnings }
    }
}

/// Runs one experiment on a pool of `config.workers` threads (all cores
/// when 0). Results do not depend on the worker count.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    let workers = config.run_params().workers;
    if workers > 0 {
        builder = builder.num_threads(workers);
    }
    let pool = builder.build().map_err(|e| ExperimentError::Pool(e.to_string()))?;
    pool.install(|| match config {
        ExperimentConfig::DaviesConcentration(c) => runners::davies_concentration(c),
        ExperimentConfig::BoundaryFixedEps(c) => runners::boundary_fixed_eps(c),
        ExperimentConfig::BoundaryScaledEps(c) => runners::boundary_scaled_eps(c),
        ExperimentConfig::SkinBundles(c) => runners::skin_bundles(c),
        ExperimentConfig::SkinGapScaling(c) => runners::skin_gap_scaling(c),
        ExperimentConfig::ProtectedSeparation(c) => runners::protected_separation(c),
        ExperimentConfig::LogicalBundle(c) => runners::logical_bundle(c),
        ExperimentConfig::LogicalScaling(c) => runners::logical_scaling(c),
        ExperimentConfig::MomentChecks(c) => runners::moment_checks(c),
        ExperimentConfig::OracleChecks(c) => runners::oracle_checks(c),
    })
}

/// Writes `<out_dir>/<experiment>/{curves.csv, summary.csv, meta.json}` and
/// returns that directory.
pub fn write_outputs(config: &ExperimentConfig, output: &ExperimentOutput, out_dir: &Path, wall_time_s: f64) -> Result<PathBuf> {
    let dir = out_dir.join(config.name());
    std::fs::create_dir_all(&dir).map_err(|e| ExperimentError::Io(format!("{}: {e}", dir.display())))?;
    emit_csv(&output.curves, &dir.join("curves.csv"))?;
    emit_csv(&output.summary, &dir.join("summary.csv"))?;
    let config_text = emit_config(config)?;
    let meta = json!({
        "experiment": config.name(),
        "seed": config.run_params().seed,
        "workers": config.run_params().workers,
        "code_version": env!("CARGO_PKG_VERSION"),
        "wall_time_s": wall_time_s,
        "config": config_text,
        "derived": output.derived,
        "warnings": output.warnings,
        "unknown_constants": {"c": 1.0, "c2": 1.0, "note": "formulas with absolute constants are evaluated at c = c2 = 1 and hold only up to that constant"},
    });
    emit_json(&meta, &dir.join("meta.json"))?;
    Ok(dir)
}

/// Runs and writes one experiment; returns the output and its directory.
pub fn run_and_write(config: &ExperimentConfig, out_dir: &Path) -> Result<(ExperimentOutput, PathBuf)> {
    let start = Instant::now();
    let output = run_experiment(config)?;
    let dir = write_outputs(config, &output, out_dir, start.elapsed().as_secs_f64())?;
    Ok((output, dir))
}
