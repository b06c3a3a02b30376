//! Scenario runner behind the `catsim` binary. Each scenario regenerates
//! the data behind one figure family as CSV tables plus a `run.toml`
//! metadata file.

pub mod config;
pub mod output;
pub mod scenarios;

use std::path::PathBuf;
use std::time::Instant;

use thiserror::Error;

pub use config::{RunConfig, Scenario};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] catsim::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("self-check failed: {0}")]
    SelfCheck(String),
}

impl CliError {
    /// 2 for guard violations, 3 for self-check failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_guard_violation() => 2,
            CliError::SelfCheck(_) => 3,
            _ => 1,
        }
    }
}

/// Files written by a successful (or self-check-failed) run.
#[derive(Debug)]
pub struct Report {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
}

/// Runs the configured scenario and writes its tables and metadata.
///
/// Every override is validated before any table is computed; nothing is
/// written when validation fails.
pub fn run(cfg: &RunConfig) -> Result<Report, CliError> {
    let scenario = cfg
        .scenario
        .ok_or_else(|| CliError::Config("no scenario given".into()))?;
    let start = Instant::now();
    let outcome = scenarios::execute(scenario, cfg)?;
    let wall = start.elapsed().as_secs_f64();

    let dir = cfg
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(scenario.name()));
    output::ensure_dir(&dir)?;
    let mut files = Vec::new();
    for t in &outcome.tables {
        files.push(output::write(&dir, &t.file, &t.render())?);
    }

    let info = output::RunInfo {
        scenario: scenario.name().into(),
        version: env!("CARGO_PKG_VERSION").into(),
        wall_time_s: wall,
        threads: rayon::current_num_threads(),
        tolerances: outcome.tolerances.clone(),
        dimensions: outcome.dimensions.clone(),
        results: outcome.results.clone(),
        tables: outcome
            .tables
            .iter()
            .map(|t| output::TableInfo {
                file: t.file.clone(),
                figure: t.figure.clone(),
                description: t.description.clone(),
            })
            .collect(),
    };
    let meta = RunConfig {
        scenario: Some(scenario),
        output_dir: Some(dir.clone()),
        params: outcome.params.clone(),
        overrides: outcome.overrides.clone(),
        run: Some(
            toml::Table::try_from(&info).map_err(|e| CliError::Config(e.to_string()))?,
        ),
    };
    files.push(output::write(&dir, "run.toml", &meta.to_toml()?)?);

    if !outcome.failed_checks.is_empty() {
        return Err(CliError::SelfCheck(outcome.failed_checks.join("; ")));
    }
    Ok(Report { dir, files })
}
