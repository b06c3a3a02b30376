use std::path::PathBuf;
use std::process::ExitCode;

use catsim_cli::{config, run, Scenario};
use clap::Parser;

/// Regenerate figure data for squeezed mechanical and optical cat states.
#[derive(Parser, Debug)]
#[command(name = "catsim", version)]
struct Args {
    /// Scenario to run; may instead come from the config file.
    scenario: Option<Scenario>,
    /// TOML configuration file.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one config value, e.g. `g=2e5` or `overrides.mech_dim=80`.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Output directory (default `out/<scenario>`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn init_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("CATSIM_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("CATSIM_THREADS must be a positive integer, got `{raw}`"))?;
    if n == 0 {
        return Err("CATSIM_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let result = config::load(args.config.as_deref(), args.scenario, &args.params, args.out)
        .and_then(|cfg| run(&cfg));
    match result {
        Ok(report) => {
            println!("wrote {} files to {}", report.files.len(), report.dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
