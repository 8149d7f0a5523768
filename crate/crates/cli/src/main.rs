use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;

mod config;
mod run;

use config::{parse_list, Mode, ScenarioConfig};

/// Runs a flexibility scenario on a radial feeder and writes the report
/// bundle.
#[derive(Debug, Parser)]
#[command(name = "dnflex", version)]
struct Args {
    /// Scenario JSON; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed of the sensitivity Monte Carlo.
    #[arg(long)]
    seed: Option<u64>,
    /// Flexibility levels in percent, comma separated.
    #[arg(long)]
    flex: Option<String>,
    #[arg(long)]
    lambda_loss: Option<f64>,
    /// Power factors of the reactive study, comma separated.
    #[arg(long)]
    pf: Option<String>,
    /// Print the default scenario and exit.
    #[arg(long)]
    print_default_config: bool,
}

fn effective_config(args: &Args) -> anyhow::Result<ScenarioConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            ScenarioConfig::from_json(&text)?
        }
        None => ScenarioConfig::default(),
    };
    if let Some(m) = args.mode {
        cfg.mode = m;
    }
    if let Some(o) = &args.out {
        cfg.out = o.clone();
    }
    if let Some(s) = args.seed {
        cfg.nvs.seed = s;
    }
    if let Some(f) = &args.flex {
        cfg.flex_levels = parse_list(f).context("--flex")?;
    }
    if let Some(l) = args.lambda_loss {
        cfg.rdopf.lambda_loss = l;
    }
    if let Some(pf) = &args.pf {
        cfg.pf_set = parse_list(pf).context("--pf")?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    if args.print_default_config {
        let text = serde_json::to_string_pretty(&ScenarioConfig::default())
            .expect("default config serializes");
        println!("{text}");
        return ExitCode::SUCCESS;
    }
    let cfg = match effective_config(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(run::EXIT_USAGE as u8);
        }
    };
    match run::run_scenario(&cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error in stage {}: {:#}", f.stage, f.error);
            ExitCode::from(f.code as u8)
        }
    }
}
