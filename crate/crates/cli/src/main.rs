use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pfint_cli::{cmd_metrics, cmd_run, cmd_sweep, parse_list, parse_seeds, CliError, SweepPlan};

/// Particle-filter GNSS/camera fusion with integrity bounds.
#[derive(Parser)]
#[command(name = "pfint", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write epochs.csv, metrics.csv and manifest.json.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides scenario.seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a bias x fault-count x seed grid in fused and GNSS-only modes.
    Sweep {
        config: PathBuf,
        /// Comma-separated fault biases, meters.
        #[arg(long)]
        bias: String,
        /// Comma-separated numbers of faulty satellites.
        #[arg(long)]
        faults: String,
        /// Seeds, e.g. `0..19` (inclusive) or `1,2,5`.
        #[arg(long)]
        seeds: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute metrics for one alert limit from an epochs.csv.
    Metrics {
        records: PathBuf,
        #[arg(long)]
        alert_limit: f64,
        #[arg(long, default_value_t = 0.1)]
        threshold: f64,
    },
}

fn parse_faults(text: &str) -> Result<Vec<usize>, CliError> {
    text.split(',')
        .map(|s| s.trim().parse().map_err(|_| CliError::Invalid(format!("bad fault count: {s:?}"))))
        .collect()
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, out, seed } => cmd_run(&config, &out, seed).map(|_| ()),
        Command::Sweep { config, bias, faults, seeds, out } => {
            let plan = SweepPlan { biases: parse_list(&bias)?, faults: parse_faults(&faults)?, seeds: parse_seeds(&seeds)? };
            cmd_sweep(&config, plan, &out).map(|_| ())
        }
        Command::Metrics { records, alert_limit, threshold } => {
            cmd_metrics(&records, alert_limit, threshold, &mut std::io::stdout().lock()).map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
