//! `edgegov`: benchmark campaigns, model fitting, stream optimization and
//! governor simulation, composed through CSV and JSON files.

mod commands;
mod profile;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "edgegov", version, about = "Energy-aware CPU frequency selection for edge stream processing")]
struct Cli {
    /// JSON file with settings for the subcommand; keys mirror the long flag
    /// names. Flags override the file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a benchmarking campaign and write the records CSV.
    Bench(BenchArgs),
    /// Fit a power model from a records CSV.
    Fit(FitArgs),
    /// Pick the energy-optimal frequency for a stream or a sweep of streams.
    Optimize(OptimizeArgs),
    /// Replay a token stream under a governor, or compare all governors.
    Simulate(SimulateArgs),
    /// Write the normalized efficiency heatmap of a fitted model.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// `builtin`, a profile JSON path, or a name under $EDGEGOV_PROFILE_DIR.
    #[arg(long)]
    pub profile: Option<String>,
    /// Frequencies to measure, kHz [default: every rung of the profile].
    #[arg(long, value_delimiter = ',')]
    pub configs: Option<Vec<u64>>,
    /// Load levels in percent; the idle cell is always added [default: 10,20,...,100].
    #[arg(long, value_delimiter = ',')]
    pub loads: Option<Vec<u32>>,
    /// Stressor duration per cell, seconds [default: 15].
    #[arg(long)]
    pub duration: Option<f64>,
    /// Settle wait around each stressor run, seconds [default: transport's own].
    #[arg(long)]
    pub settle: Option<f64>,
    /// Repetitions per cell [default: 1].
    #[arg(long)]
    pub reps: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the profile's measurement noise (relative standard deviation).
    #[arg(long)]
    pub noise: Option<f64>,
    /// `loopback`, `sim-broker` (wire protocol against an in-process agent)
    /// or `broker` [default: loopback].
    #[arg(long)]
    pub transport: Option<String>,
    /// Output CSV [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write 0 into the timestamp column so reruns are byte-identical.
    #[arg(long)]
    pub no_timestamps: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub records: Option<PathBuf>,
    /// Output model JSON [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Fitted model JSON. Without it the profile is used directly.
    #[arg(long, conflicts_with = "profile")]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub profile: Option<String>,
    /// Token inter-arrival interval, seconds.
    #[arg(long)]
    pub d: Option<f64>,
    /// Work per token, bogo-ops.
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long, value_delimiter = ',', requires = "sweep_k")]
    pub sweep_d: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', requires = "sweep_d")]
    pub sweep_k: Option<Vec<f64>>,
    /// Output CSV [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub profile: Option<String>,
    /// performance, powersave, userspace:<kHz>, ondemand[:up],
    /// conservative[:up[:down]] or schedutil[:headroom].
    #[arg(long, conflicts_with = "compare")]
    pub policy: Option<String>,
    /// Run every governor plus the optimal static frequency.
    #[arg(long)]
    pub compare: bool,
    #[arg(long)]
    pub d: Option<f64>,
    #[arg(long)]
    pub k: Option<f64>,
    /// Tokens to replay [default: 1000].
    #[arg(long)]
    pub tokens: Option<usize>,
    /// Queue capacity behind the token in service [default: unbounded].
    #[arg(long)]
    pub queue: Option<usize>,
    /// Output JSON [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Output heatmap CSV [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let config = cli.config.as_deref();
    let result = match cli.command {
        Command::Bench(a) => commands::bench(a, config),
        Command::Fit(a) => commands::fit(a, config),
        Command::Optimize(a) => commands::optimize(a, config),
        Command::Simulate(a) => commands::simulate(a, config),
        Command::Report(a) => commands::report(a, config),
    };
    match result {
        Ok(status) => ExitCode::from(status as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
