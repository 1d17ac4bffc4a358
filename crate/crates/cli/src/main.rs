//! `darwinnet`: run scenarios, analyze event logs, batch over seeds.
//!
//! Exit codes: 0 success, 1 other failure, 2 usage (from clap), 3 invalid config,
//! 4 malformed input, 5 insufficient data, 6 I/O.

mod commands;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use darwinnet::analysis::DEFAULT_EPSILON;
use darwinnet::fault::FaultMode;

#[derive(Debug, Parser)]
#[command(
    name = "darwinnet",
    version,
    about = "Self-evolving protocol lifecycle simulator"
)]
struct Cli {
    /// Suppress the summary printed on success.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write the event log, event times, gene table and manifest.
    Run(RunArgs),
    /// Fit and summarize an event log; writes report.json and duane.csv.
    Analyze(AnalyzeArgs),
    /// Run many seeds and write one summary row per seed.
    Batch(BatchArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// TOML config; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides fault.mode.
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<FaultMode>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Overrides sim.seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Event-log CSV.
    #[arg(long)]
    pub log: PathBuf,
    /// Event-times CSV; defaults to `events.csv` beside the log.
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Output directory; defaults to the log's directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fit agent-cycle indices instead of continuous event times.
    #[arg(long)]
    pub cycle_indexed: bool,
    /// Shock cycle; taken from the SHOCK tag when omitted.
    #[arg(long)]
    pub shock_cycle: Option<u64>,
    /// PSI window the log was written with.
    #[arg(long, default_value_t = 50)]
    pub window: usize,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.9)]
    pub psi_threshold: f64,
    #[arg(long, default_value_t = 4)]
    pub tail_windows: usize,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Seeds as a comma list of values and ranges, e.g. `0..100` or `1,5,9..=12`.
    #[arg(long, value_parser = parse_seeds)]
    pub seeds: SeedList,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct SeedList(pub Vec<u64>);

fn parse_mode(s: &str) -> Result<FaultMode, String> {
    s.parse()
}

fn parse_seeds(s: &str) -> Result<SeedList, String> {
    let num = |t: &str| {
        t.trim()
            .parse::<u64>()
            .map_err(|_| format!("invalid seed `{t}`"))
    };
    let mut seeds = Vec::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        if let Some((a, b)) = part.split_once("..=") {
            seeds.extend(num(a)?..=num(b)?);
        } else if let Some((a, b)) = part.split_once("..") {
            seeds.extend(num(a)?..num(b)?);
        } else {
            seeds.push(num(part)?);
        }
    }
    if seeds.is_empty() {
        return Err("seed list is empty".into());
    }
    Ok(SeedList(seeds))
}

#[derive(Debug)]
pub struct CliError(darwinnet::Error);

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError(darwinnet::Error::io(path, source))
    }

    fn exit_code(&self) -> u8 {
        use darwinnet::Error::*;
        match self.0 {
            Config { .. } => 3,
            Parse { .. } => 4,
            InsufficientData { .. } => 5,
            Io { .. } => 6,
            Domain(_) | Range(_) | Schedule { .. } => 1,
        }
    }
}

impl From<darwinnet::Error> for CliError {
    fn from(e: darwinnet::Error) -> Self {
        CliError(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => commands::run(a, cli.quiet),
        Command::Analyze(a) => commands::analyze(a, cli.quiet),
        Command::Batch(a) => commands::batch(a, cli.quiet),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("darwinnet: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
