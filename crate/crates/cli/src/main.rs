//! `pep` - pipeline driver for the tackle-valuation engine.
//!
//! Stages run as subcommands over one TOML config; every stage writes its
//! artifacts atomically to the configured work directory along with a
//! manifest (config hash, seed, input/output digests). Exit codes: 0
//! success, 1 usage or config error, 2 data error, 3 non-convergence.

mod config;
mod manifest;
mod stages;

use clap::{Parser, Subcommand};

use config::PipelineConfig;
use stages::{run_stage, Stage, StageContext};

#[derive(Debug, Parser)]
#[command(name = "pep", version, about = "Tackle valuation pipeline")]
struct Cli {
    /// Pipeline configuration file (TOML).
    #[arg(long, global = true, default_value = "pep.toml")]
    config: std::path::PathBuf,

    /// Override the master seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (0 = default pool).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic tracking and play-by-play corpora.
    Simulate,
    /// Parse inputs and engineer the per-frame feature file.
    Ingest,
    /// Fit the leave-one-week-out density forests.
    FitForest,
    /// Fit the expected-points classifier.
    FitEp,
    /// Value every tackle (PEP records).
    Pep,
    /// Fit the mixed distributional models and wormplot data.
    FitMixed,
    /// Drive-level bootstrap of tackler intercepts.
    Bootstrap,
    /// Rank players by bootstrap median intercept.
    Rank,
    /// Emit plot-ready density and aggregation data.
    Report,
    /// Run every stage in order.
    All,
}

/// Stage failure with its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: String) -> Self {
        Self { code: 1, message }
    }
    pub fn data(message: String) -> Self {
        Self { code: 2, message }
    }
    pub fn non_convergence(message: String) -> Self {
        Self { code: 3, message }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl From<pep_core::Error> for CliError {
    fn from(e: pep_core::Error) -> Self {
        let code = match &e {
            pep_core::Error::NonConvergence(_) => 3,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        Self {
            code: 2,
            message: format!("{e:#}"),
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap routes --help/--version through Err; those exit 0
            let _ = e.print();
            let code = if e.use_stderr() { 1 } else { 0 };
            std::process::exit(code);
        }
    };
    std::process::exit(run(cli));
}

fn run(cli: Cli) -> i32 {
    let config = match PipelineConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let master_seed = cli.seed.unwrap_or(config.seeds.master);
    let jobs = cli.jobs.unwrap_or(config.run.jobs);
    let config_json = config.canonical_json(master_seed);
    let ctx = StageContext {
        config,
        master_seed,
        config_json,
    };

    let stages: Vec<Stage> = match cli.command {
        Command::Simulate => vec![Stage::Simulate],
        Command::Ingest => vec![Stage::Ingest],
        Command::FitForest => vec![Stage::FitForest],
        Command::FitEp => vec![Stage::FitEp],
        Command::Pep => vec![Stage::Pep],
        Command::FitMixed => vec![Stage::FitMixed],
        Command::Bootstrap => vec![Stage::Bootstrap],
        Command::Rank => vec![Stage::Rank],
        Command::Report => vec![Stage::Report],
        Command::All => stages::ALL_STAGES.to_vec(),
    };

    let jobs_opt = if jobs == 0 { None } else { Some(jobs) };
    for stage in stages {
        let result = pep_core::exec::with_jobs(jobs_opt, || run_stage(stage, &ctx));
        if let Err(e) = result {
            eprintln!("error [{}]: {}", stage.name(), e.message);
            return e.code;
        }
    }
    0
}
