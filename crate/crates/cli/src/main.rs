//! `topev`: run, demonstrate and inspect topological event detection.

mod config;
mod demo;
mod run;
mod snapshot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use topev_core::engine::DEFAULT_MAX_MESSAGES;

use config::{parse_grid, parse_seeds, FireConfig, RunConfig};

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or inputs; exit status 2.
    Usage(String),
    /// Protocol or I/O failure; exit status 1.
    Fatal(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Fatal(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Fatal(e.into())
    }
}

#[derive(Parser)]
#[command(
    name = "topev",
    version,
    about = "Distributed topological event detection simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a fire simulation or a scripted scenario and export its logs.
    Run(RunArgs),
    /// Narrate a built-in single-event script (1..9) or the full tour (all).
    Demo { name: String },
    /// Render one interval of a finished run as an ASCII grid.
    Snapshot {
        dir: PathBuf,
        #[arg(long)]
        interval: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Fire run on a hex grid of R rows and C columns.
    #[arg(long, value_name = "RxC", value_parser = parse_grid)]
    grid: Option<[usize; 2]>,
    /// Activation threshold; scripts carry their own unless given.
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of intervals; caps a script's length.
    #[arg(long)]
    intervals: Option<u64>,
    /// Built-in scenario name or script path.
    #[arg(long, value_name = "PATH|NAME")]
    scenario: Option<String>,
    /// Audit every interval against the homology oracle.
    #[arg(long)]
    verify: bool,
    #[arg(long, env = "TOPO_OUT", default_value = "topev-out")]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MAX_MESSAGES)]
    max_messages: u64,
    /// Fire runs for seeds A..B (end exclusive), one subdirectory each.
    #[arg(long, value_name = "A..B", value_parser = parse_seeds, conflicts_with = "scenario")]
    seeds: Option<std::ops::Range<u64>>,
    /// Deliver messages in a shuffled order drawn from this seed.
    #[arg(long, value_name = "SEED")]
    shuffle: Option<u64>,
    #[arg(long, default_value_t = 0.01)]
    ignite: f64,
    #[arg(long, default_value_t = 0.15)]
    spread: f64,
    #[arg(long, default_value_t = 0.1)]
    extinguish: f64,
    /// Replay a saved config.json; only --out still applies.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["grid", "scenario", "seeds"])]
    config: Option<PathBuf>,
}

impl RunArgs {
    fn into_config(self) -> Result<(RunConfig, Option<std::ops::Range<u64>>), CliError> {
        if let Some(path) = &self.config {
            let mut cfg = RunConfig::load(path)?;
            cfg.out = self.out;
            cfg.validate()?;
            return Ok((cfg, None));
        }
        let mut cfg = RunConfig {
            grid: self.grid,
            theta: self.theta.unwrap_or(0.5),
            seed: self.seed,
            intervals: self.intervals.unwrap_or(30),
            scenario: self.scenario,
            fire: FireConfig {
                ignite: self.ignite,
                spread: self.spread,
                extinguish: self.extinguish,
            },
            verify: self.verify,
            out: self.out,
            max_messages: self.max_messages,
            shuffle: self.shuffle,
        };
        cfg.validate()?;
        if let Some(name) = &cfg.scenario {
            let script = config::resolve_scenario(name)?;
            cfg.theta = self.theta.unwrap_or(script.theta);
            let len = script.interval_count() as u64;
            cfg.intervals = self.intervals.map_or(len, |n| n.min(len));
        }
        Ok((cfg, self.seeds))
    }
}

fn dispatch(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Run(args) => {
            let (cfg, seeds) = args.into_config()?;
            match seeds {
                Some(range) => run::run_seeds(&cfg, range),
                None => run::run(&cfg),
            }
        }
        Command::Demo { name } => demo::demo(&name),
        Command::Snapshot { dir, interval } => {
            print!("{}", snapshot::render(&dir, interval)?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Fatal(e)) => {
            eprintln!("fatal: {e:#}");
            ExitCode::from(1)
        }
    }
}
