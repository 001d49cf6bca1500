//! Command-line front end: config ingestion, key-rate tables, ordering
//! decompositions, parameter sweeps and the symbol simulator.

pub mod config;
mod commands;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use cvqn::RateMode;
use serde::{Deserialize, Serialize};

pub use commands::{
    decompose_table, estimate_report, keyrate_rows, parse_orders, sweep_rows, KeyrateRow,
    OrderSpec, SweepParam, SweepRow, TrustSelection, UserSelection,
};
pub use config::RunConfig;

/// Environment variable read for the worker-thread count.
pub const THREADS_ENV: &str = "CVQN_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("refused: {0}")]
    Guard(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Guard(_) => 4,
        }
    }
}

impl From<cvqn::Error> for CliError {
    fn from(e: cvqn::Error) -> Self {
        use cvqn::Error as E;
        match e {
            E::Guard(m) => CliError::Guard(m),
            E::Numerical { .. } | E::Unphysical { .. } | E::Conditioning(_) | E::Model(_) => {
                CliError::Numerical(e.to_string())
            }
            E::CorruptInput(_) | E::Io(_) => CliError::Input(e.to_string()),
            E::Domain(_) | E::Validation(_) => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "cvqn", version, about = "Key rates for one-to-many CV-QKD broadcast networks")]
pub struct Cli {
    /// Network config (TOML). Defaults to the bundled four-user table.
    #[arg(short, long, global = true)]
    pub config: Option<PathBuf>,
    /// Output format; overrides `[run] format`.
    #[arg(short, long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write the table here instead of stdout; overrides `[run] output`.
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-user key rates; `--trust all --user all` gives one row per user and
    /// one column per trust model.
    Keyrate {
        #[arg(long, default_value = "all")]
        trust: TrustSelection,
        #[arg(long, default_value = "all")]
        user: UserSelection,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<RateMode>,
    },
    /// Chain-rule split of the joint key rate over conditioning orders.
    Decompose {
        /// `all`, `sample:K[:SEED]`, or explicit orders such as `1,2,3,4;4,3,2,1`.
        #[arg(long, default_value = "all")]
        orders: OrderSpec,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<RateMode>,
    },
    /// Key rates over a parameter grid, finite and asymptotic side by side.
    Sweep {
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, allow_negative_numbers = true)]
        to: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value = "all")]
        trust: TrustSelection,
    },
    /// Sample a block of symbols and outcomes from the config's network.
    Simulate {
        #[arg(long)]
        symbols: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the block as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Estimate transmittance and excess noise from a simulated block.
    Estimate {
        #[arg(long = "in")]
        input: PathBuf,
        /// Write a config holding the estimates and their intervals.
        #[arg(long)]
        emit_config: Option<PathBuf>,
    },
}

fn parse_mode(s: &str) -> Result<RateMode, String> {
    s.parse().map_err(|e: cvqn::Error| e.to_string())
}

/// What a command printed: the table and any summary lines.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Output {
    pub table: String,
    pub notes: Vec<String>,
}

pub fn run(cli: &Cli) -> Result<Output, CliError> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::bundled(),
    };
    let run = config.run.clone().unwrap_or_default();
    let format = cli.format.or(run.format).unwrap_or_default();
    let out = commands::dispatch(&cli.command, &config, format)?;
    let target = cli.output.clone().or(run.output.map(PathBuf::from));
    if let Some(path) = target {
        std::fs::write(&path, &out.table)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let mut notes = out.notes;
        notes.push(format!("wrote {}", path.display()));
        return Ok(Output { table: String::new(), notes });
    }
    Ok(out)
}

/// Installs the global worker pool from [`THREADS_ENV`] if it is set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV}={raw:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}
