//! `aht` command-line front end.
//!
//! Every command reads one project config, writes its artifacts under
//! `--out`, and leaves a `<command>.record.json` naming the inputs, the
//! config (inline), the seed and the hash of every output file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use aht_core::config::ProjectConfig;
use aht_core::Error;

mod commands;

pub use commands::run_command;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "aht", version, about = "Average-Hamiltonian sequence design and simulation")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Project configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the search and ensemble seeds.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Caps worker threads; 1 runs sequentially.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "command")]
pub enum Command {
    /// Per-component and composite C-space dimensions plus a basis dump.
    Cspace,
    /// Connected parameter graphs at one order with their subspace dimensions.
    Graphs {
        #[arg(long, default_value_t = 2)]
        order: usize,
        /// Leave out error edges.
        #[arg(long)]
        no_error: bool,
    },
    /// Chained feasibility of the configured graph targets.
    Feasible,
    /// Runs the optimizer and verifies the result.
    Design,
    /// Residual table for an existing sequence.
    Verify {
        #[arg(long)]
        sequence: PathBuf,
        /// Realization seed for the unitary-log comparison.
        #[arg(long, default_value_t = 0)]
        sample: u64,
    },
    /// Autocorrelation campaigns, regime sweeps and correlation studies.
    Simulate {
        /// Sequence files; defaults to the config's list.
        sequences: Vec<PathBuf>,
        /// Re-run a previous simulate record and compare outputs.
        #[arg(long, conflicts_with = "sequences")]
        replay: Option<PathBuf>,
    },
    /// Appends the mirrored, negated cycle and reports the gain.
    Symmetrize {
        #[arg(long)]
        sequence: PathBuf,
    },
    /// Span of order-r C-integral vectors over random sequences.
    Probe {
        #[arg(long, default_value_t = 2)]
        order: usize,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 16)]
        q: usize,
        #[arg(long, default_value_t = 1.0)]
        amplitude: f64,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Cspace => "cspace",
            Command::Graphs { .. } => "graphs",
            Command::Feasible => "feasible",
            Command::Design => "design",
            Command::Verify { .. } => "verify",
            Command::Simulate { .. } => "simulate",
            Command::Symmetrize { .. } => "symmetrize",
            Command::Probe { .. } => "probe",
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Infeasible(String),
    NotConverged(String),
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            CliError::NotConverged(_) => EXIT_NOT_CONVERGED,
            CliError::Failed(_) => EXIT_FAILURE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Infeasible(m) => write!(f, "infeasible: {m}"),
            CliError::NotConverged(m) => write!(f, "not converged: {m}"),
            CliError::Failed(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => CliError::Config(m),
            Error::Parse(_) | Error::Json(_) | Error::Csv(_) | Error::InvalidSequence(_) => {
                CliError::Config(e.to_string())
            }
            Error::InvalidEnsemble(_) | Error::OrderCap { .. } => CliError::Config(e.to_string()),
            Error::Infeasible { .. } => CliError::Infeasible(e.to_string()),
            Error::NonConvergence { .. } => CliError::NotConverged(e.to_string()),
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failed(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Provenance of one command run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub command: Command,
    pub version: String,
    pub seed: Option<u64>,
    pub rng: String,
    pub config_hash: String,
    pub config: ProjectConfig,
    /// Input file → SHA-256, paths relative to the record's directory.
    pub inputs: BTreeMap<String, String>,
    /// Named sequences a simulate run used, in run order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sequences: Vec<NamedInput>,
    /// Output file name (relative to the output directory) → SHA-256.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedInput {
    pub name: String,
    /// Key into `inputs`.
    pub path: String,
}

impl RunRecord {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

pub fn hash_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(aht_core::simlab::sha256_hex(&bytes))
}

/// Parses arguments, runs, prints the error if any, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("aht {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    if let Some(t) = cli.global.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        aht_core::par::set_threads(t);
    }
    run_command(&cli.global, &cli.command)
}
