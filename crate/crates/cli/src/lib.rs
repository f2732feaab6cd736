//! Command-line front end for the `coopfield` solvers.
//!
//! Run options come from an optional flat `key = value` file (`--config`)
//! overridden by `--key value` flags. Results go to standard output or to
//! `--output` as CSV or JSON.
//!
//! Exit statuses: 0 success, 2 usage or configuration error, 3 I/O error,
//! 4 numerical failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod records;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::{Figure, FigureOptions};
use crate::config::{build_plan, merge, parse_config_text, Format, Plan};
pub use crate::error::{CliError, CliResult};
use crate::error::{EXIT_OK, EXIT_USAGE};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "COOPFIELD_THREADS";

#[derive(Debug, Parser)]
#[command(name = "coopfield", version, about = "Public Goods game thermodynamics: sweeps, transitions and fits")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cooperator density along a beta grid for each requested solver.
    #[command(alias = "run")]
    Sweep(RunArgs),
    /// Inverse temperature where punished and unpunished densities meet.
    Crossing(RunArgs),
    /// Density gap between costs `c` and `c-high` along a beta grid.
    Transition(RunArgs),
    /// Density variance along a beta grid and its peak.
    Variance(RunArgs),
    /// Decay-law fit on a previously emitted sweep or gap table.
    Fit {
        /// CSV file written by `sweep`, `variance`, `transition` or `figure`.
        input: PathBuf,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Cross-solver invariant suite.
    OracleCheck {
        /// Seed of the random parameter grid.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Data behind one of the canned figures.
    Figure(FigureArgs),
}

/// Every flag may be given once; repeats are reported as duplicate keys.
#[derive(Debug, Args)]
struct RunArgs {
    /// Flat `key = value` file; command-line flags take precedence.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Number of players.
    #[arg(long)]
    n: Vec<String>,
    /// Benefit.
    #[arg(long)]
    b: Vec<String>,
    /// Cost of cooperation.
    #[arg(long, allow_hyphen_values = true)]
    c: Vec<String>,
    /// Second cost for `transition`.
    #[arg(long = "c-high")]
    c_high: Vec<String>,
    /// Punishment parameter in [0,1].
    #[arg(long, allow_hyphen_values = true)]
    gamma: Vec<String>,
    /// Risk closure: bare, mean-field or self-consistent.
    #[arg(long)]
    mode: Vec<String>,
    /// Comma-separated solvers: exact, mc, series, digamma.
    #[arg(long)]
    solver: Vec<String>,
    /// `lo:hi:step` or a comma-separated list.
    #[arg(long = "beta-grid", allow_hyphen_values = true)]
    beta_grid: Vec<String>,
    /// `lo:hi` search or fit window.
    #[arg(long)]
    window: Vec<String>,
    /// Monte Carlo proposals per grid point, burn-in included.
    #[arg(long)]
    steps: Vec<String>,
    #[arg(long = "burn-in")]
    burn_in: Vec<String>,
    /// Proposals between recorded samples (default: N).
    #[arg(long)]
    thinning: Vec<String>,
    #[arg(long)]
    seed: Vec<String>,
    /// csv or json.
    #[arg(long)]
    format: Vec<String>,
    /// Output file (default: standard output).
    #[arg(long)]
    output: Vec<String>,
}

impl RunArgs {
    fn plan(&self) -> CliResult<Plan> {
        let file = match &self.config {
            None => Default::default(),
            Some(path) => parse_config_text(&read_file(path)?)?,
        };
        let cli: [(&str, &[String]); 15] = [
            ("n", &self.n),
            ("b", &self.b),
            ("c", &self.c),
            ("c-high", &self.c_high),
            ("gamma", &self.gamma),
            ("mode", &self.mode),
            ("solver", &self.solver),
            ("beta-grid", &self.beta_grid),
            ("window", &self.window),
            ("steps", &self.steps),
            ("burn-in", &self.burn_in),
            ("thinning", &self.thinning),
            ("seed", &self.seed),
            ("format", &self.format),
            ("output", &self.output),
        ];
        let (map, explicit) = merge(file, &cli)?;
        build_plan(&map, explicit)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FigureId {
    #[value(name = "2a")]
    F2a,
    #[value(name = "2b")]
    F2b,
    #[value(name = "3a")]
    F3a,
    #[value(name = "3b")]
    F3b,
    #[value(name = "4")]
    F4,
}

#[derive(Debug, Args)]
struct FigureArgs {
    id: FigureId,
    /// Risk closure: mean-field (default) or self-consistent.
    #[arg(long, default_value = "mean-field")]
    mode: String,
    /// Add a Monte Carlo overlay.
    #[arg(long)]
    mc: bool,
    /// Monte Carlo proposals per grid point, burn-in included.
    #[arg(long, default_value_t = 1_100_000)]
    steps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "csv")]
    format: String,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn read_file(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))
}

fn deliver(buf: &[u8], output: Option<&Path>, stdout: &mut dyn Write) -> CliResult<()> {
    match output {
        Some(path) => std::fs::write(path, buf).map_err(|e| CliError::io(path.display(), e)),
        None => stdout
            .write_all(buf)
            .and_then(|_| stdout.flush())
            .map_err(|e| CliError::io("standard output", e)),
    }
}

fn parse_format(s: &str) -> CliResult<Format> {
    match s {
        "csv" => Ok(Format::Csv),
        "json" => Ok(Format::Json),
        other => Err(CliError::Usage(format!("invalid value for `format`: must be csv or json (got `{other}`)"))),
    }
}

fn dispatch(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let mut buf: Vec<u8> = Vec::new();
    let output = match cli.command {
        Command::Sweep(args) => {
            let plan = args.plan()?;
            commands::sweep(&plan, &mut buf)?;
            plan.output
        }
        Command::Crossing(args) => {
            let plan = args.plan()?;
            commands::crossing(&plan, &mut buf)?;
            plan.output
        }
        Command::Transition(args) => {
            let plan = args.plan()?;
            commands::transition(&plan, &mut buf)?;
            plan.output
        }
        Command::Variance(args) => {
            let plan = args.plan()?;
            commands::variance(&plan, &mut buf, stderr)?;
            plan.output
        }
        Command::Fit { input, args } => {
            let plan = args.plan()?;
            commands::fit(&read_file(&input)?, &plan, &mut buf)?;
            plan.output
        }
        Command::OracleCheck { seed } => {
            let result = commands::oracle_check(seed, &mut buf);
            deliver(&buf, None, stdout)?;
            return result;
        }
        Command::Figure(args) => {
            let mode: coopfield::RiskMode = args.mode.parse().map_err(|_| {
                CliError::Usage(format!(
                    "invalid value for `mode`: must be one of bare, mean-field, self-consistent (got `{}`)",
                    args.mode
                ))
            })?;
            let mc = if args.mc {
                let chain = coopfield::montecarlo::ChainConfig::with_steps(args.steps).seed(args.seed);
                chain.validate()?;
                Some(chain)
            } else {
                None
            };
            let opts = FigureOptions {
                mode,
                mc,
                format: parse_format(&args.format)?,
            };
            let which = match args.id {
                FigureId::F2a => Figure::F2a,
                FigureId::F2b => Figure::F2b,
                FigureId::F3a => Figure::F3a,
                FigureId::F3b => Figure::F3b,
                FigureId::F4 => Figure::F4,
            };
            commands::figure(which, &opts, &mut buf, stderr)?;
            args.output
        }
    };
    deliver(&buf, output.as_deref(), stdout)
}

/// Sizes the global worker pool from [`THREADS_ENV`] when it is set.
pub fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t >= 1)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer (got `{raw}`)")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size the worker pool: {e}")))
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = configure_threads().and_then(|_| dispatch(cli, stdout, stderr));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
