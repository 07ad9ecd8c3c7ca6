use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ctmcgrid_core::SteadyMethod;

use crate::sweep::SweepSpec;

#[derive(Debug, Parser)]
#[command(name = "ctmcgrid", version, about = "Explicit-state CTMC model checker for smart-grid sensor network models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate every property of a property file.
    Check(CheckArgs),
    /// Evaluate a property file over a grid of constant values.
    Sweep(SweepArgs),
    /// Estimate properties by Monte Carlo simulation, or print one sampled path.
    Simulate(SimulateArgs),
    /// Print optimal routes of a transmission line under a failure set.
    Routes(RoutesArgs),
    /// Report state-space statistics of a model.
    Info(InfoArgs),
    /// Emit a generated model as text.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct ConstArgs {
    /// Constant value, NAME=VALUE (repeatable).
    #[arg(long = "const", value_name = "NAME=VALUE")]
    pub consts: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Steady-state solver: power, jacobi or gauss-seidel.
    #[arg(long, default_value = "gauss-seidel", value_parser = parse_method)]
    pub method: SteadyMethod,
    /// Convergence threshold of the steady-state solvers.
    #[arg(long, default_value_t = 1e-9)]
    pub epsilon: f64,
    /// Iteration limit of the steady-state solvers.
    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,
}

fn parse_method(s: &str) -> Result<SteadyMethod, String> {
    s.parse()
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    pub model: PathBuf,
    pub properties: PathBuf,
    #[command(flatten)]
    pub consts: ConstArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output format.
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Write results here instead of standard output.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub model: PathBuf,
    pub properties: PathBuf,
    /// Swept constant, NAME=START:STEP:END (repeatable; the first is outermost).
    #[arg(long = "sweep", value_name = "NAME=START:STEP:END")]
    pub sweeps: Vec<SweepSpec>,
    #[command(flatten)]
    pub consts: ConstArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Largest number of grid points accepted.
    #[arg(long, default_value_t = 100_000)]
    pub max_points: usize,
    /// Output format.
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Write output here instead of standard output.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub model: PathBuf,
    /// Property file; optional with --trace.
    pub properties: Option<PathBuf>,
    #[command(flatten)]
    pub consts: ConstArgs,
    /// Number of independent sample paths.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Random seed; the same seed gives the same output.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Path length in hours for steady-state estimates.
    #[arg(long, default_value_t = 1e4)]
    pub horizon: f64,
    /// Fraction of each steady-state path discarded as warm-up.
    #[arg(long, default_value_t = 0.1)]
    pub warmup: f64,
    /// Print one sampled path up to this many hours as `state sojourn label` lines.
    #[arg(long, value_name = "HOURS")]
    pub trace: Option<f64>,
    /// Output format.
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Write output here instead of standard output.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RoutesArgs {
    /// Number of towers.
    #[arg(short = 'n', long = "towers", visible_alias = "n", default_value_t = 10)]
    pub towers: usize,
    /// Failed towers, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub failed: Vec<usize>,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
    /// Also print link rules derived from all failure sets up to this size.
    #[arg(long, value_name = "MAX_FAILURES")]
    pub rules: Option<usize>,
    /// Estimate the probability of a regular-links-only transmission for this per-tower
    /// failure probability.
    #[arg(long, value_name = "P")]
    pub cheap_link: Option<f64>,
    /// Monte Carlo draws for --cheap-link; exact enumeration when absent.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Random seed; the same seed gives the same output.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    pub model: PathBuf,
    #[command(flatten)]
    pub consts: ConstArgs,
    /// Print JSON with `json`; plain text otherwise.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write `index var=value ...` lines for every state.
    #[arg(long, value_name = "FILE")]
    pub export_states: Option<PathBuf>,
    /// Write `src dst rate label` lines for every transition.
    #[arg(long, value_name = "FILE")]
    pub export_transitions: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Tower,
    Compact,
    Line,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(value_enum)]
    pub kind: ModelKind,
    /// Parameter override, NAME=VALUE (repeatable); names as printed by --list.
    #[arg(long = "set", value_name = "NAME=VALUE")]
    pub sets: Vec<String>,
    /// Towers of a line model.
    #[arg(long, default_value_t = 10)]
    pub towers: usize,
    /// Largest failure set a line model routes around.
    #[arg(long, default_value_t = 2)]
    pub max_failures: usize,
    /// List parameter names with their defaults and exit.
    #[arg(long)]
    pub list: bool,
    /// Write output here instead of standard output.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}
