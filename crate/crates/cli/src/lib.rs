//! Command-line front end of the ctmcgrid model checker.

pub mod args;
mod commands;
pub mod sweep;
pub mod table;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use ctmcgrid_core::{parse_and_validate, parse_model, Env, ModelIR, SolverOptions, Value};

pub use args::{Cli, Command, Format};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Read { .. } | CliError::Write { .. } | CliError::Io(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

/// Runs one command, writing results to `out` and notes to `err`.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Check(a) => commands::check(a, out),
        Command::Sweep(a) => commands::sweep(a, out, err),
        Command::Simulate(a) => commands::simulate(a, out),
        Command::Routes(a) => commands::routes(a, out),
        Command::Info(a) => commands::info(a, out),
        Command::Gen(a) => commands::generate(a, out),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })
}

/// Parses `NAME=VALUE` pairs.
pub fn parse_consts(items: &[String]) -> Result<Vec<(String, Value)>, CliError> {
    items
        .iter()
        .map(|item| {
            let (name, value) =
                item.split_once('=').ok_or_else(|| CliError::Usage(format!("expected NAME=VALUE, got `{item}`")))?;
            let v = Value::parse_literal(value)
                .ok_or_else(|| CliError::Usage(format!("`{value}` is not a number or boolean")))?;
            Ok((name.trim().to_string(), v))
        })
        .collect()
}

/// A model file with the constant values that belong to its declared constants; the
/// remaining values are left for the properties.
struct Loaded {
    text: String,
    path: PathBuf,
    declared: Vec<String>,
}

impl Loaded {
    fn new(path: &Path) -> Result<Self, CliError> {
        let text = read(path)?;
        let bare = parse_model(&text, &Env::new()).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        let declared = bare.constants.iter().map(|c| c.name.clone()).collect();
        Ok(Loaded { text, path: path.to_path_buf(), declared })
    }

    fn declares(&self, name: &str) -> bool {
        self.declared.iter().any(|d| d == name)
    }

    /// Splits values into (model overrides, property constants).
    fn split(&self, values: &[(String, Value)]) -> (Env, Env) {
        let mut model = Env::new();
        let mut props = Env::new();
        for (name, v) in values {
            if self.declares(name) {
                model.bind(name.clone(), *v);
            } else {
                props.bind(name.clone(), *v);
            }
        }
        (model, props)
    }

    fn model(&self, overrides: &Env) -> Result<ModelIR, CliError> {
        parse_and_validate(&self.text, overrides).map_err(|e| CliError::Parse(format!("{}: {e}", self.path.display())))
    }
}

fn solver_options(a: &args::SolverArgs) -> Result<SolverOptions, CliError> {
    let opts =
        SolverOptions { method: a.method, epsilon: a.epsilon, max_iters: a.max_iters, ..SolverOptions::default() };
    opts.check().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(opts)
}

/// Opens `path` for writing, or returns `fallback`.
fn sink<'a>(path: &Option<PathBuf>, fallback: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>, CliError> {
    match path {
        Some(p) => {
            let f = fs::File::create(p).map_err(|source| CliError::Write { path: p.clone(), source })?;
            Ok(Box::new(std::io::BufWriter::new(f)))
        }
        None => Ok(Box::new(fallback)),
    }
}
