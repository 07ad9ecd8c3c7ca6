//! Transient, steady-state and reward analysis of explicit CTMCs.

mod bscc;
mod poisson;
mod steady;
pub(crate) mod transient;
mod uniform;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::space::SpaceError;

pub use bscc::{bottom_sccs, strongly_connected_components};
pub use poisson::{poisson_weights, PoissonWeights};
pub use steady::{long_run_expected_reward, steady_state, SteadyResult};
pub use transient::{
    bounded_reachability, bounded_until, cumulative_expected_reward, transient_distribution, TransientStats,
};
pub use uniform::Uniformized;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SteadyMethod {
    Power,
    Jacobi,
    #[default]
    GaussSeidel,
}

impl fmt::Display for SteadyMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SteadyMethod::Power => "power",
            SteadyMethod::Jacobi => "jacobi",
            SteadyMethod::GaussSeidel => "gauss-seidel",
        })
    }
}

impl FromStr for SteadyMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "power" => Ok(SteadyMethod::Power),
            "jacobi" => Ok(SteadyMethod::Jacobi),
            "gauss-seidel" | "gs" => Ok(SteadyMethod::GaussSeidel),
            other => Err(format!("unknown method `{other}` (expected power, jacobi or gauss-seidel)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub method: SteadyMethod,
    /// Relative convergence threshold for iterative steady-state solvers.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Poisson mass allowed to be discarded by uniformization.
    pub trunc_epsilon: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { method: SteadyMethod::GaussSeidel, epsilon: 1e-9, max_iters: 10_000, trunc_epsilon: 1e-10 }
    }
}

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("time bound must be nonnegative, got {0}")]
    NegativeTime(f64),
    #[error(
        "{method} did not converge within {iterations} iterations (residual {residual:e}); try --method gauss-seidel"
    )]
    NotConverged { method: SteadyMethod, iterations: usize, residual: f64 },
    #[error("invalid solver options: {0}")]
    Options(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

impl SolverOptions {
    pub fn check(&self) -> Result<(), NumericsError> {
        if !(self.epsilon > 0.0) || !(self.trunc_epsilon > 0.0) || self.trunc_epsilon >= 1.0 {
            return Err(NumericsError::Options("epsilons must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(NumericsError::Options("max iterations must be at least 1".into()));
        }
        Ok(())
    }
}
