//! Probability that a transmission travels on regular links only, averaged over random tower failures.
//!
//! The estimate is the long-run fraction of transmissions: the expected number of cheaply
//! routed towers divided by the expected number of routable towers, with towers failing
//! independently. Failed and unroutable towers do not transmit and so count in neither.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::routing::{compute_routes, LineTopology};
use super::ModelsError;

/// Largest line the exact mode enumerates (2^20 failure sets).
pub const MAX_EXACT_TOWERS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheapLinkMode {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheapLinkEstimate {
    pub value: f64,
    /// Delta-method standard error of the ratio; `None` in exact mode.
    pub std_error: Option<f64>,
    /// Expected number of transmitting towers per cycle.
    pub routed_per_cycle: f64,
}

/// (cheap, routed) counts under one failure set.
fn counts(topo: &LineTopology, failed: &BTreeSet<usize>) -> (f64, f64) {
    let table = compute_routes(topo, failed);
    let mut cheap = 0.0;
    let mut routed = 0.0;
    for r in table.entries.values().filter_map(|e| e.route()) {
        routed += 1.0;
        if r.cost().backups == 0 {
            cheap += 1.0;
        }
    }
    (cheap, routed)
}

fn failed_from_mask(n: usize, mask: u64) -> BTreeSet<usize> {
    (1..=n).filter(|t| mask >> (t - 1) & 1 == 1).collect()
}

pub fn estimate_cheap_link_probability(
    topo: &LineTopology,
    failure_prob: &[f64],
    mode: CheapLinkMode,
) -> Result<CheapLinkEstimate, ModelsError> {
    let n = topo.towers();
    if failure_prob.len() != n {
        return Err(ModelsError::Invalid(format!("need {n} failure probabilities, got {}", failure_prob.len())));
    }
    if let Some(p) = failure_prob.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(ModelsError::Invalid(format!("failure probability {p} is outside [0, 1]")));
    }
    match mode {
        CheapLinkMode::Exact => {
            if n > MAX_EXACT_TOWERS {
                return Err(ModelsError::Invalid(format!(
                    "exact enumeration supports at most {MAX_EXACT_TOWERS} towers, got {n}"
                )));
            }
            let (cheap, routed) = (0..1u64 << n)
                .into_par_iter()
                .map(|mask| {
                    let w: f64 = (0..n)
                        .map(|i| if mask >> i & 1 == 1 { failure_prob[i] } else { 1.0 - failure_prob[i] })
                        .product();
                    if w == 0.0 {
                        return (0.0, 0.0);
                    }
                    let (c, r) = counts(topo, &failed_from_mask(n, mask));
                    (w * c, w * r)
                })
                .collect::<Vec<_>>()
                .into_iter()
                .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
            let value = if routed > 0.0 { cheap / routed } else { 0.0 };
            Ok(CheapLinkEstimate { value, std_error: None, routed_per_cycle: routed })
        }
        CheapLinkMode::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(ModelsError::Invalid("Monte Carlo needs at least 2 samples".into()));
            }
            let draws: Vec<(f64, f64)> = (0..samples as u64)
                .into_par_iter()
                .map(|i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(i);
                    let failed: BTreeSet<usize> =
                        (1..=n).filter(|&t| rng.random::<f64>() < failure_prob[t - 1]).collect();
                    counts(topo, &failed)
                })
                .collect();
            let m = samples as f64;
            let (sc, sr) = draws.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
            let (mc, mr) = (sc / m, sr / m);
            if mr == 0.0 {
                return Ok(CheapLinkEstimate { value: 0.0, std_error: None, routed_per_cycle: 0.0 });
            }
            let value = mc / mr;
            // Residuals of the ratio estimator.
            let var = draws.iter().map(|(c, r)| (c - value * r).powi(2)).sum::<f64>() / (m - 1.0);
            let std_error = (var / m).sqrt() / mr;
            Ok(CheapLinkEstimate { value, std_error: Some(std_error), routed_per_cycle: mr })
        }
    }
}
