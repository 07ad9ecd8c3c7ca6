//! Monte Carlo estimation of the same properties the numerical engine answers.
//!
//! Every replication owns a ChaCha8 stream derived from `(seed, replication index)`, so
//! results do not depend on the number of worker threads.

use std::io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use rayon::prelude::*;
use thiserror::Error;

use crate::numerics::{bottom_sccs, NumericsError};
use crate::properties::{Property, PropertyKind};
use crate::space::{SpaceError, StateSpace, UNLABELED};

/// A sampled trajectory: `states[k]` is entered at `times[k]` via `labels[k]`
/// (`labels[0]` is `UNLABELED`); the last state is held until `end`.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub states: Vec<usize>,
    pub times: Vec<f64>,
    pub labels: Vec<u32>,
    pub end: f64,
}

impl Path {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Time spent in the `k`-th visited state.
    pub fn sojourn(&self, k: usize) -> f64 {
        self.times.get(k + 1).copied().unwrap_or(self.end) - self.times[k]
    }

    /// One line per segment: `state_index sojourn label`, where the label is the action that
    /// left the state (`-` for unlabelled moves and the final segment).
    pub fn write_text(&self, space: &StateSpace, w: &mut dyn io::Write) -> io::Result<()> {
        for k in 0..self.len() {
            let label = self.labels.get(k + 1).and_then(|&l| space.label_name(l)).unwrap_or("-");
            writeln!(w, "{} {} {}", self.states[k], self.sojourn(k), label)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    /// Standard error of the mean; `None` with a single sample.
    pub std_error: Option<f64>,
    pub samples: usize,
    pub seed: u64,
    /// Samples with a nonzero value.
    pub hits: usize,
}

impl Estimate {
    /// Half-width of the normal-approximation confidence interval at `z` standard errors.
    pub fn half_width(&self, z: f64) -> Option<f64> {
        self.std_error.map(|se| z * se)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub samples: usize,
    pub seed: u64,
    /// Path length for steady-state estimates, in hours.
    pub steady_horizon: f64,
    /// Leading fraction of each steady-state path discarded as warm-up.
    pub warmup: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { samples: 10_000, seed: 1, steady_horizon: 1e4, warmup: 0.1 }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("steady-state simulation needs a single bottom SCC, found {0}")]
    MultipleBsccs(usize),
    #[error("invalid simulation options: {0}")]
    Options(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// [`sample_path`] driven by replication 0 of `seed`.
pub fn sample_path_seeded(space: &StateSpace, horizon: f64, seed: u64) -> Path {
    sample_path(space, horizon, &mut rng_for(seed, 0))
}

fn rng_for(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

/// Samples one trajectory up to `horizon`, taking self-loops as real jumps.
pub fn sample_path<R: Rng + ?Sized>(space: &StateSpace, horizon: f64, rng: &mut R) -> Path {
    let (row_ptr, cols, rates, labels) = (space.row_ptr(), space.cols(), space.rates(), space.labels());
    let exit = space.exit_rates();
    let mut s = space.initial();
    let mut path = Path { states: vec![s], times: vec![0.0], labels: vec![UNLABELED], end: horizon };
    let mut t = 0.0;
    loop {
        if exit[s] <= 0.0 {
            return path;
        }
        let e: f64 = rng.sample(Exp1);
        t += e / exit[s];
        if t > horizon {
            return path;
        }
        let mut u = rng.random::<f64>() * exit[s];
        let mut k = row_ptr[s];
        while k + 1 < row_ptr[s + 1] && u >= rates[k] {
            u -= rates[k];
            k += 1;
        }
        s = cols[k] as usize;
        path.states.push(s);
        path.times.push(t);
        path.labels.push(labels[k]);
    }
}

/// Per-state data the estimator walks over; self-loops are split out of the jump chain.
struct Walker<'a> {
    space: &'a StateSpace,
    leave: Vec<f64>,
    /// Unused by probability queries.
    state_reward: Vec<f64>,
    impulse: Vec<f64>,
}

impl<'a> Walker<'a> {
    fn new(space: &'a StateSpace, reward: Option<&str>) -> Result<Self, SpaceError> {
        let (state_reward, impulse) = match reward {
            Some(r) => (space.state_rewards(r)?, space.transition_impulses(r)?),
            None => (Vec::new(), Vec::new()),
        };
        Ok(Walker { space, leave: space.leave_rates(), state_reward, impulse })
    }

    fn sojourn<R: Rng>(&self, s: usize, rng: &mut R) -> f64 {
        if self.leave[s] <= 0.0 {
            return f64::INFINITY;
        }
        let e: f64 = rng.sample(Exp1);
        e / self.leave[s]
    }

    /// Picks a non-loop successor; returns the CSR index of the chosen transition.
    fn jump<R: Rng>(&self, s: usize, rng: &mut R) -> usize {
        let (row_ptr, cols, rates) = (self.space.row_ptr(), self.space.cols(), self.space.rates());
        let mut u = rng.random::<f64>() * self.leave[s];
        let mut last = row_ptr[s];
        for k in row_ptr[s]..row_ptr[s + 1] {
            if cols[k] as usize == s {
                continue;
            }
            last = k;
            if u < rates[k] {
                return k;
            }
            u -= rates[k];
        }
        last
    }

    /// Reward earned while staying in `s` for `d` hours, self-loop impulses included.
    fn stay_reward<R: Rng>(&self, s: usize, d: f64, rng: &mut R) -> f64 {
        let mut acc = self.state_reward[s] * d;
        let (row_ptr, cols, rates) = (self.space.row_ptr(), self.space.cols(), self.space.rates());
        for k in row_ptr[s]..row_ptr[s + 1] {
            if cols[k] as usize == s && self.impulse[k] != 0.0 && d > 0.0 {
                let mean = rates[k] * d;
                let count = Poisson::new(mean).map(|p| p.sample(rng)).unwrap_or(0.0);
                acc += count * self.impulse[k];
            }
        }
        acc
    }

    /// 1 if `target` is reached within `t` while staying inside `allowed`.
    fn reach<R: Rng>(&self, allowed: Option<&[bool]>, target: &[bool], t: f64, rng: &mut R) -> f64 {
        let mut s = self.space.initial();
        let mut now = 0.0;
        loop {
            if target[s] {
                return 1.0;
            }
            if allowed.is_some_and(|a| !a[s]) {
                return 0.0;
            }
            now += self.sojourn(s, rng);
            if now > t {
                return 0.0;
            }
            s = self.space.cols()[self.jump(s, rng)] as usize;
        }
    }

    fn cumulative<R: Rng>(&self, t: f64, rng: &mut R) -> f64 {
        let mut s = self.space.initial();
        let mut now = 0.0;
        let mut acc = 0.0;
        loop {
            let d = self.sojourn(s, rng);
            if now + d >= t {
                return acc + self.stay_reward(s, t - now, rng);
            }
            acc += self.stay_reward(s, d, rng);
            now += d;
            let k = self.jump(s, rng);
            acc += self.impulse[k];
            s = self.space.cols()[k] as usize;
        }
    }

    /// Time average over `[from, to]` of either the indicator of `target` or the reward.
    fn long_run<R: Rng>(&self, target: Option<&[bool]>, from: f64, to: f64, rng: &mut R) -> f64 {
        let mut s = self.space.initial();
        let mut now = 0.0;
        let mut acc = 0.0;
        while now < to {
            let d = self.sojourn(s, rng);
            let lo = now.max(from);
            let hi = (now + d).min(to);
            if hi > lo {
                acc += match target {
                    Some(tg) => {
                        if tg[s] {
                            hi - lo
                        } else {
                            0.0
                        }
                    }
                    None => self.stay_reward(s, hi - lo, rng),
                };
            }
            now += d;
            if now >= to {
                break;
            }
            let k = self.jump(s, rng);
            if target.is_none() && now >= from {
                acc += self.impulse[k];
            }
            s = self.space.cols()[k] as usize;
        }
        acc / (to - from)
    }
}

fn summarize(values: &[f64], seed: u64) -> Estimate {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std_error = (n > 1).then(|| {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    });
    Estimate { mean, std_error, samples: n, seed, hits: values.iter().filter(|&&v| v != 0.0).count() }
}

/// Estimates the value of `prop` from `opts.samples` independent replications.
pub fn estimate(space: &StateSpace, prop: &Property, opts: &SimOptions) -> Result<Estimate, SimError> {
    if opts.samples == 0 {
        return Err(SimError::Options("need at least one sample".into()));
    }
    if !(opts.warmup >= 0.0 && opts.warmup < 1.0) || !(opts.steady_horizon > 0.0 && opts.steady_horizon.is_finite()) {
        return Err(SimError::Options("steady horizon must be positive and warm-up in [0, 1)".into()));
    }
    if prop.kind.is_steady() {
        let b = bottom_sccs(space).len();
        if b != 1 {
            return Err(SimError::MultipleBsccs(b));
        }
    }
    let pred = |e: &Option<crate::expr::Expr>| -> Result<Vec<bool>, SpaceError> {
        Ok(space.predicate(e.as_ref().expect("parsed property has its predicate"), &prop.env)?)
    };
    let walker = Walker::new(space, prop.reward.as_deref())?;
    let t = prop.bound.unwrap_or(0.0);
    let (from, to) = (opts.warmup * opts.steady_horizon, opts.steady_horizon);
    let phi = match prop.kind {
        PropertyKind::BoundedG => Some(pred(&prop.phi)?.into_iter().map(|b| !b).collect::<Vec<_>>()),
        PropertyKind::CumulReward | PropertyKind::SteadyReward => None,
        _ => Some(pred(&prop.phi)?),
    };
    let phi1 = match prop.kind {
        PropertyKind::BoundedU => Some(pred(&prop.phi1)?),
        _ => None,
    };
    let values: Vec<f64> = (0..opts.samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(opts.seed, i);
            match prop.kind {
                PropertyKind::BoundedF | PropertyKind::BoundedU => {
                    walker.reach(phi1.as_deref(), phi.as_deref().unwrap(), t, &mut rng)
                }
                PropertyKind::BoundedG => 1.0 - walker.reach(None, phi.as_deref().unwrap(), t, &mut rng),
                PropertyKind::CumulReward => walker.cumulative(t, &mut rng),
                PropertyKind::SteadyProb => walker.long_run(phi.as_deref(), from, to, &mut rng),
                PropertyKind::SteadyReward => walker.long_run(None, from, to, &mut rng),
            }
        })
        .collect();
    Ok(summarize(&values, opts.seed))
}

/// Standard deviation against which an estimate of `prop` is compared with a reference value.
///
/// With at least ten informative samples this is the estimate's own standard error. Below
/// that the sample variance is meaningless (often exactly zero), so the standard error the
/// reference value itself implies is used: `sqrt(p(1-p)/n)` for probabilities and
/// `sqrt(ref*q/n)` for rewards, where `q` bounds the reward a single sample can collect per event.
pub fn agreement_sigma(space: &StateSpace, prop: &Property, est: &Estimate, reference: f64) -> Result<f64, SimError> {
    let n = est.samples as f64;
    let informative = if prop.kind.is_probability() { est.hits.min(est.samples - est.hits) } else { est.hits };
    if informative >= 10 {
        if let Some(se) = est.std_error {
            return Ok(se);
        }
    }
    if prop.kind.is_probability() {
        let p = reference.clamp(0.0, 1.0);
        return Ok((p * (1.0 - p) / n).sqrt());
    }
    let name = prop.reward.as_deref().expect("reward property names its reward");
    let max_abs = |v: Vec<f64>| v.into_iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let span = if prop.kind.is_steady() { 1.0 } else { prop.bound.unwrap_or(1.0).max(1.0) };
    let q = max_abs(space.transition_impulses(name)?).max(max_abs(space.state_rewards(name)?) * span);
    Ok((reference.abs() * q / n).sqrt())
}
