use super::poisson::poisson_weights;
use super::uniform::Uniformized;
use super::{NumericsError, SolverOptions};
use crate::space::StateSpace;

/// Work done by one uniformization run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TransientStats {
    pub lambda: f64,
    pub left: usize,
    pub right: usize,
}

fn check_time(t: f64) -> Result<(), NumericsError> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(NumericsError::NegativeTime(t))
    }
}

fn point_mass(n: usize, s: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[s] = 1.0;
    v
}

pub(crate) fn transient_from(u: &Uniformized, pi0: Vec<f64>, t: f64, eps: f64) -> (Vec<f64>, TransientStats) {
    let qt = u.lambda() * t;
    let w = poisson_weights(qt, eps);
    let stats = TransientStats { lambda: u.lambda(), left: w.left, right: w.right() };
    let mut acc = vec![0.0; pi0.len()];
    let mut v = pi0;
    let mut next = vec![0.0; v.len()];
    for k in 0..=w.right() {
        let wk = w.get(k);
        if wk > 0.0 {
            for (a, x) in acc.iter_mut().zip(&v) {
                *a += wk * x;
            }
        }
        if k < w.right() {
            u.step(&v, &mut next);
            std::mem::swap(&mut v, &mut next);
        }
    }
    (acc, stats)
}

/// Distribution at time `t` from the initial state, by uniformization.
pub fn transient_distribution(space: &StateSpace, t: f64, opts: &SolverOptions) -> Result<Vec<f64>, NumericsError> {
    Ok(transient_with_stats(space, t, opts)?.0)
}

pub(crate) fn transient_with_stats(
    space: &StateSpace,
    t: f64,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, TransientStats), NumericsError> {
    check_time(t)?;
    let u = Uniformized::new(space, None);
    Ok(transient_from(&u, point_mass(space.num_states(), space.initial()), t, opts.trunc_epsilon))
}

/// P(reach `target` within `t`).
pub fn bounded_reachability(
    space: &StateSpace,
    target: &[bool],
    t: f64,
    opts: &SolverOptions,
) -> Result<f64, NumericsError> {
    Ok(until_with_stats(space, None, target, t, opts)?.0)
}

/// P(`phi1` U<=t `phi2`).
pub fn bounded_until(
    space: &StateSpace,
    phi1: &[bool],
    phi2: &[bool],
    t: f64,
    opts: &SolverOptions,
) -> Result<f64, NumericsError> {
    Ok(until_with_stats(space, Some(phi1), phi2, t, opts)?.0)
}

pub(crate) fn until_with_stats(
    space: &StateSpace,
    phi1: Option<&[bool]>,
    phi2: &[bool],
    t: f64,
    opts: &SolverOptions,
) -> Result<(f64, TransientStats), NumericsError> {
    check_time(t)?;
    let init = space.initial();
    if phi2[init] {
        return Ok((1.0, TransientStats::default()));
    }
    if phi1.is_some_and(|p| !p[init]) {
        return Ok((0.0, TransientStats::default()));
    }
    let absorbing: Vec<bool> = match phi1 {
        None => phi2.to_vec(),
        Some(p1) => phi2.iter().zip(p1).map(|(&g, &ok)| g || !ok).collect(),
    };
    let u = Uniformized::new(space, Some(&absorbing));
    let (dist, stats) = transient_from(&u, point_mass(space.num_states(), init), t, opts.trunc_epsilon);
    let p: f64 = dist.iter().zip(phi2).filter(|(_, &g)| g).map(|(x, _)| x).sum();
    Ok((p.clamp(0.0, 1.0), stats))
}

/// E[∫₀ᵗ ρ(X_u) du] for a per-state reward rate vector.
pub(crate) fn cumulative_from_rates(
    space: &StateSpace,
    rho: &[f64],
    t: f64,
    opts: &SolverOptions,
) -> Result<(f64, TransientStats), NumericsError> {
    check_time(t)?;
    if t == 0.0 {
        return Ok((0.0, TransientStats::default()));
    }
    let u = Uniformized::new(space, None);
    let w = poisson_weights(u.lambda() * t, opts.trunc_epsilon);
    let stats = TransientStats { lambda: u.lambda(), left: w.left, right: w.right() };
    // tail[k - left] = P(N > k) inside the window; P(N > k) = 1 below it.
    let mut tail = vec![0.0; w.weights.len()];
    let mut run = 0.0;
    for i in (0..w.weights.len()).rev() {
        tail[i] = run;
        run += w.weights[i];
    }
    let mut v = point_mass(space.num_states(), space.initial());
    let mut next = vec![0.0; v.len()];
    let mut total = 0.0;
    for k in 0..=w.right() {
        let g = if k < w.left { 1.0 } else { tail[k - w.left] };
        if g == 0.0 {
            break;
        }
        let dot: f64 = v.iter().zip(rho).map(|(a, b)| a * b).sum();
        total += g * dot;
        u.step(&v, &mut next);
        std::mem::swap(&mut v, &mut next);
    }
    Ok((total / u.lambda(), stats))
}

/// Expected reward accumulated up to time `t`.
pub fn cumulative_expected_reward(
    space: &StateSpace,
    reward: &str,
    t: f64,
    opts: &SolverOptions,
) -> Result<f64, NumericsError> {
    let rho = space.reward_rate_vector(reward)?;
    Ok(cumulative_from_rates(space, &rho, t, opts)?.0)
}
