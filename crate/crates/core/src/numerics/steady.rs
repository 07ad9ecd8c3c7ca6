use super::bscc::bottom_sccs;
use super::{NumericsError, SolverOptions, SteadyMethod};
use crate::space::StateSpace;

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyResult {
    pub dist: Vec<f64>,
    /// Iterations summed over all BSCC solves.
    pub iterations: usize,
    pub method: SteadyMethod,
    pub bsccs: usize,
}

/// Generator of one closed class in incoming-edge (column) form.
struct Block {
    in_ptr: Vec<usize>,
    in_src: Vec<usize>,
    in_rate: Vec<f64>,
    leave: Vec<f64>,
}

impl Block {
    fn new(space: &StateSpace, members: &[usize]) -> Self {
        let n = space.num_states();
        let mut local = vec![usize::MAX; n];
        for (i, &s) in members.iter().enumerate() {
            local[s] = i;
        }
        let m = members.len();
        let mut counts = vec![0usize; m + 1];
        let mut leave = vec![0.0; m];
        for (i, &s) in members.iter().enumerate() {
            for (j, r, _) in space.row(s) {
                if j != s {
                    counts[local[j] + 1] += 1;
                    leave[i] += r;
                }
            }
        }
        for i in 0..m {
            counts[i + 1] += counts[i];
        }
        let in_ptr = counts.clone();
        let mut fill = counts;
        let mut in_src = vec![0; in_ptr[m]];
        let mut in_rate = vec![0.0; in_ptr[m]];
        for (i, &s) in members.iter().enumerate() {
            for (j, r, _) in space.row(s) {
                if j != s {
                    let lj = local[j];
                    in_src[fill[lj]] = i;
                    in_rate[fill[lj]] = r;
                    fill[lj] += 1;
                }
            }
        }
        Block { in_ptr, in_src, in_rate, leave }
    }

    fn len(&self) -> usize {
        self.leave.len()
    }

    fn inflow(&self, pi: &[f64], j: usize) -> f64 {
        let mut s = 0.0;
        for k in self.in_ptr[j]..self.in_ptr[j + 1] {
            s += pi[self.in_src[k]] * self.in_rate[k];
        }
        s
    }

    /// ‖πQ‖∞ restricted to the block.
    fn residual(&self, pi: &[f64]) -> f64 {
        (0..self.len()).map(|j| (self.inflow(pi, j) - pi[j] * self.leave[j]).abs()).fold(0.0, f64::max)
    }

    fn solve(&self, opts: &SolverOptions) -> Result<(Vec<f64>, usize), NumericsError> {
        let m = self.len();
        if m == 1 {
            return Ok((vec![1.0], 0));
        }
        let lambda = 1.02 * self.leave.iter().cloned().fold(0.0, f64::max);
        let omega = 0.9;
        let mut pi = vec![1.0 / m as f64; m];
        let mut prev = pi.clone();
        let mut residual = f64::INFINITY;
        for it in 1..=opts.max_iters {
            prev.copy_from_slice(&pi);
            match opts.method {
                SteadyMethod::GaussSeidel => {
                    for j in 0..m {
                        pi[j] = self.inflow(&pi, j) / self.leave[j];
                    }
                }
                SteadyMethod::Jacobi => {
                    for j in 0..m {
                        let jac = self.inflow(&prev, j) / self.leave[j];
                        pi[j] = (1.0 - omega) * prev[j] + omega * jac;
                    }
                }
                SteadyMethod::Power => {
                    for j in 0..m {
                        pi[j] = prev[j] * (1.0 - self.leave[j] / lambda) + self.inflow(&prev, j) / lambda;
                    }
                }
            }
            let total: f64 = pi.iter().sum();
            for x in &mut pi {
                *x /= total;
            }
            // Relative change, except that entries below ε·max are measured against ε·max:
            // their relative digits cannot influence any answer and converge very slowly.
            let max = pi.iter().cloned().fold(0.0, f64::max);
            let floor = opts.epsilon * max;
            let change = pi.iter().zip(&prev).map(|(&a, &b)| (a - b).abs() / a.max(floor)).fold(0.0, f64::max);
            if change < opts.epsilon {
                residual = self.residual(&pi);
                if residual < opts.epsilon * max {
                    return Ok((pi, it));
                }
            }
        }
        if !residual.is_finite() {
            residual = self.residual(&pi);
        }
        Err(NumericsError::NotConverged { method: opts.method, iterations: opts.max_iters, residual })
    }
}

/// Probability of eventually entering each BSCC from the initial state.
fn absorption_weights(space: &StateSpace, bsccs: &[Vec<usize>], opts: &SolverOptions) -> Vec<f64> {
    let n = space.num_states();
    let mut which = vec![usize::MAX; n];
    for (b, members) in bsccs.iter().enumerate() {
        for &s in members {
            which[s] = b;
        }
    }
    let init = space.initial();
    if which[init] != usize::MAX {
        let mut w = vec![0.0; bsccs.len()];
        w[which[init]] = 1.0;
        return w;
    }
    let transient: Vec<usize> = (0..n).filter(|&s| which[s] == usize::MAX).collect();
    let leave = space.leave_rates();
    let mut weights = Vec::with_capacity(bsccs.len());
    for b in 0..bsccs.len() {
        let mut x: Vec<f64> = which.iter().map(|&w| if w == b { 1.0 } else { 0.0 }).collect();
        // Iterate until the largest update is negligible; convergence is monotone from below.
        for _ in 0..opts.max_iters.max(1) * 10 {
            let mut change: f64 = 0.0;
            for &s in &transient {
                if leave[s] == 0.0 {
                    continue;
                }
                let v: f64 = space.row(s).filter(|&(j, _, _)| j != s).map(|(j, r, _)| r * x[j]).sum::<f64>() / leave[s];
                change = change.max((v - x[s]).abs());
                x[s] = v;
            }
            if change < opts.epsilon * 1e-3 {
                break;
            }
        }
        weights.push(x[init]);
    }
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

/// Long-run distribution, weighting each BSCC's solution by its absorption probability.
pub fn steady_state(space: &StateSpace, opts: &SolverOptions) -> Result<SteadyResult, NumericsError> {
    opts.check()?;
    let bsccs = bottom_sccs(space);
    let weights = if bsccs.len() == 1 { vec![1.0] } else { absorption_weights(space, &bsccs, opts) };
    let mut dist = vec![0.0; space.num_states()];
    let mut iterations = 0;
    for (members, w) in bsccs.iter().zip(&weights) {
        if *w == 0.0 {
            continue;
        }
        let (pi, it) = Block::new(space, members).solve(opts)?;
        iterations += it;
        for (&s, p) in members.iter().zip(pi) {
            dist[s] = w * p;
        }
    }
    Ok(SteadyResult { dist, iterations, method: opts.method, bsccs: bsccs.len() })
}

/// Σ π(s)·ρ(s) for a reward structure.
pub fn long_run_expected_reward(space: &StateSpace, reward: &str, opts: &SolverOptions) -> Result<f64, NumericsError> {
    let rho = space.reward_rate_vector(reward)?;
    let pi = steady_state(space, opts)?;
    Ok(pi.dist.iter().zip(&rho).map(|(p, r)| p * r).sum())
}
