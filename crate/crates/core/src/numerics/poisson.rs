/// Normalized Poisson probabilities on `left..left + weights.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonWeights {
    pub left: usize,
    pub weights: Vec<f64>,
}

impl PoissonWeights {
    pub fn right(&self) -> usize {
        self.left + self.weights.len() - 1
    }

    /// Weight of `k`, zero outside the truncation window.
    pub fn get(&self, k: usize) -> f64 {
        if k < self.left {
            0.0
        } else {
            self.weights.get(k - self.left).copied().unwrap_or(0.0)
        }
    }
}

/// Poisson(`qt`) weights truncated on both sides so that at most `eps` mass is dropped.
///
/// Weights are built outward from the mode with ratio recurrences starting at 1, so
/// nothing underflows before the geometric tail bound stops the sweep.
pub fn poisson_weights(qt: f64, eps: f64) -> PoissonWeights {
    assert!(qt >= 0.0 && qt.is_finite(), "Poisson parameter must be finite and nonnegative");
    if qt == 0.0 {
        return PoissonWeights { left: 0, weights: vec![1.0] };
    }
    let mode = qt.floor() as usize;
    let half = eps / 2.0;

    let mut right = vec![1.0];
    let mut sum = 1.0;
    let mut w = 1.0;
    let mut k = mode;
    loop {
        w *= qt / (k + 1) as f64;
        k += 1;
        right.push(w);
        sum += w;
        let r = qt / (k + 1) as f64;
        if w * r / (1.0 - r) <= half * sum {
            break;
        }
    }

    let mut left = Vec::new();
    let mut w = 1.0;
    let mut k = mode;
    while k > 0 {
        w *= k as f64 / qt;
        k -= 1;
        left.push(w);
        sum += w;
        if k == 0 {
            break;
        }
        let r = k as f64 / qt;
        if w * r / (1.0 - r) <= half * sum {
            break;
        }
    }

    let start = mode - left.len();
    let mut weights: Vec<f64> = left.into_iter().rev().chain(right).collect();
    let total: f64 = weights.iter().sum();
    for x in &mut weights {
        *x /= total;
    }
    PoissonWeights { left: start, weights }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{Discrete, DiscreteCDF, Poisson};

    fn pmf(qt: f64, k: usize) -> f64 {
        Poisson::new(qt).unwrap().pmf(k as u64)
    }

    #[test]
    fn matches_direct_pmf() {
        for &qt in &[0.3, 1.0, 7.5, 40.0, 300.0] {
            let p = poisson_weights(qt, 1e-12);
            for k in p.left..=p.right() {
                let want = pmf(qt, k);
                assert!((p.get(k) - want).abs() <= 1e-12 + 1e-9 * want, "qt={qt} k={k}");
            }
        }
    }

    #[test]
    fn truncation_keeps_mass() {
        for &qt in &[0.01, 5.0, 1e3, 1e5, 1.02e6] {
            let p = poisson_weights(qt, 1e-10);
            let d = Poisson::new(qt).unwrap();
            let below = if p.left == 0 { 0.0 } else { d.cdf(p.left as u64 - 1) };
            let above = d.sf(p.right() as u64);
            assert!(below + above <= 1e-10, "qt={qt} dropped {}", below + above);
            assert!((p.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn window_is_narrow_for_large_parameters() {
        let p = poisson_weights(1e6, 1e-10);
        assert!(p.left > 990_000 && p.right() < 1_010_000, "{}..{}", p.left, p.right());
    }

    #[test]
    fn zero_is_a_point_mass() {
        assert_eq!(poisson_weights(0.0, 1e-10), PoissonWeights { left: 0, weights: vec![1.0] });
    }
}
