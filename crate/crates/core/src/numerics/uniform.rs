use crate::space::StateSpace;

/// The uniformized DTMC P = I + Q/Λ, with optional absorbing overrides.
///
/// Self-loops cancel in Q, so Λ only needs to dominate the rate of actually leaving a state.
#[derive(Debug, Clone)]
pub struct Uniformized {
    lambda: f64,
    /// P(s,s) for each state.
    stay: Vec<f64>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    probs: Vec<f64>,
}

impl Uniformized {
    /// `absorbing[s] == true` removes every outgoing transition of `s`.
    pub fn new(space: &StateSpace, absorbing: Option<&[bool]>) -> Self {
        let n = space.num_states();
        let is_abs = |s: usize| absorbing.is_some_and(|a| a[s]);
        let mut leave = vec![0.0; n];
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut rates = Vec::new();
        row_ptr.push(0);
        for (s, l) in leave.iter_mut().enumerate() {
            if !is_abs(s) {
                for (j, r, _) in space.row(s) {
                    if j != s {
                        *l += r;
                        cols.push(j as u32);
                        rates.push(r);
                    }
                }
            }
            row_ptr.push(cols.len());
        }
        let max = leave.iter().cloned().fold(0.0, f64::max);
        let lambda = if max > 0.0 { 1.02 * max } else { 1.0 };
        let stay = leave.iter().map(|l| 1.0 - l / lambda).collect();
        let probs = rates.iter().map(|r| r / lambda).collect();
        Uniformized { lambda, stay, row_ptr, cols, probs }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn len(&self) -> usize {
        self.stay.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stay.is_empty()
    }

    /// `out = v · P`.
    pub fn step(&self, v: &[f64], out: &mut [f64]) {
        for ((o, &x), &p) in out.iter_mut().zip(v).zip(&self.stay) {
            *o = x * p;
        }
        for (s, &x) in v.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for k in self.row_ptr[s]..self.row_ptr[s + 1] {
                out[self.cols[k] as usize] += x * self.probs[k];
            }
        }
    }
}
