use crate::{Error, Result};

/// Weighted particle approximation of `p(x_t | y_{1:t})`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    pub dim: usize,
    /// `N × dim` state coordinates, row-major.
    pub states: Vec<f64>,
    /// Unnormalized log weights.
    pub log_weights: Vec<f64>,
    /// Normalized weights, summing to one.
    pub norm_weights: Vec<f64>,
    pub time_index: usize,
    /// For each particle, the index in the previous set of the particle
    /// (SIR) or mixture component (marginal filters) it was drawn from.
    pub ancestors: Vec<usize>,
}

impl ParticleSet {
    pub fn new(
        dim: usize,
        states: Vec<f64>,
        log_weights: Vec<f64>,
        time_index: usize,
        ancestors: Vec<usize>,
    ) -> Result<Self> {
        let n = log_weights.len();
        if n == 0 || dim == 0 || states.len() != n * dim || ancestors.len() != n {
            return Err(Error::LengthMismatch(format!(
                "{} states of dim {dim}, {n} weights, {} ancestors",
                states.len(),
                ancestors.len()
            )));
        }
        let norm_weights = normalize_log_weights(&log_weights).ok_or(Error::DegenerateWeights { t: time_index })?;
        Ok(Self { dim, states, log_weights, norm_weights, time_index, ancestors })
    }

    /// Equally weighted set.
    pub fn uniform(dim: usize, states: Vec<f64>, time_index: usize) -> Result<Self> {
        let n = states.len() / dim.max(1);
        Self::new(dim, states, vec![0.0; n], time_index, (0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    /// Normalized weights in log domain.
    pub fn log_norm_weights(&self) -> Vec<f64> {
        self.norm_weights.iter().map(|w| w.ln()).collect()
    }

    /// Posterior mean `Σ_i w_i x_i`.
    pub fn mean(&self) -> Vec<f64> {
        self.expectation(|x| x.to_vec())
    }

    /// `Σ_i w_i f(x_i)` for a vector-valued test function.
    pub fn expectation(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
        let mut acc: Vec<f64> = Vec::new();
        for (i, &w) in self.norm_weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let v = f(self.state(i));
            if acc.is_empty() {
                acc = vec![0.0; v.len()];
            }
            for (a, b) in acc.iter_mut().zip(v) {
                *a += w * b;
            }
        }
        acc
    }
}

/// Max-shifted normalization. `None` when no weight is positive or a weight
/// is NaN. Weights of `+inf` share the mass equally.
pub fn normalize_log_weights(log_weights: &[f64]) -> Option<Vec<f64>> {
    if log_weights.iter().any(|l| l.is_nan()) {
        return None;
    }
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    let mut w: Vec<f64> = if max == f64::INFINITY {
        log_weights.iter().map(|&l| if l == f64::INFINITY { 1.0 } else { 0.0 }).collect()
    } else {
        log_weights.iter().map(|&l| (l - max).exp()).collect()
    };
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    Some(w)
}

/// `ln Σ_i exp(v_i)`, `-inf` for an empty or all-`-inf` input.
pub fn log_sum_exp(values: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.into_iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
