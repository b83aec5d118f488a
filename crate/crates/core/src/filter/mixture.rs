//! Evaluation of the mixture ratio shared by the marginal filters:
//!
//! ```text
//! Σ_j a_j p(x_i | x_{t-1}^j)  /  Σ_j b_j q(x_i | y_t, x_{t-1}^j)
//! ```
//!
//! When both densities are diagonal Gaussians the sums are handed to the
//! kernel-summation engine with sources at the component centres.

use super::{ParticleSet, Proposal};
use crate::kernelsum::{kernel_sum, Backend, KernelSpec, KernelSumRequest};
use crate::model::StateSpaceModel;
use crate::{Error, Result};

/// Below `REFINE_RATIO · ε · Σ b` a fast denominator may carry more than a
/// few percent relative error, so that target is recomputed exactly.
const REFINE_RATIO: f64 = 32.0;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

struct GaussianMixture {
    centers: Vec<f64>,
    std: Vec<f64>,
}

impl GaussianMixture {
    fn log_norm(&self) -> f64 {
        -self.std.iter().map(|s| LN_SQRT_2PI + s.ln()).sum::<f64>()
    }

    fn kernel(&self) -> KernelSpec {
        KernelSpec::gaussian(self.std.clone())
    }

    /// Exact `ln Σ_j w_j exp(−|(x − c_j)/σ|²/2)` in log domain.
    fn exact_log_sum(&self, weights: &[f64], x: &[f64]) -> f64 {
        let d = self.std.len();
        let mut max = f64::NEG_INFINITY;
        let exps: Vec<f64> = self
            .centers
            .chunks_exact(d)
            .zip(weights)
            .map(|(c, &w)| {
                if w == 0.0 {
                    return f64::NEG_INFINITY;
                }
                let d2: f64 = c.iter().zip(x).zip(&self.std).map(|((a, b), s)| ((a - b) / s).powi(2)).sum();
                let v = w.ln() - 0.5 * d2;
                max = max.max(v);
                v
            })
            .collect();
        if max == f64::NEG_INFINITY {
            return max;
        }
        max + exps.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
    }
}

pub(crate) struct MixtureRatio<'a> {
    pub model: &'a dyn StateSpaceModel,
    pub proposal: &'a dyn Proposal,
    pub prev: &'a ParticleSet,
    pub y: &'a [f64],
    pub t: usize,
    pub backend: Backend,
    pub epsilon: f64,
}

impl MixtureRatio<'_> {
    fn transition_form(&self) -> Option<GaussianMixture> {
        let std = self.model.transition_noise_std(self.t)?;
        let d = self.prev.dim;
        let mut centers = vec![0.0; self.prev.states.len()];
        for (c, x) in centers.chunks_exact_mut(d).zip(self.prev.states.chunks_exact(d)) {
            self.model.transition_representative(x, self.t, c);
        }
        Some(GaussianMixture { centers, std })
    }

    fn proposal_form(&self) -> Option<GaussianMixture> {
        let std = self.proposal.kernel_std(self.model, self.y, self.t)?;
        let d = self.prev.dim;
        let mut centers = vec![0.0; self.prev.states.len()];
        for (c, x) in centers.chunks_exact_mut(d).zip(self.prev.states.chunks_exact(d)) {
            self.proposal.kernel_center(self.model, self.y, x, self.t, c);
        }
        Some(GaussianMixture { centers, std })
    }

    /// `ln(num_i / den_i)` for every target, with `a = num_weights` on the
    /// transition mixture and `b = den_weights` on the proposal mixture.
    pub fn log_ratio(&self, num_weights: &[f64], den_weights: &[f64], targets: &[f64]) -> Result<Vec<f64>> {
        let n_targets = targets.len() / self.prev.dim;
        let num_form = self.transition_form();
        let den_form = self.proposal_form();

        let same_weights = num_weights == den_weights;
        match (&num_form, &den_form) {
            (Some(a), Some(b)) if same_weights && a.std == b.std && a.centers == b.centers => {
                return Ok(vec![0.0; n_targets]);
            }
            (None, None) if same_weights && self.proposal.is_transition_prior() => {
                return Ok(vec![0.0; n_targets]);
            }
            _ => {}
        }

        match (num_form, den_form) {
            (Some(num), Some(den)) => self.gaussian_ratio(&num, &den, num_weights, den_weights, targets),
            _ if self.backend == Backend::Fgt => Err(Error::BackendIncompatible {
                backend: self.backend.name(),
                reason: "transition and proposal must both be diagonal gaussians".into(),
            }),
            // the dual tree has no kernel form to work with here either
            _ => Ok(self.generic_ratio(num_weights, den_weights, targets)),
        }
    }

    fn gaussian_ratio(
        &self,
        num: &GaussianMixture,
        den: &GaussianMixture,
        num_weights: &[f64],
        den_weights: &[f64],
        targets: &[f64],
    ) -> Result<Vec<f64>> {
        let d = self.prev.dim;
        let sum = |g: &GaussianMixture, w: &[f64]| -> Result<Vec<f64>> {
            let kernel = g.kernel();
            let req = KernelSumRequest {
                dim: d,
                sources: &g.centers,
                source_weights: w,
                targets,
                kernel: &kernel,
                epsilon: self.epsilon,
            };
            kernel_sum(&req, self.backend)
        };
        let q_num = sum(num, num_weights)?;
        let q_den = sum(den, den_weights)?;

        let refine_below = match self.backend {
            Backend::Naive => 0.0,
            _ => REFINE_RATIO * self.epsilon * den_weights.iter().sum::<f64>(),
        };
        let offset = num.log_norm() - den.log_norm();
        let out = targets
            .chunks_exact(d)
            .zip(q_num.iter().zip(&q_den))
            .map(|(x, (&a, &b))| {
                // underflowed or overshot numerators go to the log domain too
                if b <= refine_below || a <= 0.0 {
                    num.exact_log_sum(num_weights, x) - den.exact_log_sum(den_weights, x) + offset
                } else {
                    a.max(0.0).ln() - b.ln() + offset
                }
            })
            .collect();
        Ok(out)
    }

    /// Direct log-domain evaluation with the model and proposal densities.
    fn generic_ratio(&self, num_weights: &[f64], den_weights: &[f64], targets: &[f64]) -> Vec<f64> {
        let d = self.prev.dim;
        let n = self.prev.len();
        let mut terms = vec![0.0; n];
        targets
            .chunks_exact(d)
            .map(|x| {
                for (j, term) in terms.iter_mut().enumerate() {
                    *term = num_weights[j].ln() + self.model.transition_logdensity(x, self.prev.state(j), self.t);
                }
                let ln_num = super::log_sum_exp(terms.iter().copied());
                for (j, term) in terms.iter_mut().enumerate() {
                    *term = den_weights[j].ln()
                        + self.proposal.logdensity(self.model, x, self.y, self.prev.state(j), self.t);
                }
                ln_num - super::log_sum_exp(terms.iter().copied())
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::{HeavyTailedPrior, TransitionPrior};
    use crate::model::{StochVolModel, UngmModel};

    fn prev_set() -> ParticleSet {
        let states = vec![-6.0, -2.5, -0.3, 0.1, 1.7, 4.0, 9.5];
        let lw = vec![0.2, -1.0, 0.0, 0.5, -3.0, 1.2, -0.4];
        ParticleSet::new(1, states, lw, 4, (0..7).collect()).unwrap()
    }

    #[test]
    fn gaussian_path_matches_direct_densities() {
        let prev = prev_set();
        let targets: Vec<f64> = (0..40).map(|i| -15.0 + 0.8 * i as f64).collect();
        let lambda: Vec<f64> = prev.norm_weights.iter().rev().copied().collect();
        let ungm = UngmModel::default();
        let sv = StochVolModel::default();
        let heavy = HeavyTailedPrior::default();
        let models: [&dyn StateSpaceModel; 2] = [&ungm, &sv];
        let proposals: [&dyn Proposal; 2] = [&heavy, &TransitionPrior];
        for model in models {
            for proposal in proposals {
                for backend in [Backend::Naive, Backend::DualTree, Backend::Fgt] {
                    let r = MixtureRatio { model, proposal, prev: &prev, y: &[0.4], t: 5, backend, epsilon: 1e-9 };
                    let fast = r.log_ratio(&prev.norm_weights, &lambda, &targets).unwrap();
                    let direct = r.generic_ratio(&prev.norm_weights, &lambda, &targets);
                    for (a, b) in fast.iter().zip(&direct) {
                        if backend == Backend::Naive {
                            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
                        } else {
                            // absolute error contract: small sums only keep a few digits
                            assert!((a - b).abs() < 1e-3, "{backend}: {a} vs {b}");
                        }
                    }
                }
            }
        }
    }
}
