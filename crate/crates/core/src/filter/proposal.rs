use rand::RngCore;

use crate::model::StateSpaceModel;
use crate::{Error, Result};

/// Importance distribution `q(x_t | y_t, x_{t-1})`.
///
/// The density must be positive wherever `p(y_t|x_t) p(x_t|x_{t-1})` is.
pub trait Proposal: Send + Sync {
    fn sample(
        &self,
        model: &dyn StateSpaceModel,
        y: &[f64],
        prev: &[f64],
        t: usize,
        rng: &mut dyn RngCore,
        out: &mut [f64],
    );

    fn logdensity(&self, model: &dyn StateSpaceModel, x: &[f64], y: &[f64], prev: &[f64], t: usize) -> f64;

    /// Per-dimension standard deviation when `q` is a diagonal Gaussian
    /// centred on [`Proposal::kernel_center`].
    fn kernel_std(&self, _model: &dyn StateSpaceModel, _y: &[f64], _t: usize) -> Option<Vec<f64>> {
        None
    }

    fn kernel_center(&self, model: &dyn StateSpaceModel, _y: &[f64], prev: &[f64], t: usize, out: &mut [f64]) {
        model.transition_representative(prev, t, out);
    }

    /// True when `q` is exactly the model's transition prior.
    fn is_transition_prior(&self) -> bool {
        false
    }
}

/// `q(x_t | y_t, x_{t-1}) = p(x_t | x_{t-1})`.
#[derive(Debug, Clone, Copy, Default)]
pub struct TransitionPrior;

impl Proposal for TransitionPrior {
    fn sample(&self, model: &dyn StateSpaceModel, _y: &[f64], prev: &[f64], t: usize, rng: &mut dyn RngCore, out: &mut [f64]) {
        model.sample_transition(prev, t, rng, out);
    }

    fn logdensity(&self, model: &dyn StateSpaceModel, x: &[f64], _y: &[f64], prev: &[f64], t: usize) -> f64 {
        model.transition_logdensity(x, prev, t)
    }

    fn kernel_std(&self, model: &dyn StateSpaceModel, _y: &[f64], t: usize) -> Option<Vec<f64>> {
        model.transition_noise_std(t)
    }

    fn is_transition_prior(&self) -> bool {
        true
    }
}

/// Transition prior widened about its representative point:
/// `x = μ + s (z − μ)` with `z ~ p(· | x_{t-1})`, `μ` the representative and
/// `s` the inflation factor. For a Gaussian transition this is the same
/// Gaussian with standard deviation multiplied by `s`.
#[derive(Debug, Clone, Copy)]
pub struct HeavyTailedPrior {
    pub inflation: f64,
}

impl Default for HeavyTailedPrior {
    fn default() -> Self {
        Self { inflation: 2.0 }
    }
}

impl HeavyTailedPrior {
    pub fn new(inflation: f64) -> Result<Self> {
        if !(inflation.is_finite() && inflation >= 1.0) {
            return Err(Error::param("proposal_inflation", format!("must be >= 1, got {inflation}")));
        }
        Ok(Self { inflation })
    }
}

impl Proposal for HeavyTailedPrior {
    fn sample(&self, model: &dyn StateSpaceModel, _y: &[f64], prev: &[f64], t: usize, rng: &mut dyn RngCore, out: &mut [f64]) {
        let mut mu = vec![0.0; out.len()];
        model.transition_representative(prev, t, &mut mu);
        model.sample_transition(prev, t, rng, out);
        for (o, m) in out.iter_mut().zip(&mu) {
            *o = m + self.inflation * (*o - m);
        }
    }

    fn logdensity(&self, model: &dyn StateSpaceModel, x: &[f64], _y: &[f64], prev: &[f64], t: usize) -> f64 {
        let mut z = vec![0.0; x.len()];
        model.transition_representative(prev, t, &mut z);
        for (zi, xi) in z.iter_mut().zip(x) {
            *zi += (xi - *zi) / self.inflation;
        }
        model.transition_logdensity(&z, prev, t) - x.len() as f64 * self.inflation.ln()
    }

    fn kernel_std(&self, model: &dyn StateSpaceModel, _y: &[f64], t: usize) -> Option<Vec<f64>> {
        model.transition_noise_std(t).map(|s| s.into_iter().map(|v| v * self.inflation).collect())
    }

    fn is_transition_prior(&self) -> bool {
        self.inflation == 1.0
    }
}
