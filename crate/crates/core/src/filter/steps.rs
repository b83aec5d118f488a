use rand::RngCore;

use super::mixture::MixtureRatio;
use super::resample::{resample_indices, Resampler};
use super::{normalize_log_weights, FilterConfig, ParticleSet, Proposal};
use crate::model::StateSpaceModel;
use crate::{Error, Result};

/// First-stage quantities of the auxiliary filters.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationWeights {
    /// Normalized `λ_{t-1}^k ∝ w_{t-1}^k p(y_t | μ_t^k)`.
    pub lambda: Vec<f64>,
    /// `ln p(y_t | μ_t^k)`, or the exact predictive log-likelihood when the
    /// model provides one.
    pub log_lookahead: Vec<f64>,
    /// `μ_t^k`, row-major.
    pub representatives: Vec<f64>,
}

pub fn compute_simulation_weights(
    prev: &ParticleSet,
    y: &[f64],
    model: &dyn StateSpaceModel,
) -> Result<SimulationWeights> {
    let t = prev.time_index + 1;
    let d = prev.dim;
    let mut representatives = vec![0.0; prev.states.len()];
    let mut log_lookahead = Vec::with_capacity(prev.len());
    for (i, mu) in representatives.chunks_exact_mut(d).enumerate() {
        let x = prev.state(i);
        model.transition_representative(x, t, mu);
        let l = model
            .predictive_loglikelihood(y, x, t)
            .unwrap_or_else(|| model.observation_logdensity(y, mu, t));
        log_lookahead.push(l);
    }
    let log_lambda: Vec<f64> = prev
        .norm_weights
        .iter()
        .zip(&log_lookahead)
        .map(|(w, l)| if *w == 0.0 { f64::NEG_INFINITY } else { w.ln() + l })
        .collect();
    let lambda = normalize_log_weights(&log_lambda).ok_or(Error::DegenerateSimulationWeights { t })?;
    Ok(SimulationWeights { lambda, log_lookahead, representatives })
}

fn should_resample(prev: &ParticleSet, config: &FilterConfig) -> bool {
    if config.resample_threshold >= 1.0 {
        return true;
    }
    let ess = 1.0 / prev.norm_weights.iter().map(|w| w * w).sum::<f64>();
    ess < config.resample_threshold * prev.len() as f64
}

/// Sequential importance sampling step with selection.
///
/// Selection is applied to the incoming set when its effective sample size
/// is below the configured threshold, so the returned set carries the
/// pre-selection weights of time `t` for estimation and diagnostics.
pub fn sir_step(
    prev: &ParticleSet,
    y: &[f64],
    model: &dyn StateSpaceModel,
    proposal: &dyn Proposal,
    config: &FilterConfig,
    rng: &mut dyn RngCore,
) -> Result<ParticleSet> {
    let t = prev.time_index + 1;
    let n = prev.len();
    let d = prev.dim;
    let (ancestors, base): (Vec<usize>, Vec<f64>) = if should_resample(prev, config) {
        (resample_indices(&prev.norm_weights, n, config.resampler, rng), vec![0.0; n])
    } else {
        ((0..n).collect(), prev.log_norm_weights())
    };

    let mut states = vec![0.0; n * d];
    let mut log_weights = Vec::with_capacity(n);
    for (i, x) in states.chunks_exact_mut(d).enumerate() {
        let parent = prev.state(ancestors[i]);
        proposal.sample(model, y, parent, t, rng, x);
        let lw = base[i] + model.observation_logdensity(y, x, t)
            + incremental_prior_ratio(model, proposal, x, y, parent, t);
        log_weights.push(lw);
    }
    ParticleSet::new(d, states, log_weights, t, ancestors)
}

/// `ln p(x|parent) − ln q(x|y, parent)`, exactly zero for the prior proposal.
fn incremental_prior_ratio(
    model: &dyn StateSpaceModel,
    proposal: &dyn Proposal,
    x: &[f64],
    y: &[f64],
    parent: &[f64],
    t: usize,
) -> f64 {
    if proposal.is_transition_prior() {
        0.0
    } else {
        model.transition_logdensity(x, parent, t) - proposal.logdensity(model, x, y, parent, t)
    }
}

/// Auxiliary SIR in two-stage form. The weight
/// `w^k p(y|x^k) p(x|x^k,y) / (λ^k q(x|x^k,y))` reduces, since
/// `w^k/λ^k ∝ 1/p(y|μ^k)` and `p(y|x^k) p(x|x^k,y) = p(y|x) p(x|x^k)`, to
/// `p(y|x) p(x|x^k) / (p(y|μ^k) q(x|y,x^k))`.
pub fn asir_step(
    prev: &ParticleSet,
    y: &[f64],
    model: &dyn StateSpaceModel,
    proposal: &dyn Proposal,
    config: &FilterConfig,
    rng: &mut dyn RngCore,
) -> Result<ParticleSet> {
    let t = prev.time_index + 1;
    let n = prev.len();
    let d = prev.dim;
    let sim = compute_simulation_weights(prev, y, model)?;
    let ancestors = resample_indices(&sim.lambda, n, config.resampler, rng);

    let mut states = vec![0.0; n * d];
    let mut log_weights = Vec::with_capacity(n);
    for (i, x) in states.chunks_exact_mut(d).enumerate() {
        let k = ancestors[i];
        let parent = prev.state(k);
        proposal.sample(model, y, parent, t, rng, x);
        let lw = model.observation_logdensity(y, x, t) + incremental_prior_ratio(model, proposal, x, y, parent, t)
            - sim.log_lookahead[k];
        log_weights.push(lw);
    }
    ParticleSet::new(d, states, log_weights, t, ancestors)
}

/// Marginal particle filter step: sample from `Σ_j w^j q(·|y, x^j)` by
/// stratified component selection, then weight against the full mixtures.
pub fn mpf_step(
    prev: &ParticleSet,
    y: &[f64],
    model: &dyn StateSpaceModel,
    proposal: &dyn Proposal,
    config: &FilterConfig,
    rng: &mut dyn RngCore,
) -> Result<ParticleSet> {
    marginal_step(prev, y, model, proposal, config, rng, &prev.norm_weights)
}

/// Auxiliary marginal particle filter step: as [`mpf_step`] with the
/// proposal mixture reweighted by the simulation weights `λ`.
pub fn ampf_step(
    prev: &ParticleSet,
    y: &[f64],
    model: &dyn StateSpaceModel,
    proposal: &dyn Proposal,
    config: &FilterConfig,
    rng: &mut dyn RngCore,
) -> Result<ParticleSet> {
    let sim = compute_simulation_weights(prev, y, model)?;
    marginal_step(prev, y, model, proposal, config, rng, &sim.lambda)
}

fn marginal_step(
    prev: &ParticleSet,
    y: &[f64],
    model: &dyn StateSpaceModel,
    proposal: &dyn Proposal,
    config: &FilterConfig,
    rng: &mut dyn RngCore,
    mixture_weights: &[f64],
) -> Result<ParticleSet> {
    let t = prev.time_index + 1;
    let n = prev.len();
    let d = prev.dim;
    let ancestors = resample_indices(mixture_weights, n, Resampler::Stratified, rng);
    let mut states = vec![0.0; n * d];
    for (x, &k) in states.chunks_exact_mut(d).zip(&ancestors) {
        proposal.sample(model, y, prev.state(k), t, rng, x);
    }

    let ratio = MixtureRatio {
        model,
        proposal,
        prev,
        y,
        t,
        backend: config.kernel_backend,
        epsilon: config.epsilon,
    };
    let log_ratio = ratio.log_ratio(&prev.norm_weights, mixture_weights, &states)?;
    let log_weights = states
        .chunks_exact(d)
        .zip(log_ratio)
        .map(|(x, r)| model.observation_logdensity(y, x, t) + r)
        .collect();
    ParticleSet::new(d, states, log_weights, t, ancestors)
}

/// Importance sampling from `p(x_1)` with likelihood weights, shared by
/// all four filters.
pub fn initialize(
    y: &[f64],
    model: &dyn StateSpaceModel,
    n: usize,
    rng: &mut dyn RngCore,
) -> Result<ParticleSet> {
    let d = model.state_dim();
    let mut states = vec![0.0; n * d];
    let mut log_weights = Vec::with_capacity(n);
    for x in states.chunks_exact_mut(d) {
        model.sample_initial(rng, x);
        log_weights.push(model.observation_logdensity(y, x, 1));
    }
    ParticleSet::new(d, states, log_weights, 1, (0..n).collect())
}
