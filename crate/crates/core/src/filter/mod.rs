//! SIR, ASIR, MPF and AMPF over a [`StateSpaceModel`] and a [`Proposal`].
//!
//! Weights are carried in log domain and normalized by max-shifted
//! log-sum-exp. Every filter is initialized the same way at `t = 1`: draws
//! from `p(x_1)` weighted by `p(y_1 | x_1)`.

mod mixture;
mod particles;
mod proposal;
mod resample;
mod steps;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use particles::{log_sum_exp, normalize_log_weights, ParticleSet};
pub use proposal::{HeavyTailedPrior, Proposal, TransitionPrior};
pub use resample::{resample, resample_indices, Resampler};
pub use steps::{ampf_step, asir_step, compute_simulation_weights, initialize, mpf_step, sir_step, SimulationWeights};

use crate::diagnostics::StepDiagnostics;
use crate::kernelsum::Backend;
use crate::model::{ObservationSeries, StateSpaceModel};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub enum Algorithm {
    Sir,
    Asir,
    #[default]
    Mpf,
    Ampf,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Sir, Algorithm::Asir, Algorithm::Mpf, Algorithm::Ampf];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Sir => "sir",
            Algorithm::Asir => "asir",
            Algorithm::Mpf => "mpf",
            Algorithm::Ampf => "ampf",
        }
    }

    pub fn is_marginal(self) -> bool {
        matches!(self, Algorithm::Mpf | Algorithm::Ampf)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::param("algorithm", format!("unknown algorithm `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    pub n_particles: usize,
    pub algorithm: Algorithm,
    pub resampler: Resampler,
    /// Resample when ESS/N falls below this; `1.0` resamples every step.
    pub resample_threshold: f64,
    pub kernel_backend: Backend,
    /// Kernel-sum tolerance for the fast backends.
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            n_particles: 500,
            algorithm: Algorithm::Mpf,
            resampler: Resampler::Stratified,
            resample_threshold: 1.0,
            kernel_backend: Backend::Naive,
            epsilon: 1e-3,
            seed: 0,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(Error::param("n_particles", "must be at least 1"));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::param("epsilon", format!("must be positive, got {}", self.epsilon)));
        }
        if !(0.0..=1.0).contains(&self.resample_threshold) {
            return Err(Error::param("resample_threshold", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Runs one filter step of the configured algorithm.
pub fn step(
    prev: &ParticleSet,
    y: &[f64],
    model: &dyn StateSpaceModel,
    proposal: &dyn Proposal,
    config: &FilterConfig,
    rng: &mut dyn rand::RngCore,
) -> Result<ParticleSet> {
    match config.algorithm {
        Algorithm::Sir => sir_step(prev, y, model, proposal, config, rng),
        Algorithm::Asir => asir_step(prev, y, model, proposal, config, rng),
        Algorithm::Mpf => mpf_step(prev, y, model, proposal, config, rng),
        Algorithm::Ampf => ampf_step(prev, y, model, proposal, config, rng),
    }
}

/// Per-timestep record of one filter run.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterTrace {
    pub algorithm: Algorithm,
    pub n_particles: usize,
    pub steps: Vec<StepDiagnostics>,
    pub total_seconds: f64,
}

impl FilterTrace {
    pub fn estimates(&self) -> Vec<Vec<f64>> {
        self.steps.iter().map(|s| s.estimate.clone()).collect()
    }
}

/// Filters `series` from `t = 1` to `T`. Deterministic given `config.seed`
/// apart from the timing fields.
pub fn run_filter(
    series: &ObservationSeries,
    model: &dyn StateSpaceModel,
    proposal: &dyn Proposal,
    config: &FilterConfig,
) -> Result<FilterTrace> {
    run_filter_with(series, model, proposal, config, |_| {})
}

/// As [`run_filter`], calling `inspect` with every particle set produced.
pub fn run_filter_with(
    series: &ObservationSeries,
    model: &dyn StateSpaceModel,
    proposal: &dyn Proposal,
    config: &FilterConfig,
    mut inspect: impl FnMut(&ParticleSet),
) -> Result<FilterTrace> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let started = Instant::now();
    let mut steps = Vec::with_capacity(series.t_max());

    let mut current: Option<ParticleSet> = None;
    for (idx, y) in series.observations.iter().enumerate() {
        let t = idx + 1;
        let clock = Instant::now();
        let next = match &current {
            None => initialize(y, model, config.n_particles, &mut rng),
            Some(prev) => step(prev, y, model, proposal, config, &mut rng),
        }
        .map_err(|e| annotate(e, t))?;
        let elapsed = clock.elapsed().as_secs_f64();
        steps.push(StepDiagnostics::from_particles(&next, elapsed));
        inspect(&next);
        current = Some(next);
    }
    Ok(FilterTrace {
        algorithm: config.algorithm,
        n_particles: config.n_particles,
        steps,
        total_seconds: started.elapsed().as_secs_f64(),
    })
}

fn annotate(e: Error, t: usize) -> Error {
    match e {
        Error::DegenerateWeights { .. } | Error::DegenerateSimulationWeights { .. } | Error::AtStep { .. } => e,
        other => Error::AtStep { t, source: Box::new(other) },
    }
}
