use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};

use super::ParticleSet;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Resampler {
    Multinomial,
    /// One independent uniform in each stratum `[i/N, (i+1)/N)`.
    #[default]
    Stratified,
}

impl Resampler {
    pub fn name(self) -> &'static str {
        match self {
            Resampler::Multinomial => "multinomial",
            Resampler::Stratified => "stratified",
        }
    }
}

impl fmt::Display for Resampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Resampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "multinomial" => Ok(Resampler::Multinomial),
            "stratified" => Ok(Resampler::Stratified),
            other => Err(Error::param("resampler", format!("unknown scheme `{other}`"))),
        }
    }
}

/// Draws `n` indices from the discrete distribution `weights` (normalized).
/// Stratified output is sorted; multinomial output is sorted as well since
/// it is produced by walking the CDF with sorted uniforms.
pub fn resample_indices(weights: &[f64], n: usize, scheme: Resampler, rng: &mut dyn RngCore) -> Vec<usize> {
    let mut u: Vec<f64> = match scheme {
        Resampler::Stratified => (0..n).map(|i| (i as f64 + rng.random::<f64>()) / n as f64).collect(),
        Resampler::Multinomial => {
            let mut u: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            u.sort_by(f64::total_cmp);
            u
        }
    };
    let total: f64 = weights.iter().sum();
    for v in &mut u {
        *v *= total;
    }

    let last = weights.len() - 1;
    let mut out = Vec::with_capacity(n);
    let mut j = 0;
    let mut cum = weights[0];
    for target in u {
        while target >= cum && j < last {
            j += 1;
            cum += weights[j];
        }
        // Rounding can leave the tail of the CDF just under `total`.
        while weights[j] == 0.0 && j > 0 {
            j -= 1;
        }
        out.push(j);
    }
    out
}

/// Selection step: returns an equally weighted set of the same size.
pub fn resample(particles: &ParticleSet, scheme: Resampler, rng: &mut dyn RngCore) -> Result<ParticleSet> {
    let n = particles.len();
    let idx = resample_indices(&particles.norm_weights, n, scheme, rng);
    let mut states = Vec::with_capacity(particles.states.len());
    for &i in &idx {
        states.extend_from_slice(particles.state(i));
    }
    ParticleSet::new(particles.dim, states, vec![0.0; n], particles.time_index, idx)
}
