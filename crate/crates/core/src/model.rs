//! State-space models, synthetic data and observation ingestion.

use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Log density of `N(mean, std²)` at `x`.
///
/// A zero standard deviation is treated as a point mass: `0` at the mean and
/// `-inf` elsewhere, which keeps noise-free models usable for tests.
pub fn gaussian_logpdf(x: f64, mean: f64, std: f64) -> f64 {
    if std == 0.0 {
        return if x == mean { 0.0 } else { f64::NEG_INFINITY };
    }
    let z = (x - mean) / std;
    -HALF_LN_2PI - std.ln() - 0.5 * z * z
}

pub(crate) fn normal(rng: &mut dyn RngCore) -> f64 {
    StandardNormal.sample(rng)
}

/// A Markov state-space model `p(x_1)`, `p(x_t | x_{t-1})`, `p(y_t | x_t)`.
///
/// Time indices are 1-based; `t` passed to the transition functions is the
/// index of the state being produced. Samplers draw from the caller's RNG so
/// a model can be shared freely across threads.
pub trait StateSpaceModel: Send + Sync {
    fn state_dim(&self) -> usize;

    fn obs_dim(&self) -> usize {
        1
    }

    fn sample_initial(&self, rng: &mut dyn RngCore, out: &mut [f64]);

    fn sample_transition(&self, prev: &[f64], t: usize, rng: &mut dyn RngCore, out: &mut [f64]);

    fn transition_logdensity(&self, x: &[f64], prev: &[f64], t: usize) -> f64;

    fn sample_observation(&self, x: &[f64], t: usize, rng: &mut dyn RngCore, out: &mut [f64]);

    fn observation_logdensity(&self, y: &[f64], x: &[f64], t: usize) -> f64;

    /// Deterministic likely value of `p(x_t | x_{t-1} = prev)`.
    fn transition_representative(&self, prev: &[f64], t: usize, out: &mut [f64]);

    /// Per-dimension standard deviation when the transition is a diagonal
    /// Gaussian centred on [`transition_representative`]. Models that
    /// return `Some` can have their mixture sums evaluated by the fast
    /// kernel-summation backends.
    ///
    /// [`transition_representative`]: StateSpaceModel::transition_representative
    fn transition_noise_std(&self, _t: usize) -> Option<Vec<f64>> {
        None
    }

    /// Exact `log p(y_t | x_{t-1} = prev)`, when the model can provide it.
    /// Auxiliary filters use it in place of the representative-point
    /// approximation `p(y_t | μ_t)`.
    fn predictive_loglikelihood(&self, _y: &[f64], _prev: &[f64], _t: usize) -> Option<f64> {
        None
    }
}

/// Univariate nonlinear growth model.
///
/// `x_t = x_{t-1}/2 + 25 x_{t-1}/(1 + x_{t-1}²) + cos(1.2 t) + N(0, σ_x²)`,
/// `y_t = x_t²/20 + N(0, σ_y²)`, `x_1 ~ N(initial_mean, initial_std²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct UngmModel {
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub initial_mean: f64,
    pub initial_std: f64,
}

impl Default for UngmModel {
    fn default() -> Self {
        let sigma_x = 10f64.sqrt();
        Self { sigma_x, sigma_y: 1.0, initial_mean: 0.0, initial_std: sigma_x }
    }
}

impl UngmModel {
    /// Zero noise levels are accepted and give point-mass densities.
    pub fn new(sigma_x: f64, sigma_y: f64) -> Result<Self> {
        check_nonneg("sigma_x", sigma_x)?;
        check_nonneg("sigma_y", sigma_y)?;
        Ok(Self { sigma_x, sigma_y, initial_mean: 0.0, initial_std: sigma_x })
    }

    pub fn with_initial(mut self, mean: f64, std: f64) -> Result<Self> {
        check_nonneg("initial_std", std)?;
        if !mean.is_finite() {
            return Err(Error::param("initial_mean", "must be finite"));
        }
        self.initial_mean = mean;
        self.initial_std = std;
        Ok(self)
    }

    pub fn transition_mean(x: f64, t: usize) -> f64 {
        x / 2.0 + 25.0 * x / (1.0 + x * x) + (1.2 * t as f64).cos()
    }

    pub fn observation_mean(x: f64) -> f64 {
        x * x / 20.0
    }
}

impl StateSpaceModel for UngmModel {
    fn state_dim(&self) -> usize {
        1
    }

    fn sample_initial(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        out[0] = self.initial_mean + self.initial_std * normal(rng);
    }

    fn sample_transition(&self, prev: &[f64], t: usize, rng: &mut dyn RngCore, out: &mut [f64]) {
        out[0] = Self::transition_mean(prev[0], t) + self.sigma_x * normal(rng);
    }

    fn transition_logdensity(&self, x: &[f64], prev: &[f64], t: usize) -> f64 {
        gaussian_logpdf(x[0], Self::transition_mean(prev[0], t), self.sigma_x)
    }

    fn sample_observation(&self, x: &[f64], _t: usize, rng: &mut dyn RngCore, out: &mut [f64]) {
        out[0] = Self::observation_mean(x[0]) + self.sigma_y * normal(rng);
    }

    fn observation_logdensity(&self, y: &[f64], x: &[f64], _t: usize) -> f64 {
        gaussian_logpdf(y[0], Self::observation_mean(x[0]), self.sigma_y)
    }

    fn transition_representative(&self, prev: &[f64], t: usize, out: &mut [f64]) {
        out[0] = Self::transition_mean(prev[0], t);
    }

    fn transition_noise_std(&self, _t: usize) -> Option<Vec<f64>> {
        (self.sigma_x > 0.0).then(|| vec![self.sigma_x])
    }
}

/// Stochastic volatility model.
///
/// `x_t = φ x_{t-1} + η_t`, `η_t ~ N(0, σ_η²)`, `y_t = ε_t β exp(x_t / 2)`,
/// `ε_t ~ N(0, 1)`, with the stationary initial law `N(0, σ_η²/(1 − φ²))`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochVolModel {
    pub phi: f64,
    pub sigma_eta: f64,
    pub beta: f64,
}

impl Default for StochVolModel {
    fn default() -> Self {
        Self { phi: 0.9731, sigma_eta: 0.1726, beta: 0.6338 }
    }
}

impl StochVolModel {
    pub fn new(phi: f64, sigma_eta: f64, beta: f64) -> Result<Self> {
        if !(phi.abs() < 1.0) {
            return Err(Error::param("phi", format!("|phi| must be < 1, got {phi}")));
        }
        check_pos("sigma_eta", sigma_eta)?;
        check_pos("beta", beta)?;
        Ok(Self { phi, sigma_eta, beta })
    }

    pub fn stationary_std(&self) -> f64 {
        self.sigma_eta / (1.0 - self.phi * self.phi).sqrt()
    }
}

impl StateSpaceModel for StochVolModel {
    fn state_dim(&self) -> usize {
        1
    }

    fn sample_initial(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        out[0] = self.stationary_std() * normal(rng);
    }

    fn sample_transition(&self, prev: &[f64], _t: usize, rng: &mut dyn RngCore, out: &mut [f64]) {
        out[0] = self.phi * prev[0] + self.sigma_eta * normal(rng);
    }

    fn transition_logdensity(&self, x: &[f64], prev: &[f64], _t: usize) -> f64 {
        gaussian_logpdf(x[0], self.phi * prev[0], self.sigma_eta)
    }

    fn sample_observation(&self, x: &[f64], _t: usize, rng: &mut dyn RngCore, out: &mut [f64]) {
        out[0] = normal(rng) * self.beta * (x[0] / 2.0).exp();
    }

    fn observation_logdensity(&self, y: &[f64], x: &[f64], _t: usize) -> f64 {
        gaussian_logpdf(y[0], 0.0, self.beta * (x[0] / 2.0).exp())
    }

    fn transition_representative(&self, prev: &[f64], _t: usize, out: &mut [f64]) {
        out[0] = self.phi * prev[0];
    }

    fn transition_noise_std(&self, _t: usize) -> Option<Vec<f64>> {
        Some(vec![self.sigma_eta])
    }
}

/// Observations `y_{1:T}` with optional ground-truth states `x_{1:T}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSeries {
    pub observations: Vec<Vec<f64>>,
    pub ground_truth: Option<Vec<Vec<f64>>>,
}

impl ObservationSeries {
    pub fn new(observations: Vec<Vec<f64>>, ground_truth: Option<Vec<Vec<f64>>>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::Empty("observation series".into()));
        }
        if let Some(truth) = &ground_truth {
            if truth.len() != observations.len() {
                return Err(Error::LengthMismatch(format!(
                    "{} observations but {} ground-truth states",
                    observations.len(),
                    truth.len()
                )));
            }
        }
        Ok(Self { observations, ground_truth })
    }

    pub fn t_max(&self) -> usize {
        self.observations.len()
    }

    /// Stable 64-bit FNV-1a digest of the observation values, used to check
    /// that paired runs consumed the same data.
    pub fn content_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |bytes: &[u8]| {
            for b in bytes {
                h ^= u64::from(*b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        for y in &self.observations {
            feed(&(y.len() as u64).to_le_bytes());
            for v in y {
                feed(&v.to_bits().to_le_bytes());
            }
        }
        h
    }
}

/// Simulates `t_max` steps of `model`. Deterministic given `seed`.
pub fn generate_synthetic(
    model: &dyn StateSpaceModel,
    t_max: usize,
    seed: u64,
) -> Result<ObservationSeries> {
    if t_max == 0 {
        return Err(Error::param("t_max", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (dx, dy) = (model.state_dim(), model.obs_dim());
    let mut states: Vec<Vec<f64>> = Vec::with_capacity(t_max);
    let mut observations = Vec::with_capacity(t_max);
    for t in 1..=t_max {
        let mut x = vec![0.0; dx];
        match states.last() {
            None => model.sample_initial(&mut rng, &mut x),
            Some(prev) => model.sample_transition(prev, t, &mut rng, &mut x),
        }
        let mut y = vec![0.0; dy];
        model.sample_observation(&x, t, &mut rng, &mut y);
        states.push(x);
        observations.push(y);
    }
    ObservationSeries::new(observations, Some(states))
}

/// Reads a CSV file with one timestep per row and one column per
/// observation dimension. A non-numeric first row is taken as a header.
/// Row numbers in errors are 1-based file lines.
pub fn load_series(path: impl AsRef<Path>) -> Result<ObservationSeries> {
    let text = std::fs::read_to_string(path)?;
    let observations = parse_rows(&text)?;
    ObservationSeries::new(observations, None)
}

/// Reads a single-column CSV series as plain values (e.g. raw prices).
pub fn load_column(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let rows = parse_rows(&text)?;
    Ok(rows.into_iter().map(|r| r[0]).collect())
}

fn parse_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            row: e.position().map_or(idx + 1, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let row = record.position().map_or(idx + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if rows.is_empty() && width.is_none() && idx == 0 => {
                width = Some(record.len());
                continue;
            }
            Err(e) => {
                let field = record.iter().find(|f| f.parse::<f64>().is_err()).unwrap_or("");
                return Err(Error::Parse { row, msg: format!("`{field}`: {e}") });
            }
        };
        match width {
            Some(w) if w != values.len() => {
                return Err(Error::Parse {
                    row,
                    msg: format!("expected {w} fields, found {}", values.len()),
                })
            }
            _ => width = Some(values.len()),
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::Empty("no observation rows".into()));
    }
    Ok(rows)
}

/// Mean-corrected percentage log returns `100 (ln p_t − ln p_{t−1})`.
pub fn sv_returns_transform(prices: &[f64]) -> Result<Vec<f64>> {
    if prices.len() < 2 {
        return Err(Error::param("prices", "need at least two prices"));
    }
    if let Some((index, &value)) = prices.iter().enumerate().find(|(_, p)| !(**p > 0.0)) {
        return Err(Error::NonPositivePrice { index, value });
    }
    let raw: Vec<f64> = prices.windows(2).map(|w| 100.0 * (w[1].ln() - w[0].ln())).collect();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    Ok(raw.into_iter().map(|r| r - mean).collect())
}

fn check_nonneg(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite and >= 0, got {v}")))
    }
}

fn check_pos(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite and > 0, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn zero_noise_zero_state() {
        let m = UngmModel::new(0.0, 0.0).unwrap().with_initial(0.0, 0.0).unwrap();
        let s = generate_synthetic(&m, 1, 3).unwrap();
        assert_eq!(s.ground_truth.unwrap()[0][0], 0.0);
        assert_eq!(s.observations[0][0], 0.0);
    }

    #[test]
    fn zero_noise_two_steps_matches_hand_recursion() {
        let m = UngmModel::new(0.0, 0.0).unwrap().with_initial(1.0, 0.0).unwrap();
        let s = generate_synthetic(&m, 2, 11).unwrap();
        // 1/2 + 25·1/(1+1) + cos(1.2·2)
        let x2 = 0.5 + 12.5 + 2.4f64.cos();
        let truth = s.ground_truth.unwrap();
        assert_eq!(truth[0][0], 1.0);
        assert_relative_eq!(truth[1][0], x2, max_relative = 1e-15);
        assert_relative_eq!(s.observations[1][0], x2 * x2 / 20.0, max_relative = 1e-15);
    }

    #[test]
    fn same_seed_same_series() {
        let m = StochVolModel::default();
        let a = generate_synthetic(&m, 50, 99).unwrap();
        let b = generate_synthetic(&m, 50, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.content_hash(), b.content_hash());
        let c = generate_synthetic(&m, 50, 100).unwrap();
        assert_ne!(a.content_hash(), c.content_hash());
    }

    #[test]
    fn t_max_zero_rejected() {
        assert!(generate_synthetic(&UngmModel::default(), 0, 1).is_err());
    }

    #[test]
    fn returns_transform_examples() {
        assert_eq!(sv_returns_transform(&[1.0, 1.0, 1.0]).unwrap(), vec![0.0, 0.0]);
        let single = sv_returns_transform(&[1.0, 0.01f64.exp()]).unwrap();
        assert_eq!(single.len(), 1);
        assert!(single[0].abs() < 1e-12);
        let r = sv_returns_transform(&[1.0, 0.01f64.exp(), 0.03f64.exp()]).unwrap();
        assert_relative_eq!(r[0], -0.5, epsilon = 1e-12);
        assert_relative_eq!(r[1], 0.5, epsilon = 1e-12);
        assert!(matches!(
            sv_returns_transform(&[1.0, 0.0, 2.0]),
            Err(Error::NonPositivePrice { index: 1, .. })
        ));
        assert!(sv_returns_transform(&[1.0]).is_err());
    }

    #[test]
    fn sv_observation_density_is_scaled_normal() {
        let m = StochVolModel::default();
        let (y, x) = (0.3, -0.4);
        let sd = m.beta * (x / 2.0f64).exp();
        let direct = -(y * y) / (2.0 * sd * sd) - (2.0 * PI * sd * sd).sqrt().ln();
        assert_relative_eq!(m.observation_logdensity(&[y], &[x], 5), direct, epsilon = 1e-13);
    }

    #[test]
    fn representative_is_deterministic() {
        let m = UngmModel::default();
        let (mut a, mut b) = ([0.0], [0.0]);
        m.transition_representative(&[2.5], 7, &mut a);
        m.transition_representative(&[2.5], 7, &mut b);
        assert_eq!(a, b);
        assert_eq!(a[0], UngmModel::transition_mean(2.5, 7));
    }

    #[test]
    fn invalid_parameters() {
        assert!(StochVolModel::new(1.0, 0.1, 1.0).is_err());
        assert!(StochVolModel::new(0.5, 0.0, 1.0).is_err());
        assert!(UngmModel::new(-1.0, 1.0).is_err());
    }
}
