//! Per-step and per-run evaluation metrics.

use crate::filter::{FilterTrace, ParticleSet};
use crate::model::ObservationSeries;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub t: usize,
    /// Population variance of `N · w_i`.
    pub weight_variance: f64,
    /// Distinct ancestors (SIR) or mixture components (marginal filters).
    pub unique_particles: usize,
    pub ess: f64,
    /// Posterior mean `Σ_i w_i x_i`.
    pub estimate: Vec<f64>,
    pub step_seconds: f64,
}

impl StepDiagnostics {
    pub fn from_particles(p: &ParticleSet, step_seconds: f64) -> Self {
        Self {
            t: p.time_index,
            weight_variance: weight_variance(&p.norm_weights),
            unique_particles: unique_count(&p.ancestors),
            ess: ess(&p.norm_weights),
            estimate: p.mean(),
            step_seconds,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    /// `None` without ground truth.
    pub rmse: Option<f64>,
    pub mean_weight_variance: f64,
    pub var_weight_variance: f64,
    pub total_seconds: f64,
}

/// Variance of `{N w_i}` with divisor `N`. Zero iff the weights are uniform.
pub fn weight_variance(weights: &[f64]) -> f64 {
    let n = weights.len() as f64;
    weights.iter().map(|w| (n * w - 1.0).powi(2)).sum::<f64>() / n
}

/// `1 / Σ w_i²`.
pub fn ess(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

pub fn unique_count(ancestry: &[usize]) -> usize {
    let mut v = ancestry.to_vec();
    v.sort_unstable();
    v.dedup();
    v.len()
}

/// Root mean squared Euclidean error over time.
pub fn rmse(estimates: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<f64> {
    if estimates.len() != truth.len() {
        return Err(Error::LengthMismatch(format!(
            "{} estimates vs {} true states",
            estimates.len(),
            truth.len()
        )));
    }
    if estimates.is_empty() {
        return Err(Error::Empty("no estimates".into()));
    }
    let sq: f64 = estimates
        .iter()
        .zip(truth)
        .map(|(e, x)| e.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
        .sum();
    Ok((sq / estimates.len() as f64).sqrt())
}

/// RMSE against the series' ground truth.
pub fn trace_rmse(trace: &FilterTrace, series: &ObservationSeries) -> Result<f64> {
    let truth = series.ground_truth.as_ref().ok_or(Error::MissingGroundTruth)?;
    rmse(&trace.estimates(), truth)
}

pub fn summarize(trace: &FilterTrace, series: &ObservationSeries) -> RunSummary {
    let wv: Vec<f64> = trace.steps.iter().map(|s| s.weight_variance).collect();
    RunSummary {
        rmse: trace_rmse(trace, series).ok(),
        mean_weight_variance: stats::mean(&wv),
        var_weight_variance: stats::variance(&wv),
        total_seconds: trace.total_seconds,
    }
}

/// Small statistics toolkit for comparing runs across seeds.
pub mod stats {
    use statrs::distribution::{ContinuousCDF, StudentsT};

    pub fn mean(v: &[f64]) -> f64 {
        if v.is_empty() {
            return f64::NAN;
        }
        v.iter().sum::<f64>() / v.len() as f64
    }

    /// Unbiased sample variance (divisor `n − 1`); zero for fewer than two values.
    pub fn variance(v: &[f64]) -> f64 {
        if v.len() < 2 {
            return 0.0;
        }
        let m = mean(v);
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    }

    pub fn std_dev(v: &[f64]) -> f64 {
        variance(v).sqrt()
    }

    pub fn std_error(v: &[f64]) -> f64 {
        (variance(v) / v.len() as f64).sqrt()
    }

    pub fn median(v: &[f64]) -> f64 {
        if v.is_empty() {
            return f64::NAN;
        }
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        let m = s.len() / 2;
        if s.len() % 2 == 1 {
            s[m]
        } else {
            0.5 * (s[m - 1] + s[m])
        }
    }

    /// One-sided paired t-test of `H1: mean(a − b) < 0`. Returns the p-value.
    pub fn paired_t_less(a: &[f64], b: &[f64]) -> f64 {
        assert_eq!(a.len(), b.len());
        let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let n = diff.len();
        if n < 2 {
            return f64::NAN;
        }
        let se = std_error(&diff);
        let m = mean(&diff);
        if se == 0.0 {
            return if m < 0.0 { 0.0 } else { 1.0 };
        }
        let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("valid degrees of freedom");
        dist.cdf(m / se)
    }

    /// Two-sample Kolmogorov–Smirnov test. Returns `(D, p)` with the
    /// asymptotic p-value using the small-sample correction
    /// `λ = (√n_e + 0.12 + 0.11/√n_e) D`.
    pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
        let mut a = a.to_vec();
        let mut b = b.to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (na, nb) = (a.len() as f64, b.len() as f64);
        let (mut i, mut j) = (0, 0);
        let mut d: f64 = 0.0;
        while i < a.len() && j < b.len() {
            let v = a[i].min(b[j]);
            while i < a.len() && a[i] <= v {
                i += 1;
            }
            while j < b.len() && b[j] <= v {
                j += 1;
            }
            d = d.max((i as f64 / na - j as f64 / nb).abs());
        }
        let ne = na * nb / (na + nb);
        let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
        (d, kolmogorov_q(lambda))
    }

    /// `Q_KS(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}`.
    pub fn kolmogorov_q(lambda: f64) -> f64 {
        if lambda < 1e-3 {
            return 1.0;
        }
        let mut sum = 0.0;
        let mut sign = 1.0;
        for k in 1..=200 {
            let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
            sum += sign * term;
            if term < 1e-16 {
                break;
            }
            sign = -sign;
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}
