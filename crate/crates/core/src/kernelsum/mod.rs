//! Weighted kernel summation `q_i = Σ_j ω_j K(x_j, y_i)`.
//!
//! Three backends share one error contract: for every target,
//! `|q̂_i − q_i| ≤ ε · Σ_j ω_j`.
//!
//! * [`naive_sum`]: direct O(MN) evaluation with compensated accumulation.
//! * [`dualtree_sum`]: kd-trees over sources and targets, pruning node pairs
//!   whose kernel bounds are tight enough. Any radial, non-increasing kernel.
//! * [`fgt_sum`]: fast Gauss transform with truncated Hermite expansions about
//!   box centres. Gaussian kernel only, `d ≤ 3`.
//!
//! The gaussian kernel here is the *unnormalized* `exp(−Σ_d (x_d−y_d)²/(2h_d²))`;
//! density normalization is the caller's business.

mod dualtree;
mod fgt;
mod naive;
mod tree;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

pub use dualtree::{dualtree_sum, dualtree_sum_with_stats, DEFAULT_LEAF_SIZE};
pub use fgt::{fgt_order_for, fgt_sum, fgt_sum_with_stats, FgtParams, FGT_MAX_DIM};
pub use naive::naive_sum;
pub use tree::{build_tree, SpatialTree, TreeNode};

use crate::{Error, Result};

/// Radial profile `K(δ)` of a user kernel, `δ` being the bandwidth-scaled
/// Euclidean distance.
pub type RadialProfile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum KernelFamily {
    /// `K(δ) = exp(−δ²/2)`.
    Gaussian,
    /// Caller-supplied profile; must be non-increasing for the dual-tree.
    Monotone(RadialProfile),
}

impl fmt::Debug for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelFamily::Gaussian => f.write_str("Gaussian"),
            KernelFamily::Monotone(_) => f.write_str("Monotone(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct KernelSpec {
    pub family: KernelFamily,
    /// Per-dimension scale `h_d`.
    pub bandwidth: Vec<f64>,
}

impl KernelSpec {
    pub fn gaussian(bandwidth: Vec<f64>) -> Self {
        Self { family: KernelFamily::Gaussian, bandwidth }
    }

    pub fn monotone(bandwidth: Vec<f64>, profile: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { family: KernelFamily::Monotone(Arc::new(profile)), bandwidth }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.family, KernelFamily::Gaussian)
    }

    /// Kernel value at squared scaled distance `d2`.
    #[inline]
    pub(crate) fn eval_sq(&self, d2: f64) -> f64 {
        match &self.family {
            KernelFamily::Gaussian => (-0.5 * d2).exp(),
            KernelFamily::Monotone(k) => k(d2.sqrt()),
        }
    }

    /// Samples the profile on a grid and rejects it if it ever increases or
    /// produces a non-finite value.
    pub(crate) fn check_monotone(&self) -> Result<()> {
        let KernelFamily::Monotone(k) = &self.family else {
            return Ok(());
        };
        let mut prev = f64::INFINITY;
        for i in 0..=4096 {
            let d = 64.0 * (i as f64 / 4096.0).powi(2);
            let v = k(d);
            if !v.is_finite() || v > prev {
                return Err(Error::UnsupportedKernel);
            }
            prev = v;
        }
        Ok(())
    }
}

/// One N-body problem instance. Points are stored row-major,
/// `dim` coordinates per point.
#[derive(Debug, Clone)]
pub struct KernelSumRequest<'a> {
    pub dim: usize,
    pub sources: &'a [f64],
    pub source_weights: &'a [f64],
    pub targets: &'a [f64],
    pub kernel: &'a KernelSpec,
    /// Absolute per-target tolerance, in units of `Σ_j ω_j`.
    pub epsilon: f64,
}

impl KernelSumRequest<'_> {
    pub fn n_sources(&self) -> usize {
        self.source_weights.len()
    }

    pub fn n_targets(&self) -> usize {
        self.targets.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn weight_sum(&self) -> f64 {
        self.source_weights.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidRequest(m));
        if self.dim == 0 {
            return bad("dimension must be positive".into());
        }
        let m = self.source_weights.len();
        if m == 0 || self.targets.is_empty() {
            return bad("need at least one source and one target".into());
        }
        if self.sources.len() != m * self.dim {
            return bad(format!("{} source coordinates for {m} weights in {}-D", self.sources.len(), self.dim));
        }
        if !self.targets.len().is_multiple_of(self.dim) {
            return bad("target coordinates not a multiple of dimension".into());
        }
        if self.kernel.bandwidth.len() != self.dim
            || self.kernel.bandwidth.iter().any(|h| !(h.is_finite() && *h > 0.0))
        {
            return bad("bandwidth must have one positive finite entry per dimension".into());
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive and finite, got {}", self.epsilon));
        }
        if self.source_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return bad("source weights must be finite and non-negative".into());
        }
        if self.sources.iter().chain(self.targets).any(|v| !v.is_finite()) {
            return bad("coordinates must be finite".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Backend {
    #[default]
    Naive,
    DualTree,
    Fgt,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Naive => "naive",
            Backend::DualTree => "dualtree",
            Backend::Fgt => "fgt",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "naive" => Ok(Backend::Naive),
            "dualtree" | "dual-tree" | "dual_tree" => Ok(Backend::DualTree),
            "fgt" => Ok(Backend::Fgt),
            other => Err(Error::param("backend", format!("unknown backend `{other}`"))),
        }
    }
}

/// Work counters exposed for tests and benchmarks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SumStats {
    /// Node pairs visited by the dual-tree recursion.
    pub node_pairs: u64,
    /// Node pairs resolved by the midpoint approximation.
    pub pruned_pairs: u64,
    /// Exact kernel evaluations (base cases, naive, FGT direct boxes).
    pub kernel_evals: u64,
    /// Hermite terms evaluated by the FGT.
    pub expansion_terms: u64,
    /// Expansion order used by the FGT.
    pub order: usize,
}

/// Dispatches to the requested backend with its default parameters.
pub fn kernel_sum(req: &KernelSumRequest<'_>, backend: Backend) -> Result<Vec<f64>> {
    kernel_sum_with_stats(req, backend).map(|(q, _)| q)
}

pub fn kernel_sum_with_stats(req: &KernelSumRequest<'_>, backend: Backend) -> Result<(Vec<f64>, SumStats)> {
    match backend {
        Backend::Naive => {
            let q = naive_sum(req)?;
            let evals = (req.n_sources() * req.n_targets()) as u64;
            Ok((q, SumStats { kernel_evals: evals, ..Default::default() }))
        }
        Backend::DualTree => dualtree_sum_with_stats(req, DEFAULT_LEAF_SIZE),
        Backend::Fgt => fgt_sum_with_stats(req, &FgtParams::default()),
    }
}

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}
