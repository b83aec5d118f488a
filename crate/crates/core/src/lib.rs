//! Sequential Monte Carlo filtering over generic state-space models.
//!
//! Four filters are provided: SIR, auxiliary SIR, the marginal particle
//! filter (MPF) and the auxiliary marginal particle filter (AMPF). The
//! marginal filters weight each particle against the whole predictive
//! mixture, which costs O(N²) when done directly; [`kernelsum`] brings that
//! down with a dual-tree and a fast Gauss transform backend.
//!
//! ```
//! use mpf_core::prelude::*;
//!
//! let model = UngmModel::default();
//! let series = generate_synthetic(&model, 20, 7).unwrap();
//! let proposal = TransitionPrior;
//! let config = FilterConfig { n_particles: 100, algorithm: Algorithm::Mpf, ..Default::default() };
//! let trace = run_filter(&series, &model, &proposal, &config).unwrap();
//! assert_eq!(trace.steps.len(), 20);
//! ```

pub mod diagnostics;
mod error;
pub mod filter;
pub mod kernelsum;
pub mod model;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::diagnostics::{
        ess, rmse, summarize, unique_count, weight_variance, RunSummary, StepDiagnostics,
    };
    pub use crate::error::{Error, Result};
    pub use crate::filter::{
        ampf_step, asir_step, compute_simulation_weights, mpf_step, resample, run_filter,
        sir_step, Algorithm, FilterConfig, FilterTrace, HeavyTailedPrior, ParticleSet, Proposal,
        Resampler, SimulationWeights, TransitionPrior,
    };
    pub use crate::kernelsum::{
        kernel_sum, Backend, KernelFamily, KernelSpec, KernelSumRequest, SumStats,
    };
    pub use crate::model::{
        generate_synthetic, load_series, sv_returns_transform, ObservationSeries,
        StateSpaceModel, StochVolModel, UngmModel,
    };
}
