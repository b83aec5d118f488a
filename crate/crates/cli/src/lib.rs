//! Config-driven experiment runner and benchmark harness for `mpf_core`.
//!
//! `run` filters one observation series with every configured algorithm
//! over several seeds and writes per-run traces plus a summary table;
//! `bench` times the marginal filter across kernel-sum backends.

pub mod bench;
pub mod config;
pub mod experiment;

pub use bench::{bench_rows, run_bench, BenchRow};
pub use config::{ExperimentConfig, Mode, Overrides};
pub use experiment::{load_data, run_experiment, AlgorithmSummary, ExperimentReport, RunRecord};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("all {0} runs failed")]
    AllRunsFailed(usize),
    #[error("data error: {0}")]
    Data(#[from] mpf_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 1 for configuration and input problems, 2 when every run failed.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::AllRunsFailed(_) => 2,
            _ => 1,
        }
    }
}
