//! MPF timing across particle counts, tolerances and kernel-sum backends.
//!
//! Runs are sequential so that per-step timings are not disturbed by other
//! workers. The reported time is the median per-step wall clock over all
//! seeds, leaving out initialization (`t = 1`) and the first MPF step,
//! which serves as warm-up.

use std::collections::HashMap;
use std::fs;

use serde::{Deserialize, Serialize};

use mpf_core::diagnostics::{stats, trace_rmse};
use mpf_core::filter::{run_filter, Algorithm, FilterConfig};
use mpf_core::kernelsum::Backend;

use crate::config::ExperimentConfig;
use crate::experiment::{csv_err, load_data};
use crate::CliError;

pub const BENCH_HEADER: [&str; 6] = ["epsilon", "n", "method", "time_s", "speedup", "rmse"];

/// Steps excluded from the timing median.
const WARMUP_STEPS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub epsilon: f64,
    pub n: usize,
    pub method: String,
    /// Median per-step seconds.
    pub time_s: f64,
    /// Naive `time_s` over this row's, at the same `(n, epsilon)`.
    pub speedup: Option<f64>,
    /// Mean RMSE over seeds.
    pub rmse: Option<f64>,
    /// Across-seed standard deviation of the RMSE.
    pub rmse_sd: Option<f64>,
    pub rmse_runs: Vec<f64>,
    pub failures: usize,
}

#[derive(Debug, Clone)]
struct Measured {
    time_s: f64,
    rmse_runs: Vec<f64>,
    failures: usize,
}

fn measure(cfg: &ExperimentConfig, n: usize, epsilon: f64, backend: Backend) -> Result<Measured, CliError> {
    let series = load_data(cfg)?;
    let model = cfg.build_model()?;
    let proposal = cfg.build_proposal()?;
    let mut step_times = Vec::new();
    let mut rmse_runs = Vec::new();
    let mut failures = 0;
    for k in 0..cfg.n_seeds as u64 {
        let filter = FilterConfig {
            n_particles: n,
            algorithm: Algorithm::Mpf,
            kernel_backend: backend,
            epsilon,
            ..cfg.filter_config(cfg.seed + k)?
        };
        match run_filter(&series, model.as_ref(), proposal.as_ref(), &filter) {
            Ok(trace) => {
                step_times.extend(trace.steps.iter().skip(WARMUP_STEPS).map(|s| s.step_seconds));
                if let Ok(r) = trace_rmse(&trace, &series) {
                    rmse_runs.push(r);
                }
            }
            Err(_) => failures += 1,
        }
    }
    Ok(Measured { time_s: stats::median(&step_times), rmse_runs, failures })
}

/// Measures every `(epsilon, n, backend)` combination without writing
/// anything. The naive backend ignores `epsilon`, so it is measured once
/// per `n` and repeated in each tolerance block.
pub fn bench_rows(cfg: &ExperimentConfig) -> Result<Vec<BenchRow>, CliError> {
    cfg.validate_bench()?;
    let backends = cfg.bench_backend_list()?;
    let mut naive_cache: HashMap<usize, Measured> = HashMap::new();
    let mut rows = Vec::new();
    for &epsilon in &cfg.bench_epsilons {
        for &n in &cfg.bench_particles {
            let mut block: Vec<(Backend, Measured)> = Vec::new();
            for &backend in &backends {
                let m = match (backend, naive_cache.get(&n)) {
                    (Backend::Naive, Some(m)) => m.clone(),
                    _ => {
                        let m = measure(cfg, n, epsilon, backend)?;
                        if backend == Backend::Naive {
                            naive_cache.insert(n, m.clone());
                        }
                        m
                    }
                };
                block.push((backend, m));
            }
            let naive_time = block.iter().find(|(b, _)| *b == Backend::Naive).map(|(_, m)| m.time_s);
            for (backend, m) in block {
                let has_rmse = !m.rmse_runs.is_empty();
                rows.push(BenchRow {
                    epsilon,
                    n,
                    method: backend.name().into(),
                    time_s: m.time_s,
                    speedup: naive_time.map(|t| t / m.time_s),
                    rmse: has_rmse.then(|| stats::mean(&m.rmse_runs)),
                    rmse_sd: has_rmse.then(|| stats::std_dev(&m.rmse_runs)),
                    rmse_runs: m.rmse_runs,
                    failures: m.failures,
                });
            }
        }
    }
    Ok(rows)
}

/// Measures and writes `bench.csv` and `bench.json` under the output
/// directory.
pub fn run_bench(cfg: &ExperimentConfig) -> Result<Vec<BenchRow>, CliError> {
    let rows = bench_rows(cfg)?;
    let out = &cfg.output_dir;
    fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("bench.csv")).map_err(csv_err)?;
    w.write_record(BENCH_HEADER).map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &rows {
        w.write_record([
            r.epsilon.to_string(),
            r.n.to_string(),
            r.method.clone(),
            format!("{:.9}", r.time_s),
            opt(r.speedup),
            opt(r.rmse),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    let mut json = serde_json::to_string_pretty(&rows).expect("serializable");
    json.push('\n');
    fs::write(out.join("bench.json"), json)?;
    let runs = rows.iter().map(|r| r.rmse_runs.len() + r.failures).sum::<usize>();
    if rows.iter().all(|r| r.failures > 0 && r.rmse_runs.is_empty()) {
        return Err(CliError::AllRunsFailed(runs));
    }
    Ok(rows)
}
