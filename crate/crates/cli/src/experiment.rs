//! Runs every (algorithm, seed) pair of an experiment on one shared
//! observation series and writes traces, a per-run log and a summary.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use mpf_core::diagnostics::{stats, summarize};
use mpf_core::filter::{run_filter, Algorithm, FilterTrace};
use mpf_core::model::{generate_synthetic, load_column, load_series, sv_returns_transform, ObservationSeries};

use crate::config::ExperimentConfig;
use crate::CliError;

pub const TRACE_HEADER: [&str; 7] = ["t", "estimate", "truth", "weight_variance", "unique_particles", "ess", "step_ms"];

/// Outcome of one filter run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: String,
    pub seed: u64,
    /// Hex digest of the observation series the run consumed.
    pub series_hash: String,
    pub ok: bool,
    pub error: Option<String>,
    pub rmse: Option<f64>,
    pub mean_weight_variance: Option<f64>,
    pub var_weight_variance: Option<f64>,
    pub mean_unique_particles: Option<f64>,
    pub total_seconds: Option<f64>,
    /// Relative to the output directory.
    pub trace_file: Option<String>,
}

/// Table 1 style aggregate over the successful runs of one algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub rmse_mean: Option<f64>,
    /// Variance of the per-run RMSE across seeds.
    pub rmse_var: Option<f64>,
    pub weight_var_mean: Option<f64>,
    pub runs: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub output_dir: PathBuf,
    pub summary: BTreeMap<String, AlgorithmSummary>,
    pub runs: Vec<RunRecord>,
}

impl ExperimentReport {
    pub fn runs_for(&self, algorithm: Algorithm) -> impl Iterator<Item = &RunRecord> {
        self.runs.iter().filter(move |r| r.algorithm == algorithm.name())
    }
}

/// Synthetic series from `data_seed`, or the configured file.
pub fn load_data(cfg: &ExperimentConfig) -> Result<ObservationSeries, CliError> {
    let Some(path) = &cfg.data_file else {
        let model = cfg.build_model()?;
        return Ok(generate_synthetic(model.as_ref(), cfg.t_max, cfg.data_seed)?);
    };
    match cfg.data_transform.as_str() {
        "returns" => {
            let prices = load_column(path)?;
            let returns = sv_returns_transform(&prices)?;
            Ok(ObservationSeries::new(returns.into_iter().map(|r| vec![r]).collect(), None)?)
        }
        _ => Ok(load_series(path)?),
    }
}

pub fn trace_file_name(algorithm: Algorithm, seed: u64) -> String {
    format!("traces/{}_seed{seed}.csv", algorithm.name())
}

/// Runs the experiment and writes `summary.json`, `runs.json`,
/// `config.toml` and `traces/*.csv` under the output directory.
///
/// Failed runs are recorded and do not stop the others; the call fails
/// with [`CliError::AllRunsFailed`] only when no run succeeded.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, CliError> {
    cfg.validate()?;
    let series = load_data(cfg)?;
    let model = cfg.build_model()?;
    let proposal = cfg.build_proposal()?;
    let algorithms = cfg.algorithm_list()?;
    let out = cfg.output_dir.clone();
    fs::create_dir_all(out.join("traces"))?;
    fs::write(out.join("config.toml"), cfg.to_toml_string())?;

    let series_hash = format!("{:016x}", series.content_hash());
    let jobs: Vec<(Algorithm, u64)> = algorithms
        .iter()
        .flat_map(|&a| (0..cfg.n_seeds as u64).map(move |k| (a, cfg.seed + k)))
        .collect();

    let runs: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(algorithm, seed)| -> Result<RunRecord, CliError> {
            let filter = mpf_core::filter::FilterConfig { algorithm, ..cfg.filter_config(seed)? };
            let mut record = RunRecord {
                algorithm: algorithm.name().into(),
                seed,
                series_hash: series_hash.clone(),
                ok: false,
                error: None,
                rmse: None,
                mean_weight_variance: None,
                var_weight_variance: None,
                mean_unique_particles: None,
                total_seconds: None,
                trace_file: None,
            };
            match run_filter(&series, model.as_ref(), proposal.as_ref(), &filter) {
                Ok(trace) => {
                    let name = trace_file_name(algorithm, seed);
                    write_trace(&out.join(&name), &trace, &series)?;
                    let s = summarize(&trace, &series);
                    let unique: Vec<f64> = trace.steps.iter().map(|s| s.unique_particles as f64).collect();
                    record.ok = true;
                    record.rmse = s.rmse;
                    record.mean_weight_variance = Some(s.mean_weight_variance);
                    record.var_weight_variance = Some(s.var_weight_variance);
                    record.mean_unique_particles = Some(stats::mean(&unique));
                    record.total_seconds = Some(s.total_seconds);
                    record.trace_file = Some(name);
                }
                Err(e) => record.error = Some(e.to_string()),
            }
            Ok(record)
        })
        .collect::<Result<_, _>>()?;

    let summary = summarize_runs(&algorithms, &runs);
    fs::write(out.join("summary.json"), to_json(&summary))?;
    fs::write(out.join("runs.json"), to_json(&runs))?;

    if runs.iter().all(|r| !r.ok) {
        return Err(CliError::AllRunsFailed(runs.len()));
    }
    Ok(ExperimentReport { output_dir: out, summary, runs })
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

pub fn summarize_runs(algorithms: &[Algorithm], runs: &[RunRecord]) -> BTreeMap<String, AlgorithmSummary> {
    algorithms
        .iter()
        .map(|a| {
            let mine: Vec<&RunRecord> = runs.iter().filter(|r| r.algorithm == a.name()).collect();
            let ok: Vec<&&RunRecord> = mine.iter().filter(|r| r.ok).collect();
            let rmse: Vec<f64> = ok.iter().filter_map(|r| r.rmse).collect();
            let wv: Vec<f64> = ok.iter().filter_map(|r| r.mean_weight_variance).collect();
            let nonempty = |v: &[f64], f: fn(&[f64]) -> f64| (!v.is_empty()).then(|| f(v));
            let summary = AlgorithmSummary {
                rmse_mean: nonempty(&rmse, stats::mean),
                rmse_var: nonempty(&rmse, stats::variance),
                weight_var_mean: nonempty(&wv, stats::mean),
                runs: mine.len(),
                failures: mine.len() - ok.len(),
            };
            (a.name().to_string(), summary)
        })
        .collect()
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

/// One row per timestep; multi-dimensional states are `;`-joined inside
/// their field and a missing truth is an empty field.
pub fn write_trace(path: &Path, trace: &FilterTrace, series: &ObservationSeries) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(TRACE_HEADER).map_err(csv_err)?;
    for (k, s) in trace.steps.iter().enumerate() {
        let truth = series.ground_truth.as_ref().map(|g| join(&g[k])).unwrap_or_default();
        w.write_record([
            s.t.to_string(),
            join(&s.estimate),
            truth,
            s.weight_variance.to_string(),
            s.unique_particles.to_string(),
            s.ess.to_string(),
            format!("{:.6}", s.step_seconds * 1e3),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::Io(io),
        other => CliError::Io(std::io::Error::other(format!("{other:?}"))),
    }
}
