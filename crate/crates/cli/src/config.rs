//! Experiment configuration: a flat TOML file whose keys match the fields of
//! [`ExperimentConfig`], with command-line overrides on top.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use mpf_core::filter::{Algorithm, FilterConfig, HeavyTailedPrior, Proposal, Resampler, TransitionPrior};
use mpf_core::kernelsum::Backend;
use mpf_core::model::{StateSpaceModel, StochVolModel, UngmModel};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `ungm` or `stochvol`.
    pub model: String,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub phi: f64,
    pub sigma_eta: f64,
    pub beta: f64,

    /// Synthetic data length and seed; ignored when `data_file` is set.
    pub t_max: usize,
    pub data_seed: u64,
    /// CSV observation file, one timestep per row.
    pub data_file: Option<PathBuf>,
    /// `none`, or `returns` to turn a price column into mean-corrected
    /// percentage log returns.
    pub data_transform: String,

    pub algorithms: Vec<String>,
    pub n_particles: usize,
    pub resampler: String,
    pub resample_threshold: f64,
    pub backend: String,
    pub epsilon: f64,
    /// `prior` or `heavy`.
    pub proposal: String,
    pub proposal_inflation: f64,

    pub n_seeds: usize,
    /// Filter seed of the first run; run `k` uses `seed + k`.
    pub seed: u64,
    pub output_dir: PathBuf,

    pub bench_particles: Vec<usize>,
    pub bench_epsilons: Vec<f64>,
    pub bench_backends: Vec<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let ungm = UngmModel::default();
        let sv = StochVolModel::default();
        let filter = FilterConfig::default();
        Self {
            model: "ungm".into(),
            sigma_x: ungm.sigma_x,
            sigma_y: ungm.sigma_y,
            phi: sv.phi,
            sigma_eta: sv.sigma_eta,
            beta: sv.beta,
            t_max: 100,
            data_seed: 0,
            data_file: None,
            data_transform: "none".into(),
            algorithms: vec!["sir".into(), "mpf".into()],
            n_particles: filter.n_particles,
            resampler: filter.resampler.name().into(),
            resample_threshold: filter.resample_threshold,
            backend: filter.kernel_backend.name().into(),
            epsilon: filter.epsilon,
            proposal: "heavy".into(),
            proposal_inflation: HeavyTailedPrior::default().inflation,
            n_seeds: 10,
            seed: 0,
            output_dir: PathBuf::from("mpf-out"),
            bench_particles: vec![500, 1500, 5000],
            bench_epsilons: vec![1e-3, 1e-7],
            bench_backends: vec!["naive".into(), "dualtree".into(), "fgt".into()],
        }
    }
}

/// Values given on the command line; empty or `None` leaves the file value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub algorithms: Vec<String>,
    pub particles: Vec<usize>,
    pub seeds: Option<usize>,
    pub backends: Vec<String>,
    pub epsilons: Vec<f64>,
    pub output_dir: Option<PathBuf>,
}

/// Which subcommand the overrides are for. `run` takes one value per flag,
/// `bench` takes lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Run,
    Bench,
}

fn config_err(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

fn parse_field<T: FromStr>(field: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| config_err(field, e))
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides, mode: Mode) -> Result<(), CliError> {
        if !o.algorithms.is_empty() {
            self.algorithms = o.algorithms.clone();
        }
        if let Some(k) = o.seeds {
            self.n_seeds = k;
        }
        if let Some(dir) = &o.output_dir {
            self.output_dir = dir.clone();
        }
        match mode {
            Mode::Run => {
                let single = |name: &str, len: usize| {
                    if len > 1 {
                        Err(config_err(name, "takes a single value for `run`"))
                    } else {
                        Ok(())
                    }
                };
                single("--particles", o.particles.len())?;
                single("--backend", o.backends.len())?;
                single("--epsilon", o.epsilons.len())?;
                if let Some(&n) = o.particles.first() {
                    self.n_particles = n;
                }
                if let Some(b) = o.backends.first() {
                    self.backend = b.clone();
                }
                if let Some(&e) = o.epsilons.first() {
                    self.epsilon = e;
                }
            }
            Mode::Bench => {
                if !o.particles.is_empty() {
                    self.bench_particles = o.particles.clone();
                }
                if !o.backends.is_empty() {
                    self.bench_backends = o.backends.clone();
                }
                if !o.epsilons.is_empty() {
                    self.bench_epsilons = o.epsilons.clone();
                }
            }
        }
        Ok(())
    }

    /// Checks every field, reporting the first offending key by name.
    pub fn validate(&self) -> Result<(), CliError> {
        self.build_model()?;
        self.build_proposal()?;
        self.algorithm_list()?;
        self.filter_config(0)?;
        if self.n_seeds == 0 {
            return Err(config_err("n_seeds", "must be at least 1"));
        }
        if self.data_file.is_none() && self.t_max == 0 {
            return Err(config_err("t_max", "must be at least 1"));
        }
        match self.data_transform.as_str() {
            "none" | "returns" => {}
            other => return Err(config_err("data_transform", format!("unknown transform `{other}`"))),
        }
        Ok(())
    }

    /// Extra checks for `bench`.
    pub fn validate_bench(&self) -> Result<(), CliError> {
        self.validate()?;
        if self.bench_particles.is_empty() || self.bench_particles.contains(&0) {
            return Err(config_err("bench_particles", "need at least one positive particle count"));
        }
        if self.bench_epsilons.is_empty() || self.bench_epsilons.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(config_err("bench_epsilons", "need at least one positive tolerance"));
        }
        self.bench_backend_list()?;
        if self.data_file.is_none() && self.t_max < 3 {
            return Err(config_err("t_max", "bench needs at least 3 timesteps (two are warm-up)"));
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<Box<dyn StateSpaceModel>, CliError> {
        match self.model.as_str() {
            "ungm" => UngmModel::new(self.sigma_x, self.sigma_y)
                .map(|m| Box::new(m) as Box<dyn StateSpaceModel>)
                .map_err(|e| config_err("model", e)),
            "stochvol" => StochVolModel::new(self.phi, self.sigma_eta, self.beta)
                .map(|m| Box::new(m) as Box<dyn StateSpaceModel>)
                .map_err(|e| config_err("model", e)),
            other => Err(config_err("model", format!("unknown model `{other}` (expected ungm or stochvol)"))),
        }
    }

    pub fn build_proposal(&self) -> Result<Box<dyn Proposal>, CliError> {
        match self.proposal.as_str() {
            "prior" => Ok(Box::new(TransitionPrior)),
            "heavy" => HeavyTailedPrior::new(self.proposal_inflation)
                .map(|p| Box::new(p) as Box<dyn Proposal>)
                .map_err(|e| config_err("proposal_inflation", e)),
            other => Err(config_err("proposal", format!("unknown proposal `{other}` (expected prior or heavy)"))),
        }
    }

    pub fn algorithm_list(&self) -> Result<Vec<Algorithm>, CliError> {
        if self.algorithms.is_empty() {
            return Err(config_err("algorithms", "at least one algorithm is required"));
        }
        let mut out: Vec<Algorithm> = Vec::new();
        for name in &self.algorithms {
            let a: Algorithm = parse_field("algorithms", name)?;
            if !out.contains(&a) {
                out.push(a);
            }
        }
        Ok(out)
    }

    pub fn bench_backend_list(&self) -> Result<Vec<Backend>, CliError> {
        if self.bench_backends.is_empty() {
            return Err(config_err("bench_backends", "at least one backend is required"));
        }
        self.bench_backends.iter().map(|b| parse_field("bench_backends", b)).collect()
    }

    /// Filter settings for the run with filter seed `seed`.
    pub fn filter_config(&self, seed: u64) -> Result<FilterConfig, CliError> {
        let cfg = FilterConfig {
            n_particles: self.n_particles,
            algorithm: Algorithm::default(),
            resampler: parse_field::<Resampler>("resampler", &self.resampler)?,
            resample_threshold: self.resample_threshold,
            kernel_backend: parse_field::<Backend>("backend", &self.backend)?,
            epsilon: self.epsilon,
            seed,
        };
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ExperimentConfig { model: "stochvol".into(), data_file: Some("x.csv".into()), ..Default::default() };
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml_str("n_particle = 3").unwrap_err();
        assert!(err.to_string().contains("n_particle"), "{err}");
    }

    #[test]
    fn errors_name_the_field() {
        let cases = [
            ("algorithms = []", "algorithms"),
            ("algorithms = [\"pf\"]", "algorithms"),
            ("n_seeds = 0", "n_seeds"),
            ("backend = \"gpu\"", "backend"),
            ("model = \"lorenz\"", "model"),
            ("proposal_inflation = 0.5", "proposal_inflation"),
            ("n_particles = 0", "n_particles"),
            ("epsilon = -1.0", "epsilon"),
        ];
        for (text, field) in cases {
            let err = ExperimentConfig::from_toml_str(text).unwrap().validate().unwrap_err();
            assert!(err.to_string().contains(field), "{text}: {err}");
        }
    }

    #[test]
    fn overrides() {
        let mut cfg = ExperimentConfig::default();
        let o = Overrides {
            algorithms: vec!["ampf".into()],
            particles: vec![64],
            seeds: Some(3),
            backends: vec!["fgt".into()],
            epsilons: vec![1e-5],
            output_dir: Some("elsewhere".into()),
        };
        cfg.apply(&o, Mode::Run).unwrap();
        assert_eq!(cfg.algorithms, vec!["ampf".to_string()]);
        assert_eq!((cfg.n_particles, cfg.n_seeds, cfg.epsilon), (64, 3, 1e-5));
        assert_eq!(cfg.backend, "fgt");
        assert_eq!(cfg.output_dir, PathBuf::from("elsewhere"));

        let many = Overrides { particles: vec![1, 2], ..Default::default() };
        assert!(ExperimentConfig::default().apply(&many, Mode::Run).is_err());
        let mut bench = ExperimentConfig::default();
        bench.apply(&many, Mode::Bench).unwrap();
        assert_eq!(bench.bench_particles, vec![1, 2]);
    }
}
