use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mpf_cli::{run_bench, run_experiment, CliError, ExperimentConfig, Mode, Overrides};
use mpf_core::model::generate_synthetic;

#[derive(Parser)]
#[command(name = "mpf", version, about = "Marginal particle filter experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured algorithm over the seeds and write traces and a summary.
    Run(Common),
    /// Time MPF across particle counts, tolerances and kernel-sum backends.
    Bench(Common),
    /// Write a synthetic observation series (and its hidden states) as CSV.
    Generate(Generate),
}

#[derive(Args)]
struct Common {
    /// Flat TOML experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Algorithm to run (sir, asir, mpf, ampf); repeatable.
    #[arg(long = "algo")]
    algo: Vec<String>,
    /// Particle count; a comma-separated list for `bench`.
    #[arg(long, value_delimiter = ',')]
    particles: Vec<usize>,
    /// Number of seeds.
    #[arg(long)]
    seeds: Option<usize>,
    /// Kernel-sum backend (naive, dualtree, fgt); a list for `bench`.
    #[arg(long, value_delimiter = ',')]
    backend: Vec<String>,
    /// Kernel-sum tolerance; a list for `bench`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    epsilon: Vec<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Generate {
    /// Flat TOML experiment file supplying the model and its parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model (ungm or stochvol).
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    t_max: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Observation CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Also write the hidden states here.
    #[arg(long)]
    truth: Option<PathBuf>,
}

fn load(path: &Option<PathBuf>) -> Result<ExperimentConfig, CliError> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn resolve(args: &Common, mode: Mode) -> Result<ExperimentConfig, CliError> {
    let mut cfg = load(&args.config)?;
    let overrides = Overrides {
        algorithms: args.algo.clone(),
        particles: args.particles.clone(),
        seeds: args.seeds,
        backends: args.backend.clone(),
        epsilons: args.epsilon.clone(),
        output_dir: args.out.clone(),
    };
    cfg.apply(&overrides, mode)?;
    Ok(cfg)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.6}"))
}

fn run(args: &Common) -> Result<(), CliError> {
    let cfg = resolve(args, Mode::Run)?;
    let report = run_experiment(&cfg)?;
    println!("{:<6} {:>12} {:>12} {:>14} {:>6} {:>9}", "algo", "rmse_mean", "rmse_var", "weight_var", "runs", "failures");
    for (name, s) in &report.summary {
        println!(
            "{name:<6} {:>12} {:>12} {:>14} {:>6} {:>9}",
            opt(s.rmse_mean),
            opt(s.rmse_var),
            opt(s.weight_var_mean),
            s.runs,
            s.failures
        );
    }
    for r in report.runs.iter().filter(|r| !r.ok) {
        eprintln!("{} seed {}: {}", r.algorithm, r.seed, r.error.as_deref().unwrap_or("failed"));
    }
    println!("wrote {}", report.output_dir.display());
    Ok(())
}

fn bench(args: &Common) -> Result<(), CliError> {
    let cfg = resolve(args, Mode::Bench)?;
    let rows = run_bench(&cfg)?;
    println!("{:>8} {:>6} {:>9} {:>12} {:>8} {:>10}", "epsilon", "n", "method", "time_s", "speedup", "rmse");
    for r in &rows {
        println!(
            "{:>8.0e} {:>6} {:>9} {:>12.6} {:>8} {:>10}",
            r.epsilon,
            r.n,
            r.method,
            r.time_s,
            r.speedup.map_or_else(|| "-".into(), |s| format!("{s:.2}")),
            opt(r.rmse)
        );
    }
    println!("wrote {}", cfg.output_dir.join("bench.csv").display());
    Ok(())
}

fn generate(args: &Generate) -> Result<(), CliError> {
    let mut cfg = load(&args.config)?;
    if let Some(m) = &args.model {
        cfg.model = m.clone();
    }
    let t_max = args.t_max.unwrap_or(cfg.t_max);
    let seed = args.seed.unwrap_or(cfg.data_seed);
    let model = cfg.build_model()?;
    let series = generate_synthetic(model.as_ref(), t_max, seed)?;
    write_columns(&args.out, "y", &series.observations)?;
    if let (Some(path), Some(truth)) = (&args.truth, &series.ground_truth) {
        write_columns(path, "x", truth)?;
    }
    Ok(())
}

fn write_columns(path: &PathBuf, prefix: &str, rows: &[Vec<f64>]) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io(std::io::Error::other(e.to_string()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let d = rows.first().map_or(1, Vec::len);
    let header: Vec<String> = if d == 1 { vec![prefix.into()] } else { (1..=d).map(|i| format!("{prefix}{i}")).collect() };
    w.write_record(&header).map_err(io)?;
    for r in rows {
        w.write_record(r.iter().map(f64::to_string)).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => run(a),
        Command::Bench(a) => bench(a),
        Command::Generate(a) => generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mpf: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
