use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use singloc::config::KeyValues;
use singloc::estimators::{bayes_estimate, mle_estimate, EstimatorConfig, EstimatorKind};
use singloc::harness::{run_experiment, ExperimentConfig, HarnessError, VERSION};
use singloc::limit::{draw_zeta_xi, LimitConfig};
use singloc::model::IntensityModel;
use singloc::sampler::{sample_batch, SampleBatch};

#[derive(Parser, Debug)]
#[command(name = "singloc", version, about = "Singularity location estimation for Poisson intensities")]
struct Cli {
    /// Key-value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; results go to standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw n paths from the configured model and write a batch file.
    Simulate {
        #[arg(long)]
        n: usize,
    },
    /// Estimate the shift from a batch file.
    Estimate {
        #[arg(long)]
        batch: PathBuf,
        #[arg(long, value_enum, default_value_t = Which::Bayes)]
        estimator: Which,
    },
    /// Draw the limit variables and write them as CSV.
    Limit {
        #[arg(long, default_value_t = 1000)]
        replicates: usize,
    },
    /// Run the experiment described by the configuration.
    Experiment,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Which {
    Bayes,
    Mle,
}

/// A failure with its exit code: 1 for bad input, 2 for runtime trouble.
struct Failure {
    code: u8,
    message: String,
}

fn invalid(message: impl ToString) -> Failure {
    Failure {
        code: 1,
        message: message.to_string(),
    }
}

fn runtime(message: impl ToString) -> Failure {
    Failure {
        code: 2,
        message: message.to_string(),
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_validation() {
            invalid(e)
        } else {
            runtime(e)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("singloc: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(invalid("--threads must be at least 1"));
        }
        #[cfg(feature = "parallel")]
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(runtime)?;
    }
    match cli.command {
        Command::Simulate { n } => simulate(&cli_config(&cli)?, n, &cli),
        Command::Estimate { ref batch, estimator } => estimate(&cli_config(&cli)?, batch, estimator, &cli),
        Command::Limit { replicates } => limit(&cli_config(&cli)?, replicates, &cli),
        Command::Experiment => experiment(&cli_config(&cli)?, &cli),
    }
}

fn cli_config(cli: &Cli) -> Result<KeyValues, Failure> {
    let path = cli.config.as_ref().ok_or_else(|| invalid("--config is required"))?;
    let text = fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
    KeyValues::parse(&text).map_err(invalid)
}

/// The `model.` section, or the whole file when it has no sections.
fn model_section(kv: &KeyValues) -> KeyValues {
    let sectioned = kv.keys().any(|k| k.contains('.'));
    if sectioned {
        kv.section("model")
    } else {
        kv.clone()
    }
}

fn model_of(kv: &KeyValues) -> Result<IntensityModel, Failure> {
    IntensityModel::from_key_values(&model_section(kv)).map_err(invalid)
}

fn seed_of(kv: &KeyValues, cli: &Cli) -> Result<u64, Failure> {
    match cli.seed {
        Some(s) => Ok(s),
        None => kv.or("experiment.seed", 1).map_err(invalid),
    }
}

/// Writes `body` to `out/name`, or to standard output without `--out`.
fn emit(cli: &Cli, name: &str, body: &str) -> Result<(), Failure> {
    match &cli.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| runtime(format!("cannot create {}: {e}", dir.display())))?;
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
        }
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn simulate(kv: &KeyValues, n: usize, cli: &Cli) -> Result<(), Failure> {
    let model = model_of(kv)?;
    let batch = sample_batch(&model, n, seed_of(kv, cli)?).map_err(invalid)?;
    emit(cli, "batch.txt", &batch.to_text())
}

fn estimate(kv: &KeyValues, batch_path: &Path, which: Which, cli: &Cli) -> Result<(), Failure> {
    let model = model_of(kv)?;
    let est_cfg = EstimatorConfig::from_key_values(&kv.section("estimator")).map_err(invalid)?;
    let text = fs::read_to_string(batch_path)
        .map_err(|e| invalid(format!("cannot read {}: {e}", batch_path.display())))?;
    let batch = SampleBatch::from_text(&text, &model).map_err(invalid)?;
    let result = match which {
        Which::Bayes => bayes_estimate(&batch, &model.family, &est_cfg),
        Which::Mle => mle_estimate(&batch, &model.family, &est_cfg),
    }
    .map_err(|e| match e {
        singloc::estimators::EstimatorError::MleUndefinedForNegativeP(_) => invalid(e),
        other => runtime(other),
    })?;
    let kind = match which {
        Which::Bayes => EstimatorKind::Bayes,
        Which::Mle => EstimatorKind::Mle,
    };
    match cli.format {
        Format::Json => {
            let body = serde_json::json!({
                "estimate": result.estimate,
                "estimator": kind.name(),
                "diagnostics": result.diagnostics,
                "n": batch.n,
                "model": model.fingerprint(),
                "seed": batch.seed,
                "version": VERSION,
            });
            let text = serde_json::to_string_pretty(&body).map_err(runtime)? + "\n";
            emit(cli, "estimate.json", &text)
        }
        Format::Csv => {
            let d = result.diagnostics;
            let body = format!(
                "estimator,estimate,grid_size,refinement_iterations,boundary_mass,ties\n{},{:.16e},{},{},{:e},{}\n",
                kind.name(),
                result.estimate,
                d.grid_size,
                d.refinement_iterations,
                d.boundary_mass,
                d.ties
            );
            emit(cli, "estimate.csv", &body)
        }
    }
}

fn limit(kv: &KeyValues, replicates: usize, cli: &Cli) -> Result<(), Failure> {
    let model = model_of(kv)?;
    let cfg = LimitConfig::from_key_values(&kv.section("limit")).map_err(invalid)?;
    if replicates == 0 {
        return Err(invalid("--replicates must be positive"));
    }
    let draws = draw_zeta_xi(&model.singularity(), &cfg, replicates, seed_of(kv, cli)?).map_err(runtime)?;
    emit(cli, "limit_draws.csv", &draws.to_csv())
}

fn experiment(kv: &KeyValues, cli: &Cli) -> Result<(), Failure> {
    let mut cfg = ExperimentConfig::from_key_values(kv)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let report = run_experiment(&cfg)?;
    let json = report.to_json() + "\n";
    match (&cli.out, cli.format) {
        (Some(_), _) => {
            emit(cli, "report.json", &json)?;
            if !report.rows.is_empty() {
                emit(cli, "errors.csv", &report.rows_csv())?;
            }
            Ok(())
        }
        (None, Format::Json) => emit(cli, "report.json", &json),
        (None, Format::Csv) => emit(cli, "errors.csv", &report.rows_csv()),
    }
}
