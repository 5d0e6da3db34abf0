//! Command-line front end: fitting, simulation, Monte Carlo runs and
//! parameter transforms, driven by JSON configs and CSV data.

pub mod config;
pub mod csvio;
pub mod params;
pub mod report;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::error::LgmError;
use crate::estimation::{fit_model, FitResult, ModelKind};
use crate::harness::{run_condition, summarize_grid, FimlEstimator, MetricsReport, Strategy, TruthEstimator};
use crate::model::{LongitudinalDataset, OriginalParams};
use crate::reparam::{from_reparam, from_reparam_cellwise, to_reparam};
use crate::simgen::{gen_dataset, rng_from_seed};

pub use config::{ConditionSpec, ModelChoice, RunConfig};
pub use csvio::{read_long_csv, read_wide_csv, write_wide_csv};
pub use params::{JsonMatrix, OriginalParamsFile, ReparamParamsFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Default number of convergent replications per condition.
pub const DEFAULT_S: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<LgmError> for CliError {
    fn from(e: LgmError) -> Self {
        let code = match e {
            LgmError::NonPdCovariance { .. }
            | LgmError::NonPdCovariates
            | LgmError::SingularInformation
            | LgmError::NonPsdJoint
            | LgmError::NumericFailure(_) => EXIT_NUMERIC,
            _ => EXIT_INPUT,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

pub fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => RunConfig::from_json(&read_text(p)?).map_err(|e| CliError::input(format!("{}: {e}", p.display()))),
    }
}

pub fn load_dataset(path: &Path, long: bool) -> CliResult<LongitudinalDataset> {
    let file = fs::File::open(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let read = if long { read_long_csv(file) } else { read_wide_csv(file) };
    read.map(|(_, d)| d)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// Fit report for `dataset` under `config`, with the exit code it implies.
pub fn fit_command_report(dataset: &LongitudinalDataset, config: &RunConfig) -> CliResult<(Value, i32)> {
    let options = config.fit_options();
    let hash = config.hash();
    match config.model {
        ModelChoice::Truth => Err(CliError::input("model `truth` is only available for Monte Carlo runs")),
        ModelChoice::Compare => {
            let mut fits: Vec<FitResult> = Vec::new();
            let mut skipped = Vec::new();
            for kind in [
                ModelKind::Full,
                ModelKind::Reduced,
                ModelKind::Linear,
                ModelKind::Quadratic,
            ] {
                match fit_model(kind, dataset, &options) {
                    Ok(f) => fits.push(f),
                    Err(e @ LgmError::Identification(_)) => {
                        skipped.push(json!({"model": kind, "reason": e.to_string()}))
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            if fits.is_empty() {
                return Err(CliError::input("no model is identified for this dataset"));
            }
            let code = if fits.iter().all(|f| f.converged) {
                EXIT_OK
            } else {
                EXIT_NOT_CONVERGED
            };
            let mut table = serde_json::Map::new();
            table.insert("comparison".into(), report::comparison_table(&fits));
            table.insert("skipped".into(), Value::Array(skipped));
            table.insert(
                "fits".into(),
                Value::Object(
                    fits.iter()
                        .map(|f| (f.model.key().to_string(), report::fit_report(f)))
                        .collect(),
                ),
            );
            Ok((
                report::with_provenance(Value::Object(table), &hash, config.master_seed),
                code,
            ))
        }
        choice => {
            let kind = choice.kind().expect("single model");
            let fit = fit_model(kind, dataset, &options)?;
            let code = if fit.converged { EXIT_OK } else { EXIT_NOT_CONVERGED };
            Ok((
                report::with_provenance(report::fit_report(&fit), &hash, config.master_seed),
                code,
            ))
        }
    }
}

pub fn cmd_fit(data: &Path, long: bool, config: &RunConfig, out: Option<&Path>) -> CliResult<i32> {
    let dataset = load_dataset(data, long)?;
    let (report, code) = fit_command_report(&dataset, config)?;
    emit(out, &to_pretty(&report))?;
    Ok(code)
}

fn single_condition(config: &RunConfig) -> CliResult<crate::simgen::SimCondition> {
    match config.conditions().as_slice() {
        [c] => Ok(c.clone()),
        [] => Err(CliError::input("config has no `condition`")),
        _ => Err(CliError::input("simulate takes a single condition")),
    }
}

/// Dataset and population parameters for the config's condition and seed.
pub fn simulate_dataset(config: &RunConfig) -> CliResult<(LongitudinalDataset, OriginalParams)> {
    let cond = single_condition(config)?;
    let mut rng = rng_from_seed(config.master_seed);
    Ok(gen_dataset(&cond, &mut rng)?)
}

pub fn cmd_simulate(config: &RunConfig, out: &Path, truth: Option<&Path>) -> CliResult<i32> {
    let (dataset, params) = simulate_dataset(config)?;
    let mut buf = Vec::new();
    write_wide_csv(&mut buf, &dataset, None)?;
    fs::write(out, buf).map_err(|e| CliError::input(format!("{}: {e}", out.display())))?;
    if let Some(path) = truth {
        let file = OriginalParamsFile {
            config_hash: Some(config.hash()),
            seed: Some(config.master_seed),
            ..OriginalParamsFile::from_params(&params)
        };
        write_text(path, &to_pretty(&serde_json::to_value(file).expect("params serialize")))?;
    }
    Ok(EXIT_OK)
}

/// Metrics JSON and CSV text for the config's conditions.
pub fn mc_outputs(config: &RunConfig, workers: usize) -> CliResult<(String, String)> {
    let conditions = config.conditions();
    if conditions.is_empty() {
        return Err(CliError::input("config has no `condition`"));
    }
    let s = config.s.unwrap_or(DEFAULT_S);
    let options = config.fit_options();
    let mut reports: Vec<MetricsReport> = Vec::new();
    for cond in &conditions {
        let report = match config.model {
            ModelChoice::Truth => run_condition(cond, s, &TruthEstimator::default(), config.master_seed, workers)?,
            ModelChoice::Full => run_condition(
                cond,
                s,
                &FimlEstimator::new(options.clone(), Strategy::FullWithFallback),
                config.master_seed,
                workers,
            )?,
            ModelChoice::Reduced => run_condition(
                cond,
                s,
                &FimlEstimator::new(options.clone(), Strategy::ReducedOnly),
                config.master_seed,
                workers,
            )?,
            other => {
                return Err(CliError::input(format!(
                    "model `{}` is not available for Monte Carlo runs",
                    other.kind().map_or("compare", ModelKind::key)
                )))
            }
        };
        reports.push(report);
    }
    let summary = summarize_grid(&reports)?;
    let model = serde_json::to_value(config.model).expect("choice");
    let json = report::metrics_json(&reports, &summary, &model, s, &config.hash(), config.master_seed);
    Ok((to_pretty(&json), report::metrics_csv(&reports)))
}

pub fn cmd_mc(
    config: &RunConfig,
    workers: Option<usize>,
    out: Option<&Path>,
    csv_out: Option<&Path>,
) -> CliResult<i32> {
    let workers = workers.or(config.workers).unwrap_or(1).max(1);
    let (json_text, csv_text) = mc_outputs(config, workers)?;
    emit(out, &json_text)?;
    if let Some(p) = csv_out {
        write_text(p, &csv_text)?;
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Direction {
    #[value(name = "toReparam")]
    ToReparam,
    #[value(name = "fromReparam")]
    FromReparam,
    #[value(name = "cellwise")]
    Cellwise,
}

/// Transform a parameter file between spaces.
pub fn transform_json(text: &str, direction: Direction) -> CliResult<String> {
    let bad = |e: serde_json::Error| CliError::input(format!("parameter file: {e}"));
    let out = match direction {
        Direction::ToReparam => {
            let file: OriginalParamsFile = serde_json::from_str(text).map_err(bad)?;
            serde_json::to_value(ReparamParamsFile::from_params(&to_reparam(&file.to_params()?)))
        }
        Direction::FromReparam | Direction::Cellwise => {
            let file: ReparamParamsFile = serde_json::from_str(text).map_err(bad)?;
            let p = file.to_params()?;
            let orig = if direction == Direction::Cellwise {
                from_reparam_cellwise(&p)
            } else {
                from_reparam(&p)
            };
            serde_json::to_value(OriginalParamsFile::from_params(&orig))
        }
    }
    .expect("params serialize");
    Ok(to_pretty(&out))
}

pub fn cmd_transform(input: &Path, direction: Direction, out: Option<&Path>) -> CliResult<i32> {
    emit(out, &transform_json(&read_text(input)?, direction)?)?;
    Ok(EXIT_OK)
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "bilinear-lgm",
    version,
    about = "Piecewise latent growth models with an unknown knot"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a model (or compare all models) on a CSV dataset.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Read the long format (`id,t,y,x1..`).
        #[arg(long)]
        long: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a dataset for one simulation condition.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Run Monte Carlo replications over one or more conditions.
    Mc {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Convert a parameter file between the original and reparameterized spaces.
    Transform {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        direction: Direction,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::Fit {
            data,
            config,
            long,
            out,
        } => {
            let cfg = load_config(config.as_deref())?;
            cmd_fit(&data, long, &cfg, out.as_deref())
        }
        Command::Simulate { config, out, truth } => cmd_simulate(&load_config(Some(&config))?, &out, truth.as_deref()),
        Command::Mc {
            config,
            workers,
            out,
            csv,
        } => cmd_mc(&load_config(Some(&config))?, workers, out.as_deref(), csv.as_deref()),
        Command::Transform { params, direction, out } => cmd_transform(&params, direction, out.as_deref()),
    }
}

/// Parse `args` and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
