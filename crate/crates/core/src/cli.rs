//! Command-line front end: `gen`, `features`, `train` and `eval`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 data
//! validation failure, 5 training divergence, 6 unreadable or mismatched
//! checkpoint.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::features::{plan_features, FeatureError};
use crate::pipeline::{
    evaluate, load_checkpoint, run_experiment, save_checkpoint, summary_table, test_datasets, write_report_csv,
    ExperimentConfig, PipelineError, ReportRow,
};
use crate::synthgen::{generate_scenario, ScenarioConfig, SynthError};
use crate::telemetry::{load_telemetry, validate_store, write_handovers, write_telemetry, TelemetryError};

pub const TELEMETRY_FILE: &str = "telemetry.csv";
pub const HANDOVER_FILE: &str = "handovers.csv";
pub const REPORT_FILE: &str = "report.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "slicecast", version, about = "SLA-aware traffic forecasting for cells and network slices")]
pub struct Cli {
    /// Worker threads for independent training tasks; 1 keeps runs bit-reproducible.
    #[arg(long, global = true, default_value_t = 1)]
    pub parallel: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic telemetry scenario.
    Gen(GenArgs),
    /// Show the features each model would use, per fold.
    Features(FeaturesArgs),
    /// Train, calibrate and evaluate the models of an experiment.
    Train(TrainArgs),
    /// Evaluate a saved model on its test span.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Preset {
    Default,
    Mobility,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Scenario JSON file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in scenario instead of a config file.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Handover coupling of the mobility preset.
    #[arg(long, default_value_t = 0.6)]
    pub coupling: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated forecast horizons in hours.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 4, 8, 24])]
    pub horizons: Vec<usize>,
    /// Report CSV to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("training diverged: {0}")]
    Divergence(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Validation(_) => 4,
            CliError::Divergence(_) => 5,
            CliError::Checkpoint(_) => 6,
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let msg = e.to_string();
        match e {
            PipelineError::NonFiniteLoss { .. } | PipelineError::Neural(_) => CliError::Divergence(msg),
            PipelineError::Checkpoint(_) => CliError::Checkpoint(msg),
            PipelineError::Io(_) => CliError::Io(msg),
            PipelineError::Feature(_) | PipelineError::EmptyDataset | PipelineError::MisalignedGroups(_) => {
                CliError::Validation(msg)
            }
            PipelineError::InvalidConfig(_) | PipelineError::EmptyGrid | PipelineError::HorizonZero | PipelineError::Loss(_) => {
                CliError::Config(msg)
            }
        }
    }
}

impl From<TelemetryError> for CliError {
    fn from(e: TelemetryError) -> Self {
        match e {
            TelemetryError::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        CliError::Validation(e.to_string())
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Record of one command run, written when it starts and again when it ends.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub toolkit_version: String,
    pub status: String,
    pub seed: Option<u64>,
    pub parallel: usize,
    pub config: serde_json::Value,
    /// SHA-256 of every input file, by path.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of every output file, by path relative to the output directory.
    pub outputs: BTreeMap<String, String>,
    /// Wall-clock seconds per stage.
    pub durations: BTreeMap<String, f64>,
}

struct ManifestWriter {
    path: PathBuf,
    manifest: RunManifest,
    clock: Instant,
}

impl ManifestWriter {
    fn start(dir: &Path, command: &str, config: serde_json::Value, seed: Option<u64>, parallel: usize) -> Result<Self, CliError> {
        let w = Self {
            path: dir.join(MANIFEST_FILE),
            manifest: RunManifest {
                command: command.to_string(),
                toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
                status: "running".into(),
                seed,
                parallel,
                config,
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
                durations: BTreeMap::new(),
            },
            clock: Instant::now(),
        };
        write_json(&w.path, &w.manifest)?;
        Ok(w)
    }

    fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let digest = sha256_file(path)?;
        self.manifest.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    fn output(&mut self, dir: &Path, path: &Path) -> Result<(), CliError> {
        let digest = sha256_file(path)?;
        let rel = path.strip_prefix(dir).unwrap_or(path);
        self.manifest.outputs.insert(rel.display().to_string(), digest);
        Ok(())
    }

    fn lap(&mut self, stage: &str) {
        self.manifest.durations.insert(stage.to_string(), self.clock.elapsed().as_secs_f64());
        self.clock = Instant::now();
    }

    fn finish(mut self) -> Result<(), CliError> {
        self.manifest.status = "complete".into();
        write_json(&self.path, &self.manifest)
    }
}

/// Writes to stdout; a reader that closed the pipe early is not an error.
fn emit(text: &str) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(CliError::Io(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn load_data(dir: &Path) -> Result<crate::telemetry::TelemetryStore, CliError> {
    let handovers = dir.join(HANDOVER_FILE);
    let store = load_telemetry(&dir.join(TELEMETRY_FILE), handovers.exists().then_some(handovers.as_path()))?;
    let bad = validate_store(&store);
    if !bad.is_empty() {
        let mut lines = Vec::new();
        for r in &bad {
            for g in &r.gaps {
                lines.push(format!("{}/{}: {} missing hour(s) before index {}", r.cell, r.slice.as_str(), g.missing_hours, g.index));
            }
            for i in &r.out_of_order {
                lines.push(format!("{}/{}: out-of-order timestamp at index {i}", r.cell, r.slice.as_str()));
            }
            for i in &r.negatives {
                lines.push(format!("{}/{}: negative traffic at index {i}", r.cell, r.slice.as_str()));
            }
        }
        return Err(CliError::Validation(lines.join("\n")));
    }
    Ok(store)
}

fn cmd_gen(args: &GenArgs, parallel: usize) -> Result<(), CliError> {
    let config = match (&args.config, args.preset) {
        (Some(path), _) => read_json::<ScenarioConfig>(path)?,
        (None, Some(Preset::Default)) => ScenarioConfig::default_scenario(args.seed),
        (None, Some(Preset::Mobility)) => ScenarioConfig::mobility_scenario(args.seed, args.coupling),
        (None, None) => return Err(CliError::Config("either --config or --preset is required".into())),
    };
    config.validate().map_err(|e| CliError::Config(e.to_string()))?;
    create_dir(&args.out)?;
    let echo = serde_json::to_value(&config).map_err(|e| CliError::Config(e.to_string()))?;
    let mut manifest = ManifestWriter::start(&args.out, "gen", echo, Some(config.seed), parallel)?;
    if let Some(path) = &args.config {
        manifest.input(path)?;
    }
    let store = generate_scenario(&config).map_err(|e| match e {
        SynthError::InvalidConfig { .. } => CliError::Config(e.to_string()),
        SynthError::Telemetry(t) => t.into(),
    })?;
    manifest.lap("generate");

    let write = |name: &str, f: &dyn Fn(BufWriter<File>) -> Result<(), TelemetryError>| -> Result<PathBuf, CliError> {
        let path = args.out.join(name);
        let file = File::create(&path).map_err(|e| io_err(&path, e))?;
        f(BufWriter::new(file))?;
        Ok(path)
    };
    let telemetry = write(TELEMETRY_FILE, &|w| write_telemetry(&store, w))?;
    let handovers = write(HANDOVER_FILE, &|w| write_handovers(&store.handovers, w))?;
    let scenario = args.out.join("scenario.json");
    write_json(&scenario, &config)?;
    for p in [&telemetry, &handovers, &scenario] {
        manifest.output(&args.out, p)?;
    }
    manifest.lap("write");
    manifest.finish()?;
    emit(&format!("{} series, {} hours each, written to {}\n", store.len(), config.hours(), args.out.display()))
}

fn load_experiment(path: &Path) -> Result<ExperimentConfig, CliError> {
    let config: ExperimentConfig = read_json(path)?;
    config.validate()?;
    Ok(config)
}

#[derive(Serialize)]
struct FeatureListing {
    arch: String,
    fold: usize,
    cell: String,
    slice: String,
    model_kind: String,
    channels: Vec<String>,
    selected: Vec<(String, f64)>,
    peak_hours: Vec<usize>,
}

fn cmd_features(args: &FeaturesArgs) -> Result<(), CliError> {
    let config = load_experiment(&args.config)?;
    let store = load_data(&args.data)?;
    let hours = store.series().next().map(|s| s.len()).unwrap_or(0);
    let splits = config.train.folds.splits(hours)?;
    let mut out = Vec::new();
    for arch in &config.architectures {
        for split in &splits {
            for &kind in &config.model_kinds {
                for (cell, slice) in arch.groups() {
                    let plan = plan_features(&store, &cell, slice, kind, &split.train, &config.features)?;
                    out.push(FeatureListing {
                        arch: arch.name().into(),
                        fold: split.fold,
                        cell: cell.to_string(),
                        slice: slice.as_str().into(),
                        model_kind: kind.as_str().into(),
                        channels: plan.features.channels().iter().map(|c| c.to_string()).collect(),
                        selected: plan.selected.iter().map(|(l, r)| (l.to_string(), *r)).collect(),
                        peak_hours: (0..24).filter(|h| plan.peak_hours[*h]).collect(),
                    });
                }
            }
        }
    }
    let text = serde_json::to_string_pretty(&out).map_err(|e| CliError::Config(e.to_string()))?;
    emit(&(text + "\n"))
}

fn write_report(path: &Path, rows: &[ReportRow]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    write_report_csv(BufWriter::new(file), rows)?;
    Ok(())
}

fn cmd_train(args: &TrainArgs, parallel: usize) -> Result<(), CliError> {
    let config = load_experiment(&args.config)?;
    create_dir(&args.out)?;
    let echo = serde_json::to_value(&config).map_err(|e| CliError::Config(e.to_string()))?;
    let mut manifest = ManifestWriter::start(&args.out, "train", echo, Some(config.train.seed), parallel)?;
    manifest.input(&args.config)?;
    let store = load_data(&args.data)?;
    manifest.input(&args.data.join(TELEMETRY_FILE))?;
    if args.data.join(HANDOVER_FILE).exists() {
        manifest.input(&args.data.join(HANDOVER_FILE))?;
    }
    manifest.lap("load");

    let output = run_experiment(&store, &config, parallel)?;
    manifest.lap("train");

    let ckpt_dir = args.out.join("checkpoints");
    create_dir(&ckpt_dir)?;
    for rec in &output.models {
        let path = ckpt_dir.join(format!("{}.json", rec.name));
        save_checkpoint(&path, &rec.model)?;
        manifest.output(&args.out, &path)?;
    }
    let report = args.out.join(REPORT_FILE);
    write_report(&report, &output.rows)?;
    let report_json = args.out.join("report.json");
    write_json(&report_json, &output.rows)?;
    for p in [&report, &report_json] {
        manifest.output(&args.out, p)?;
    }
    manifest.lap("write");
    manifest.finish()?;
    emit(&output.summary())
}

fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let model = load_checkpoint(&args.checkpoint).map_err(|e| match e {
        PipelineError::Io(m) => CliError::Io(m),
        other => CliError::Checkpoint(other.to_string()),
    })?;
    let store = load_data(&args.data)?;
    let tests = test_datasets(&store, &model, model.test_range.clone())?;
    let report = evaluate(&model, &tests, &args.horizons)?;
    let label = match model.losses[0] {
        crate::slaloss::LossSpec::Wmae { .. } => model.model_kind.as_str().to_string(),
        other => format!("{}+{}", model.model_kind.as_str(), other.name()),
    };
    let rows: Vec<ReportRow> = report
        .rows
        .iter()
        .map(|r| ReportRow {
            arch: model.arch.name().to_string(),
            model_kind: label.clone(),
            cell: r.cell.clone(),
            slice: r.slice,
            sla_target: model.targets[r.head].unwrap_or(f64::NAN),
            horizon: r.horizon,
            fold: model.fold.to_string(),
            sla_loss: r.sla_loss,
            violation_rate: r.violation_rate,
            overprov_volume: r.overprov_volume,
            weight_w: r.weight_w,
            flag_unmet: r.flag_unmet,
        })
        .collect();
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_report(&args.out, &rows)?;
    emit(&summary_table(&rows))
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    if cli.parallel == 0 {
        return Err(CliError::Config("--parallel must be >= 1".into()));
    }
    match &cli.command {
        Command::Gen(a) => cmd_gen(a, cli.parallel),
        Command::Features(a) => cmd_features(a),
        Command::Train(a) => cmd_train(a, cli.parallel),
        Command::Eval(a) => cmd_eval(a),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => {
            let _ = io::stdout().flush();
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
