use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::{build_dataset, DatasetBundle, FeatureOptions, ModelKind};
use crate::telemetry::{CellId, FoldSplit, SliceKind, TelemetryStore};

use super::calibrate::LineSearch;
use super::config::{ArchKind, ExperimentConfig};
use super::evaluate::{aggregate_folds, evaluate, EvalReport, EvalRow};
use super::train::{train_arch, TrainedModel};
use super::PipelineError;

pub const REPORT_HEADER: [&str; 12] = [
    "arch",
    "model_kind",
    "cell",
    "slice",
    "sla_target",
    "horizon",
    "fold",
    "sla_loss",
    "violation_rate",
    "overprov_volume",
    "weight_w",
    "flag_unmet",
];

/// One line of the report CSV. Baseline models carry their loss in
/// `model_kind` (for example `univariate+mae`) and are scored at the weight
/// calibrated for the same feature family and target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub arch: String,
    pub model_kind: String,
    pub cell: CellId,
    pub slice: SliceKind,
    pub sla_target: f64,
    pub horizon: usize,
    /// Fold number, or `mean` for the average over folds.
    pub fold: String,
    pub sla_loss: f64,
    pub violation_rate: f64,
    pub overprov_volume: f64,
    pub weight_w: f64,
    pub flag_unmet: bool,
}

/// A trained model with the file stem it is saved under.
#[derive(Debug, Clone)]
pub struct ModelRecord {
    pub name: String,
    pub model: TrainedModel,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<ReportRow>,
    pub models: Vec<ModelRecord>,
}

/// Datasets of every input group of `arch` for one fold.
pub fn build_bundles(
    store: &TelemetryStore,
    arch: &ArchKind,
    kind: ModelKind,
    split: &FoldSplit,
    window: usize,
    options: &FeatureOptions,
) -> Result<Vec<DatasetBundle>, PipelineError> {
    arch.groups()
        .iter()
        .map(|(cell, slice)| build_dataset(store, cell, *slice, kind, split, window, options).map_err(Into::into))
        .collect()
}

fn arch_label(arch: &ArchKind) -> String {
    let cells: Vec<String> = arch.groups().iter().map(|(c, s)| format!("{c}.{}", s.as_str())).collect();
    format!("{}_{}", arch.name(), cells.join("+"))
}

struct Scored {
    label: String,
    targets: Vec<f64>,
    report: EvalReport,
}

struct TaskResult {
    scored: Vec<Scored>,
    models: Vec<ModelRecord>,
}

fn run_task(
    store: &TelemetryStore,
    config: &ExperimentConfig,
    arch: &ArchKind,
    kind: ModelKind,
    split: &FoldSplit,
) -> Result<TaskResult, PipelineError> {
    let bundles = build_bundles(store, arch, kind, split, config.train.window, &config.features)?;
    let tests: Vec<_> = bundles.iter().map(|b| b.test.clone()).collect();
    let heads = bundles.len();
    let stem = format!("{}_{}_fold{}", arch_label(arch), kind.as_str(), split.fold);
    let mut search = LineSearch::new(&bundles, arch.clone(), &config.train, &config.grid)?;
    let mut out = TaskResult { scored: Vec::new(), models: Vec::new() };
    let mut calibrated = Vec::new();
    for (ti, target) in config.targets.iter().enumerate() {
        let targets = target.resolve(heads);
        let cal = search.calibrate(&targets)?;
        let report = evaluate(&cal.model, &tests, &config.horizons)?;
        out.scored.push(Scored { label: kind.as_str().to_string(), targets: targets.clone(), report });
        out.models.push(ModelRecord { name: format!("{stem}_target{ti}"), model: cal.model.clone() });
        calibrated.push((targets, cal));
    }
    let spec = super::config::ArchitectureSpec::new(arch.clone(), kind, vec![0.5; heads])?;
    for baseline in &config.baselines {
        let base = train_arch(&bundles, &spec, &vec![*baseline; heads], &config.train)?;
        let label = format!("{}+{}", kind.as_str(), baseline.name());
        out.models.push(ModelRecord { name: format!("{stem}_{}", baseline.name()), model: base.clone() });
        for (targets, cal) in &calibrated {
            let mut scored = base.clone();
            scored.weights = cal.weights.clone();
            scored.targets = targets.iter().map(|t| Some(*t)).collect();
            scored.unmet = cal.unmet.clone();
            let report = evaluate(&scored, &tests, &config.horizons)?;
            out.scored.push(Scored { label: label.clone(), targets: targets.clone(), report });
        }
    }
    Ok(out)
}

fn to_rows(arch: &ArchKind, label: &str, targets: &[f64], rows: &[EvalRow]) -> Vec<ReportRow> {
    rows.iter()
        .map(|r| ReportRow {
            arch: arch.name().to_string(),
            model_kind: label.to_string(),
            cell: r.cell.clone(),
            slice: r.slice,
            sla_target: targets[r.head],
            horizon: r.horizon,
            fold: r.fold.map_or_else(|| "mean".to_string(), |f| f.to_string()),
            sla_loss: r.sla_loss,
            violation_rate: r.violation_rate,
            overprov_volume: r.overprov_volume,
            weight_w: r.weight_w,
            flag_unmet: r.flag_unmet,
        })
        .collect()
}

/// Trains, calibrates and evaluates every architecture x model kind x fold.
/// Independent tasks run on up to `parallel` threads; results are merged
/// in task order, so the output does not depend on `parallel`.
pub fn run_experiment(
    store: &TelemetryStore,
    config: &ExperimentConfig,
    parallel: usize,
) -> Result<ExperimentOutput, PipelineError> {
    config.validate()?;
    if store.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    let hours = store.series().next().map(|s| s.len()).unwrap_or(0);
    let splits = config.train.folds.splits(hours)?;
    let mut tasks = Vec::new();
    for arch in &config.architectures {
        for &kind in &config.model_kinds {
            for split in &splits {
                tasks.push((arch, kind, split));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel.max(1))
        .build()
        .map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
    let results: Vec<Result<TaskResult, PipelineError>> =
        pool.install(|| tasks.par_iter().map(|(a, k, s)| run_task(store, config, a, *k, s)).collect());

    let mut rows = Vec::new();
    let mut models = Vec::new();
    // tasks are ordered arch, kind, fold; fold groups are contiguous
    let per_group = splits.len();
    let results: Vec<TaskResult> = results.into_iter().collect::<Result<_, _>>()?;
    for (chunk, task_chunk) in results.chunks(per_group).zip(tasks.chunks(per_group)) {
        let arch = task_chunk[0].0;
        let entries = chunk[0].scored.len();
        for e in 0..entries {
            let label = &chunk[0].scored[e].label;
            let targets = &chunk[0].scored[e].targets;
            let reports: Vec<EvalReport> = chunk.iter().map(|t| t.scored[e].report.clone()).collect();
            for r in &reports {
                rows.extend(to_rows(arch, label, targets, &r.rows));
            }
            if reports.len() > 1 {
                rows.extend(to_rows(arch, label, targets, &aggregate_folds(&reports).rows));
            }
        }
        for t in chunk {
            models.extend(t.models.iter().cloned());
        }
    }
    Ok(ExperimentOutput { rows, models })
}

pub fn write_report_csv<W: Write>(writer: W, rows: &[ReportRow]) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| PipelineError::Io(e.to_string());
    w.write_record(REPORT_HEADER).map_err(io)?;
    for r in rows {
        w.write_record([
            r.arch.clone(),
            r.model_kind.clone(),
            r.cell.to_string(),
            r.slice.as_str().to_string(),
            r.sla_target.to_string(),
            r.horizon.to_string(),
            r.fold.clone(),
            r.sla_loss.to_string(),
            r.violation_rate.to_string(),
            r.overprov_volume.to_string(),
            r.weight_w.to_string(),
            r.flag_unmet.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| PipelineError::Io(e.to_string()))
}

/// Fixed-width table of the rows, for terminals.
pub fn summary_table(rows: &[ReportRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<13} {:<18} {:<6} {:<6} {:>6} {:>3} {:>5} {:>10} {:>7} {:>10} {:>6}",
        "arch", "model", "cell", "slice", "target", "h", "fold", "sla_loss", "sla%", "overprov", "w"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<13} {:<18} {:<6} {:<6} {:>6.3} {:>3} {:>5} {:>10.4} {:>7.2} {:>10.4} {:>5}{}",
            r.arch,
            r.model_kind,
            r.cell.to_string(),
            r.slice.as_str(),
            r.sla_target,
            r.horizon,
            r.fold,
            r.sla_loss,
            100.0 * r.violation_rate,
            r.overprov_volume,
            r.weight_w,
            if r.flag_unmet { "*" } else { " " }
        );
    }
    s
}

impl ExperimentOutput {
    pub fn summary(&self) -> String {
        summary_table(&self.rows)
    }
}
