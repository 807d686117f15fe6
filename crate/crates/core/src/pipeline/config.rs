use serde::{Deserialize, Serialize};

use crate::features::{FeatureOptions, ModelKind};
use crate::slaloss::LossSpec;
use crate::telemetry::{split_folds, CellId, FoldSplit, SliceKind, HOURS_PER_WEEK};

use super::PipelineError;

/// Weights tried by the line search, ascending from 1.
pub const DEFAULT_GRID: [f64; 13] = [1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0, 48.0, 64.0];

/// Forecasting setup: which series feed the model and which are predicted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ArchKind {
    /// Total traffic of one cell.
    SingleCell { cell: CellId },
    /// Total traffic of several cells, one input group and head each.
    MultiCell { cells: Vec<CellId> },
    /// One service slice of a cell.
    SingleSlice { cell: CellId, slice: SliceKind },
    /// Several service slices of one cell, one input group and head each.
    MultiSlice { cell: CellId, slices: Vec<SliceKind> },
}

impl ArchKind {
    pub fn name(&self) -> &'static str {
        match self {
            ArchKind::SingleCell { .. } => "single-cell",
            ArchKind::MultiCell { .. } => "multi-cell",
            ArchKind::SingleSlice { .. } => "single-slice",
            ArchKind::MultiSlice { .. } => "multi-slice",
        }
    }

    /// Series of each input group, in head order.
    pub fn groups(&self) -> Vec<(CellId, SliceKind)> {
        match self {
            ArchKind::SingleCell { cell } => vec![(cell.clone(), SliceKind::Total)],
            ArchKind::MultiCell { cells } => cells.iter().map(|c| (c.clone(), SliceKind::Total)).collect(),
            ArchKind::SingleSlice { cell, slice } => vec![(cell.clone(), *slice)],
            ArchKind::MultiSlice { cell, slices } => slices.iter().map(|s| (cell.clone(), *s)).collect(),
        }
    }

    pub fn is_multihead(&self) -> bool {
        matches!(self, ArchKind::MultiCell { .. } | ArchKind::MultiSlice { .. })
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let groups = self.groups();
        let bad = |m: &str| Err(PipelineError::InvalidConfig(format!("{}: {m}", self.name())));
        match self {
            ArchKind::MultiCell { cells } if cells.len() < 2 => return bad("needs at least two cells"),
            ArchKind::MultiSlice { slices, .. } if slices.len() < 2 => return bad("needs at least two slices"),
            ArchKind::MultiSlice { slices, .. } if slices.iter().any(|s| !s.is_service()) => {
                return bad("slices must be service slices")
            }
            ArchKind::SingleSlice { slice, .. } if !slice.is_service() => return bad("slice must be a service slice"),
            _ => {}
        }
        for (i, g) in groups.iter().enumerate() {
            if groups[..i].contains(g) {
                return bad("duplicate input group");
            }
        }
        Ok(())
    }
}

/// An architecture with a feature family and one SLA target per head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureSpec {
    pub arch: ArchKind,
    pub model_kind: ModelKind,
    /// Allowed violation rate of each head, in (0, 1).
    pub targets: Vec<f64>,
}

impl ArchitectureSpec {
    pub fn new(arch: ArchKind, model_kind: ModelKind, targets: Vec<f64>) -> Result<Self, PipelineError> {
        let spec = Self { arch, model_kind, targets };
        spec.validate()?;
        Ok(spec)
    }

    pub fn heads(&self) -> usize {
        self.arch.groups().len()
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.arch.validate()?;
        if self.targets.len() != self.heads() {
            return Err(PipelineError::InvalidConfig(format!(
                "{} SLA targets for {} heads",
                self.targets.len(),
                self.heads()
            )));
        }
        if let Some(t) = self.targets.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(PipelineError::InvalidConfig(format!("SLA target {t} outside (0, 1)")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoldSpec {
    pub fold_count: usize,
    pub segment_weeks: usize,
    pub test_weeks: usize,
    /// Run only these folds; all of them when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub only: Option<Vec<usize>>,
}

impl Default for FoldSpec {
    fn default() -> Self {
        Self { fold_count: 3, segment_weeks: 4, test_weeks: 4, only: None }
    }
}

impl FoldSpec {
    pub fn total_weeks(&self) -> usize {
        self.fold_count * self.segment_weeks + self.test_weeks
    }

    pub fn splits(&self, total_hours: usize) -> Result<Vec<FoldSplit>, PipelineError> {
        let all = split_folds(total_hours, self.fold_count, self.segment_weeks, self.test_weeks)
            .map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
        match &self.only {
            None => Ok(all),
            Some(only) => {
                if let Some(f) = only.iter().find(|f| **f >= self.fold_count) {
                    return Err(PipelineError::InvalidConfig(format!("fold {f} of {}", self.fold_count)));
                }
                Ok(all.into_iter().filter(|s| only.contains(&s.fold)).collect())
            }
        }
    }

    pub fn total_hours(&self) -> usize {
        self.total_weeks() * HOURS_PER_WEEK
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs_max: usize,
    pub patience: usize,
    pub batch: usize,
    pub lr: f64,
    pub window: usize,
    pub hidden: usize,
    #[serde(default)]
    pub folds: FoldSpec,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs_max: 30, patience: 5, batch: 32, lr: 1e-3, window: 24, hidden: 32, folds: FoldSpec::default(), seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::InvalidConfig(m));
        if self.window == 0 || self.hidden == 0 || self.batch == 0 {
            return bad("window, hidden and batch must be >= 1".into());
        }
        if self.epochs_max > 0 && self.patience >= self.epochs_max {
            return bad(format!("patience {} must be below epochs_max {}", self.patience, self.epochs_max));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.lr));
        }
        Ok(())
    }
}

/// SLA targets of one experiment row: one rate for every head, or one each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetSpec {
    Uniform(f64),
    PerHead(Vec<f64>),
}

impl TargetSpec {
    pub fn resolve(&self, heads: usize) -> Vec<f64> {
        match self {
            TargetSpec::Uniform(t) => vec![*t; heads],
            TargetSpec::PerHead(v) => v.clone(),
        }
    }
}

/// Everything `run_experiment` iterates over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub architectures: Vec<ArchKind>,
    pub model_kinds: Vec<ModelKind>,
    pub targets: Vec<TargetSpec>,
    /// Symmetric losses trained alongside, scored at the calibrated weights.
    #[serde(default)]
    pub baselines: Vec<LossSpec<f64>>,
    #[serde(default = "default_grid")]
    pub grid: Vec<f64>,
    #[serde(default = "default_horizons")]
    pub horizons: Vec<usize>,
    #[serde(default)]
    pub features: FeatureOptions,
    #[serde(default)]
    pub train: TrainConfig,
}

fn default_grid() -> Vec<f64> {
    DEFAULT_GRID.to_vec()
}

fn default_horizons() -> Vec<usize> {
    vec![1, 2, 4, 8, 24]
}

pub fn validate_grid(grid: &[f64]) -> Result<(), PipelineError> {
    if grid.is_empty() {
        return Err(PipelineError::EmptyGrid);
    }
    if grid[0] != 1.0 || grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(PipelineError::InvalidConfig("grid must start at 1 and increase strictly".into()));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.architectures.is_empty() || self.model_kinds.is_empty() || self.targets.is_empty() {
            return Err(PipelineError::InvalidConfig(
                "architectures, model_kinds and targets must be non-empty".into(),
            ));
        }
        for arch in &self.architectures {
            for t in &self.targets {
                ArchitectureSpec::new(arch.clone(), self.model_kinds[0], t.resolve(arch.groups().len()))?;
            }
        }
        if let Some(b) = self.baselines.iter().find(|b| b.is_sla_based()) {
            return Err(PipelineError::InvalidConfig(format!("baseline loss {} is the SLA loss", b.name())));
        }
        validate_grid(&self.grid)?;
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(PipelineError::HorizonZero);
        }
        self.train.validate()
    }
}
