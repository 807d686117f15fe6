use std::collections::BTreeMap;

use crate::features::{DatasetBundle, SupervisedDataset};
use crate::slaloss::LossSpec;

use super::config::{validate_grid, ArchKind, ArchitectureSpec, TrainConfig};
use super::train::{predict_normalized, train_arch, TrainedModel};
use super::PipelineError;

/// Outcome of calibrating every head's loss weight against its SLA target.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub weights: Vec<f64>,
    pub grid_index: Vec<usize>,
    /// Validation violation rate of each head at the chosen weights.
    pub val_rates: Vec<f64>,
    pub unmet: Vec<bool>,
    /// The model trained with exactly the chosen weights.
    pub model: TrainedModel,
}

/// Weight search over a fixed grid. Models are cached by grid position, so
/// several targets calibrated on the same data share their training runs.
pub struct LineSearch<'a> {
    groups: &'a [DatasetBundle],
    spec: ArchitectureSpec,
    config: TrainConfig,
    grid: Vec<f64>,
    cache: BTreeMap<Vec<usize>, (TrainedModel, Vec<f64>)>,
}

fn val_rates(model: &TrainedModel, groups: &[DatasetBundle]) -> Result<Vec<f64>, PipelineError> {
    let val: Vec<&SupervisedDataset> = groups.iter().map(|b| &b.val).collect();
    let pred = predict_normalized(&model.params, &val)?;
    let k = groups.len();
    let n = val[0].len();
    Ok((0..k)
        .map(|g| (0..n).filter(|&i| pred[i * k + g] - val[g].targets[i] < 0.0).count() as f64 / n as f64)
        .collect())
}

impl<'a> LineSearch<'a> {
    pub fn new(groups: &'a [DatasetBundle], arch: ArchKind, config: &TrainConfig, grid: &[f64]) -> Result<Self, PipelineError> {
        validate_grid(grid)?;
        config.validate()?;
        if groups.is_empty() {
            return Err(PipelineError::EmptyDataset);
        }
        let k = groups.len();
        let spec = ArchitectureSpec::new(arch, groups[0].plan.kind, vec![0.5; k])?;
        Ok(Self { groups, spec, config: config.clone(), grid: grid.to_vec(), cache: BTreeMap::new() })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Number of distinct models trained so far.
    pub fn trained(&self) -> usize {
        self.cache.len()
    }

    /// Model trained with grid weights `index[g]` for head `g`, and its
    /// validation violation rates.
    pub fn model_at(&mut self, index: &[usize]) -> Result<(&TrainedModel, &[f64]), PipelineError> {
        if index.len() != self.groups.len() || index.iter().any(|&i| i >= self.grid.len()) {
            return Err(PipelineError::InvalidConfig(format!("grid position {index:?} out of range")));
        }
        if !self.cache.contains_key(index) {
            let losses: Vec<LossSpec<f64>> = index.iter().map(|&i| LossSpec::Wmae { w: self.grid[i] }).collect();
            let model = train_arch(self.groups, &self.spec, &losses, &self.config)?;
            let rates = val_rates(&model, self.groups)?;
            self.cache.insert(index.to_vec(), (model, rates));
        }
        let (m, r) = &self.cache[index];
        Ok((m, r))
    }

    /// Starting grid position for a target. A single head starts at w = 1.
    /// Heads of a multi-head model start at the largest grid weight whose
    /// ideal quantile, 1 / (1 + w), still exceeds the target.
    fn start(&self, target: f64) -> usize {
        if self.groups.len() == 1 {
            return 0;
        }
        let bound = (1.0 - target) / target;
        self.grid.iter().rposition(|&w| w < bound).unwrap_or(0)
    }

    /// Raises each head's weight one grid step at a time while its
    /// validation violation rate is above its target. With one head this is
    /// an ascending scan returning the smallest qualifying weight.
    pub fn calibrate(&mut self, targets: &[f64]) -> Result<Calibration, PipelineError> {
        if targets.len() != self.groups.len() {
            return Err(PipelineError::InvalidConfig(format!("{} targets for {} heads", targets.len(), self.groups.len())));
        }
        let top = self.grid.len() - 1;
        let mut index: Vec<usize> = targets.iter().map(|&t| self.start(t)).collect();
        loop {
            let rates = self.model_at(&index)?.1.to_vec();
            let mut moved = false;
            for g in 0..index.len() {
                if rates[g] > targets[g] && index[g] < top {
                    index[g] += 1;
                    moved = true;
                }
            }
            if !moved {
                let weights = index.iter().map(|&i| self.grid[i]).collect();
                let (model, rates) = self.model_at(&index)?;
                let unmet: Vec<bool> = rates.iter().zip(targets).map(|(r, t)| r > t).collect();
                let mut model = model.clone();
                model.targets = targets.iter().map(|t| Some(*t)).collect();
                model.unmet = unmet.clone();
                return Ok(Calibration {
                    weights,
                    grid_index: index,
                    val_rates: rates.to_vec(),
                    unmet,
                    model,
                });
            }
        }
    }
}

/// Smallest grid weight whose validation violation rate meets `target`,
/// or the largest weight with the unmet flag set.
pub fn weight_line_search(
    bundle: &DatasetBundle,
    target: f64,
    config: &TrainConfig,
    grid: &[f64],
) -> Result<Calibration, PipelineError> {
    let arch = match bundle.plan.slice {
        crate::telemetry::SliceKind::Total => ArchKind::SingleCell { cell: bundle.plan.cell.clone() },
        s => ArchKind::SingleSlice { cell: bundle.plan.cell.clone(), slice: s },
    };
    LineSearch::new(std::slice::from_ref(bundle), arch, config, grid)?.calibrate(&[target])
}
