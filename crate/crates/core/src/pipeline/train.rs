use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::{DatasetBundle, FeaturePlan, ModelKind, SupervisedDataset};
use crate::neuralnet::{backward, forward, init_params, optimizer_step, AdamConfig, ModelParams, NetConfig, NeuralError, OptState};
use crate::slaloss::LossSpec;
use crate::telemetry::SliceKind;

use super::config::{ArchKind, ArchitectureSpec, TrainConfig};
use super::PipelineError;

/// A fitted network together with everything needed to feed and score it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub arch: ArchKind,
    pub model_kind: ModelKind,
    pub params: ModelParams<f64>,
    /// Channel composition, normalization and peak hours of each input group.
    pub plans: Vec<FeaturePlan>,
    /// Loss each head was trained with.
    pub losses: Vec<LossSpec<f64>>,
    /// Weight used to score each head's SLA-based loss.
    pub weights: Vec<f64>,
    /// SLA target each head was calibrated for, if any.
    pub targets: Vec<Option<f64>>,
    /// Heads whose target was not reached on validation within the grid.
    pub unmet: Vec<bool>,
    pub fold: usize,
    /// Series hours the fold holds out for testing.
    pub test_range: Range<usize>,
    pub window: usize,
    pub epochs_run: usize,
    pub best_val_loss: f64,
}

impl TrainedModel {
    pub fn heads(&self) -> usize {
        self.plans.len()
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let k = self.heads();
        let cfg = &self.params.config;
        let ok = k > 0
            && cfg.heads == k
            && cfg.groups() == k
            && cfg.window == self.window
            && self.plans.iter().zip(&cfg.input_channels).all(|(p, c)| p.features.len() == *c)
            && [self.losses.len(), self.weights.len(), self.targets.len(), self.unmet.len()].iter().all(|n| *n == k)
            && self.weights.iter().all(|w| *w >= 1.0)
            && self.arch.groups().len() == k;
        if ok {
            Ok(())
        } else {
            Err(PipelineError::InvalidConfig("model parts have inconsistent shapes".into()))
        }
    }
}

/// Row-major `samples x heads` predictions in normalized units.
pub(crate) fn predict_normalized(params: &ModelParams<f64>, sets: &[&SupervisedDataset]) -> Result<Vec<f64>, PipelineError> {
    const CHUNK: usize = 512;
    let n = sets[0].len();
    let mut out = Vec::with_capacity(n * params.config.heads);
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        let inputs: Vec<&[f64]> = sets
            .iter()
            .map(|d| {
                let stride = d.window * d.channels;
                &d.inputs[start * stride..end * stride]
            })
            .collect();
        let (pred, _) = forward(params, &inputs)?;
        out.extend(pred);
        start = end;
    }
    Ok(out)
}

/// Mean over heads of each head's mean loss, in normalized units.
fn head_mean_loss(pred: &[f64], sets: &[&SupervisedDataset], losses: &[LossSpec<f64>]) -> f64 {
    let k = losses.len();
    let n = sets[0].len();
    let mut total = 0.0;
    for (g, loss) in losses.iter().enumerate() {
        let sum: f64 = (0..n).map(|i| loss.value(pred[i * k + g] - sets[g].targets[i])).sum();
        total += sum / n as f64;
    }
    total / k as f64
}

fn check_alignment(sets: &[&SupervisedDataset], window: usize) -> Result<(), PipelineError> {
    let first = sets[0];
    if first.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    for (g, d) in sets.iter().enumerate() {
        if d.window != window {
            return Err(PipelineError::MisalignedGroups(format!("group {g} has window {}, config {window}", d.window)));
        }
        if d.origin != first.origin || d.target_index != first.target_index {
            return Err(PipelineError::MisalignedGroups(format!("group {g} targets different hours than group 0")));
        }
    }
    Ok(())
}

fn fit(
    arch: ArchKind,
    bundles: &[&DatasetBundle],
    losses: &[LossSpec<f64>],
    config: &TrainConfig,
) -> Result<TrainedModel, PipelineError> {
    config.validate()?;
    let k = bundles.len();
    if losses.len() != k {
        return Err(PipelineError::InvalidConfig(format!("{} losses for {k} heads", losses.len())));
    }
    let kind = bundles[0].plan.kind;
    if bundles.iter().any(|b| b.plan.kind != kind || b.fold != bundles[0].fold) {
        return Err(PipelineError::MisalignedGroups("groups mix model kinds or folds".into()));
    }
    let train: Vec<&SupervisedDataset> = bundles.iter().map(|b| &b.train).collect();
    let val: Vec<&SupervisedDataset> = bundles.iter().map(|b| &b.val).collect();
    check_alignment(&train, config.window)?;
    check_alignment(&val, config.window)?;

    let net = NetConfig {
        input_channels: train.iter().map(|d| d.channels).collect(),
        hidden_units: config.hidden,
        window: config.window,
        heads: k,
        seed: config.seed,
    };
    let mut params = init_params::<f64>(&net)?;
    let mut opt = OptState::new(&params, AdamConfig::with_lr(config.lr));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));

    let n = train[0].len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut best = params.clone();
    let mut best_val = head_mean_loss(&predict_normalized(&params, &val)?, &val, losses);
    let mut stale = 0;
    let mut epochs_run = 0;
    let mut buffers: Vec<Vec<f64>> = vec![Vec::new(); k];
    let mut dpred = Vec::new();

    for epoch in 0..config.epochs_max {
        epochs_run = epoch + 1;
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch) {
            for (buf, d) in buffers.iter_mut().zip(&train) {
                buf.clear();
                for &i in batch {
                    buf.extend_from_slice(d.sample(i));
                }
            }
            let inputs: Vec<&[f64]> = buffers.iter().map(|b| b.as_slice()).collect();
            let (pred, cache) = forward(&params, &inputs)?;
            let scale = 1.0 / (batch.len() * k) as f64;
            dpred.clear();
            for (b, &i) in batch.iter().enumerate() {
                for (g, loss) in losses.iter().enumerate() {
                    let e = pred[b * k + g] - train[g].targets[i];
                    if !e.is_finite() {
                        return Err(PipelineError::NonFiniteLoss { epoch });
                    }
                    dpred.push(loss.grad(e) * scale);
                }
            }
            let grads = backward(&params, &cache, &dpred)?;
            optimizer_step(&mut params, &grads, &mut opt).map_err(|e| match e {
                NeuralError::NonFiniteGradient => PipelineError::NonFiniteLoss { epoch },
                other => other.into(),
            })?;
        }
        let v = head_mean_loss(&predict_normalized(&params, &val)?, &val, losses);
        if !v.is_finite() {
            return Err(PipelineError::NonFiniteLoss { epoch });
        }
        if v < best_val {
            best_val = v;
            best = params.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }

    let weights = losses.iter().map(|l| if let LossSpec::Wmae { w } = l { *w } else { 1.0 }).collect();
    Ok(TrainedModel {
        arch,
        model_kind: kind,
        params: best,
        plans: bundles.iter().map(|b| b.plan.clone()).collect(),
        losses: losses.to_vec(),
        weights,
        targets: vec![None; k],
        unmet: vec![false; k],
        fold: bundles[0].fold,
        test_range: bundles[0].test.ranges.first().cloned().unwrap_or(0..0),
        window: config.window,
        epochs_run,
        best_val_loss: best_val,
    })
}

/// Trains a one-group, one-head model on a single series.
pub fn train_single(bundle: &DatasetBundle, loss: LossSpec<f64>, config: &TrainConfig) -> Result<TrainedModel, PipelineError> {
    let plan = &bundle.plan;
    let arch = match plan.slice {
        SliceKind::Total => ArchKind::SingleCell { cell: plan.cell.clone() },
        s => ArchKind::SingleSlice { cell: plan.cell.clone(), slice: s },
    };
    fit(arch, &[bundle], &[loss], config)
}

/// Trains one LSTM per group with a head per group over the joined hidden
/// states. `losses[g]` is the loss of head `g`.
pub fn train_multihead(
    groups: &[DatasetBundle],
    spec: &ArchitectureSpec,
    losses: &[LossSpec<f64>],
    config: &TrainConfig,
) -> Result<TrainedModel, PipelineError> {
    if groups.len() < 2 {
        return Err(PipelineError::MisalignedGroups(format!(
            "{} group(s) given; a multi-head model needs two or more",
            groups.len()
        )));
    }
    spec.validate()?;
    let expected = spec.arch.groups();
    let got: Vec<_> = groups.iter().map(|b| (b.plan.cell.clone(), b.plan.slice)).collect();
    if expected != got {
        return Err(PipelineError::MisalignedGroups("bundles do not follow the architecture's group order".into()));
    }
    let refs: Vec<&DatasetBundle> = groups.iter().collect();
    fit(spec.arch.clone(), &refs, losses, config)
}

/// Trains any architecture; single-group specs go through [`train_single`].
pub fn train_arch(
    groups: &[DatasetBundle],
    spec: &ArchitectureSpec,
    losses: &[LossSpec<f64>],
    config: &TrainConfig,
) -> Result<TrainedModel, PipelineError> {
    if spec.arch.is_multihead() {
        train_multihead(groups, spec, losses, config)
    } else {
        match (groups, losses) {
            ([bundle], [loss]) => train_single(bundle, *loss, config),
            _ => Err(PipelineError::MisalignedGroups("single-group architecture needs one bundle and one loss".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{materialize, plan_features, FeatureOptions};
    use crate::telemetry::{CellId, CellSeries, FeatureLabel, FoldSplit, HandoverMatrix, TelemetryStore};
    use std::collections::BTreeMap;

    fn store(values: Vec<f64>) -> TelemetryStore {
        let mut store = TelemetryStore::new(HandoverMatrix::new());
        store
            .insert(CellSeries::hourly(
                CellId::new("A", 1).unwrap(),
                SliceKind::Total,
                "2023-01-02T00:00:00Z".parse().unwrap(),
                BTreeMap::from([(FeatureLabel::F0, values)]),
            ))
            .unwrap();
        store
    }

    fn bundle(store: &TelemetryStore, window: usize) -> DatasetBundle {
        let n = store.series().next().unwrap().len();
        let split = FoldSplit { fold: 0, train: vec![0..n / 2], val: n / 2..3 * n / 4, test: 3 * n / 4..n };
        let cell = CellId::new("A", 1).unwrap();
        let plan = plan_features(store, &cell, SliceKind::Total, ModelKind::Univariate, &split.train, &FeatureOptions::default())
            .unwrap();
        DatasetBundle {
            fold: 0,
            train: materialize(store, &plan, &split.train, window).unwrap(),
            val: materialize(store, &plan, &[split.val.clone()], window).unwrap(),
            test: materialize(store, &plan, &[split.test.clone()], window).unwrap(),
            plan,
        }
    }

    fn quick(epochs: usize) -> TrainConfig {
        TrainConfig { epochs_max: epochs, patience: 3.min(epochs.saturating_sub(1)), batch: 16, lr: 1e-2, window: 6, hidden: 4, ..Default::default() }
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let s = store((0..200).map(|h| (h % 24) as f64).collect());
        let b = bundle(&s, 6);
        let m = train_single(&b, LossSpec::Mae, &quick(0)).unwrap();
        let cfg = NetConfig::single(1, 4, 6, 0);
        assert_eq!(m.params, init_params::<f64>(&cfg).unwrap());
        assert_eq!(m.epochs_run, 0);
    }

    #[test]
    fn deterministic() {
        let s = store((0..200).map(|h| ((h % 24) as f64).sin() * 10.0 + 20.0).collect());
        let b = bundle(&s, 6);
        let a = train_single(&b, LossSpec::Wmae { w: 2.0 }, &quick(4)).unwrap();
        let c = train_single(&b, LossSpec::Wmae { w: 2.0 }, &quick(4)).unwrap();
        assert_eq!(a, c);
        assert_eq!(a.weights, vec![2.0]);
    }

    #[test]
    fn training_reduces_loss() {
        let s = store((0..400).map(|h| ((h % 24) as f64 / 24.0 * std::f64::consts::TAU).sin() * 10.0 + 20.0).collect());
        let b = bundle(&s, 6);
        let untrained = train_single(&b, LossSpec::Mae, &quick(0)).unwrap();
        let trained = train_single(&b, LossSpec::Mae, &quick(15)).unwrap();
        assert!(trained.best_val_loss < 0.5 * untrained.best_val_loss, "{} vs {}", trained.best_val_loss, untrained.best_val_loss);
    }

    #[test]
    fn multihead_requires_two_groups() {
        let s = store((0..200).map(|h| h as f64).collect());
        let b = bundle(&s, 6);
        let spec = ArchitectureSpec::new(
            ArchKind::SingleCell { cell: CellId::new("A", 1).unwrap() },
            ModelKind::Univariate,
            vec![0.05],
        )
        .unwrap();
        assert!(matches!(
            train_multihead(&[b], &spec, &[LossSpec::Mae], &quick(1)),
            Err(PipelineError::MisalignedGroups(_))
        ));
    }
}
