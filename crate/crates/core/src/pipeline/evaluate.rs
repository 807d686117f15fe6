use std::collections::BTreeMap;
use std::ops::Range;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::features::{materialize, Channel, SupervisedDataset};
use crate::neuralnet::forward;
use crate::slaloss::{overprovisioning_volume, sla_based_loss, sla_violation_rate};
use crate::telemetry::{CellId, SliceKind, TelemetryStore};

use super::train::TrainedModel;
use super::PipelineError;

/// Metrics of one head at one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub head: usize,
    pub cell: CellId,
    pub slice: SliceKind,
    pub horizon: usize,
    /// `None` for the mean over folds.
    pub fold: Option<usize>,
    pub sla_loss: f64,
    pub violation_rate: f64,
    pub overprov_volume: f64,
    pub samples: usize,
    pub weight_w: f64,
    pub flag_unmet: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn row(&self, head: usize, horizon: usize) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.head == head && r.horizon == horizon)
    }
}

/// SLA-based loss, violation rate and overprovisioning volume of
/// `predicted - actual`, both in physical units.
pub fn evaluate_predictions(predicted: &[f64], actual: &[f64], w: f64) -> Result<(f64, f64, f64), PipelineError> {
    if predicted.len() != actual.len() {
        return Err(PipelineError::InvalidConfig(format!("{} predictions for {} actuals", predicted.len(), actual.len())));
    }
    if predicted.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    let errors: Vec<f64> = predicted.iter().zip(actual).map(|(p, a)| p - a).collect();
    Ok((sla_based_loss(&errors, w)?, sla_violation_rate(&errors)?, overprovisioning_volume(&errors)?))
}

/// Recursive rollout of `batch` windows per group over `horizon` steps.
/// `time(b, j)` is the hour predicted by sample `b` at step `j`. Returns,
/// per step, normalized predictions as `batch x heads`.
fn rollout(
    model: &TrainedModel,
    mut windows: Vec<Vec<f64>>,
    batch: usize,
    horizon: usize,
    time: impl Fn(usize, usize) -> DateTime<Utc>,
) -> Result<Vec<Vec<f64>>, PipelineError> {
    const CHUNK: usize = 512;
    let k = model.heads();
    let u = model.window;
    let mut steps = Vec::with_capacity(horizon);
    for j in 0..horizon {
        let mut pred = Vec::with_capacity(batch * k);
        let mut start = 0;
        while start < batch {
            let end = (start + CHUNK).min(batch);
            let inputs: Vec<&[f64]> = windows
                .iter()
                .zip(&model.plans)
                .map(|(w, p)| {
                    let stride = u * p.features.len();
                    &w[start * stride..end * stride]
                })
                .collect();
            pred.extend(forward(&model.params, &inputs)?.0);
            start = end;
        }
        if j + 1 < horizon {
            for (g, (w, plan)) in windows.iter_mut().zip(&model.plans).enumerate() {
                let c = plan.features.len();
                let flags: Vec<(usize, Channel)> =
                    plan.features.channels().iter().copied().enumerate().filter(|(_, ch)| ch.is_flag()).collect();
                for b in 0..batch {
                    let win = &mut w[b * u * c..(b + 1) * u * c];
                    win.copy_within(c.., 0);
                    let row = &mut win[(u - 1) * c..];
                    // every other channel keeps its last observed value
                    row[0] = pred[b * k + g];
                    let ts = time(b, j);
                    for &(pos, ch) in &flags {
                        row[pos] = plan.norm[pos].apply(plan.flag_value(ch, ts));
                    }
                }
            }
        }
        steps.push(pred);
    }
    Ok(steps)
}

/// Predicts `horizon` hours ahead from one normalized window per group,
/// feeding each prediction back as the newest traffic value. `calendar[j]`
/// is the hour of step `j`. Returns physical-unit predictions per head.
pub fn predict_multi_step(
    model: &TrainedModel,
    seed_windows: &[&[f64]],
    horizon: usize,
    calendar: &[DateTime<Utc>],
) -> Result<Vec<Vec<f64>>, PipelineError> {
    if horizon == 0 {
        return Err(PipelineError::HorizonZero);
    }
    if calendar.len() < horizon {
        return Err(PipelineError::InvalidConfig(format!("{} calendar hours for horizon {horizon}", calendar.len())));
    }
    if seed_windows.len() != model.heads() {
        return Err(PipelineError::MisalignedGroups(format!("{} windows for {} groups", seed_windows.len(), model.heads())));
    }
    let steps = rollout(model, seed_windows.iter().map(|w| w.to_vec()).collect(), 1, horizon, |_, j| calendar[j])?;
    Ok((0..model.heads())
        .map(|g| steps.iter().map(|s| model.plans[g].f0_norm().invert(s[g])).collect())
        .collect())
}

/// Windows of `range` for every input group of `model`.
pub fn test_datasets(
    store: &TelemetryStore,
    model: &TrainedModel,
    range: Range<usize>,
) -> Result<Vec<SupervisedDataset>, PipelineError> {
    model
        .plans
        .iter()
        .map(|p| materialize(store, p, std::slice::from_ref(&range), model.window).map_err(Into::into))
        .collect()
}

/// Scores every test hour as a forecast origin, rolling forward to each
/// horizon. Horizon `h` uses the origins whose `h`-th hour is still in the
/// test data.
pub fn evaluate(model: &TrainedModel, test: &[SupervisedDataset], horizons: &[usize]) -> Result<EvalReport, PipelineError> {
    if horizons.is_empty() || horizons.contains(&0) {
        return Err(PipelineError::HorizonZero);
    }
    model.validate()?;
    if test.len() != model.heads() {
        return Err(PipelineError::MisalignedGroups(format!("{} test sets for {} groups", test.len(), model.heads())));
    }
    let n = test[0].len();
    if n == 0 {
        return Err(PipelineError::EmptyDataset);
    }
    if test.iter().any(|d| d.target_index != test[0].target_index || d.window != model.window) {
        return Err(PipelineError::MisalignedGroups("test sets disagree on hours or window".into()));
    }
    let k = model.heads();
    let max_h = *horizons.iter().max().expect("non-empty");
    let first = &test[0];
    let steps = rollout(model, test.iter().map(|d| d.inputs.clone()).collect(), n, max_h, |b, j| {
        first.target_time(b) + Duration::hours(j as i64)
    })?;
    let groups = model.arch.groups();
    let mut rows = Vec::new();
    for &h in horizons {
        let origins: Vec<usize> =
            (0..n).filter(|&b| b + h - 1 < n && first.target_index[b + h - 1] == first.target_index[b] + h - 1).collect();
        if origins.is_empty() {
            return Err(PipelineError::EmptyDataset);
        }
        for g in 0..k {
            let stat = model.plans[g].f0_norm();
            let pred: Vec<f64> = origins.iter().map(|&b| stat.invert(steps[h - 1][b * k + g])).collect();
            let actual: Vec<f64> = origins.iter().map(|&b| stat.invert(test[g].targets[b + h - 1])).collect();
            let (sla_loss, violation_rate, overprov_volume) = evaluate_predictions(&pred, &actual, model.weights[g])?;
            rows.push(EvalRow {
                head: g,
                cell: groups[g].0.clone(),
                slice: groups[g].1,
                horizon: h,
                fold: Some(model.fold),
                sla_loss,
                violation_rate,
                overprov_volume,
                samples: origins.len(),
                weight_w: model.weights[g],
                flag_unmet: model.unmet[g],
            });
        }
    }
    Ok(EvalReport { rows })
}

/// Arithmetic mean over folds of every metric, per head and horizon.
/// Sample counts are summed and the unmet flag is raised if any fold raised it.
pub fn aggregate_folds(reports: &[EvalReport]) -> EvalReport {
    let mut groups: BTreeMap<(usize, usize), Vec<&EvalRow>> = BTreeMap::new();
    for r in reports.iter().flat_map(|r| &r.rows) {
        groups.entry((r.head, r.horizon)).or_default().push(r);
    }
    let rows = groups
        .into_values()
        .map(|rs| {
            let m = rs.len() as f64;
            let mean = |f: fn(&EvalRow) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / m;
            EvalRow {
                head: rs[0].head,
                cell: rs[0].cell.clone(),
                slice: rs[0].slice,
                horizon: rs[0].horizon,
                fold: None,
                sla_loss: mean(|r| r.sla_loss),
                violation_rate: mean(|r| r.violation_rate),
                overprov_volume: mean(|r| r.overprov_volume),
                samples: rs.iter().map(|r| r.samples).sum(),
                weight_w: mean(|r| r.weight_w),
                flag_unmet: rs.iter().any(|r| r.flag_unmet),
            }
        })
        .collect();
    EvalReport { rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_predictions() {
        let actual = [3.0, 5.0, 8.0];
        assert_eq!(evaluate_predictions(&actual, &actual, 4.0).unwrap(), (0.0, 0.0, 0.0));
    }

    #[test]
    fn over_by_one() {
        let actual = [3.0, 5.0, 8.0];
        let pred: Vec<f64> = actual.iter().map(|a| a + 1.0).collect();
        for w in [1.0, 3.0, 17.0] {
            assert_eq!(evaluate_predictions(&pred, &actual, w).unwrap(), (1.0, 0.0, 1.0));
        }
    }

    #[test]
    fn under_by_one() {
        let actual = [3.0, 5.0, 8.0];
        let pred: Vec<f64> = actual.iter().map(|a| a - 1.0).collect();
        assert_eq!(evaluate_predictions(&pred, &actual, 3.0).unwrap(), (3.0, 1.0, 0.0));
    }

    #[test]
    fn empty_predictions() {
        assert_eq!(evaluate_predictions(&[], &[], 1.0), Err(PipelineError::EmptyDataset));
    }

    fn row(fold: usize, loss: f64, rate: f64) -> EvalRow {
        EvalRow {
            head: 0,
            cell: CellId::new("A", 1).unwrap(),
            slice: SliceKind::Total,
            horizon: 1,
            fold: Some(fold),
            sla_loss: loss,
            violation_rate: rate,
            overprov_volume: loss / 2.0,
            samples: 10,
            weight_w: 4.0,
            flag_unmet: fold == 1,
        }
    }

    #[test]
    fn fold_mean() {
        let reports: Vec<EvalReport> =
            [(0, 1.0, 0.1), (1, 2.0, 0.0), (2, 4.5, 0.05)].iter().map(|&(f, l, r)| EvalReport { rows: vec![row(f, l, r)] }).collect();
        let agg = aggregate_folds(&reports);
        assert_eq!(agg.rows.len(), 1);
        let r = &agg.rows[0];
        assert_eq!(r.sla_loss, (1.0 + 2.0 + 4.5) / 3.0);
        assert_eq!(r.violation_rate, (0.1 + 0.0 + 0.05) / 3.0);
        assert_eq!(r.samples, 30);
        assert!(r.flag_unmet);
        assert_eq!(r.fold, None);
    }
}
