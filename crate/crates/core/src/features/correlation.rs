use std::ops::Range;

use crate::telemetry::{CellId, CellSeries, FeatureLabel, SliceKind, TelemetryStore};

use super::FeatureError;

pub const CORRELATION_THRESHOLD: f64 = 0.90;

/// Pearson correlation coefficient of two equal-length sequences.
pub fn pearson_correlation(x: &[f64], y: &[f64]) -> Result<f64, FeatureError> {
    if x.len() != y.len() {
        return Err(FeatureError::DegenerateInput(format!("lengths differ: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(FeatureError::DegenerateInput("need at least two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(FeatureError::DegenerateInput("constant sequence".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Counters eligible for selection: all auxiliary counters for total
/// traffic, only the two active-user counters for a service slice.
pub fn candidate_labels(series: &CellSeries) -> Vec<FeatureLabel> {
    series
        .features
        .keys()
        .copied()
        .filter(|l| *l != FeatureLabel::F0)
        .filter(|l| !series.slice.is_service() || l.available_per_slice())
        .collect()
}

pub(crate) fn gather(values: &[f64], ranges: &[Range<usize>]) -> Vec<f64> {
    ranges.iter().flat_map(|r| values[r.clone()].iter().copied()).collect()
}

/// Counters whose correlation with F0 over the training hours reaches
/// `threshold`, in label order, with their coefficients.
pub fn select_features(
    store: &TelemetryStore,
    cell: &CellId,
    slice: SliceKind,
    threshold: f64,
    train: &[Range<usize>],
) -> Result<Vec<(FeatureLabel, f64)>, FeatureError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(FeatureError::DegenerateInput(format!("threshold {threshold} outside (0, 1]")));
    }
    let series = store.get(cell, slice).ok_or_else(|| FeatureError::MissingSeries(cell.clone(), slice))?;
    let f0 = gather(series.f0(), train);
    let mut selected = Vec::new();
    for label in candidate_labels(series) {
        let values = gather(series.feature(label).expect("candidate present"), train);
        match pearson_correlation(&values, &f0) {
            Ok(r) if r >= threshold => selected.push((label, r)),
            Ok(_) => {}
            // a constant counter carries no signal; skip it
            Err(FeatureError::DegenerateInput(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(selected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Textbook two-pass formula, kept separate from the implementation.
    fn oracle(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let sx: f64 = x.iter().sum();
        let sy: f64 = y.iter().sum();
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        let sxx: f64 = x.iter().map(|a| a * a).sum();
        let syy: f64 = y.iter().map(|b| b * b).sum();
        (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
    }

    #[test]
    fn reference_values() {
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
        assert!(close(pearson_correlation(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0));
        assert!(close(pearson_correlation(&[1.0, 2.0, 3.0], &[-1.0, -2.0, -3.0]).unwrap(), -1.0));
        // 6.5 / sqrt(5 * 8.75) = 0.98270762...
        let r = pearson_correlation(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 5.0]).unwrap();
        assert!((r - 0.982_707_629_6).abs() < 1e-9, "{r}");
        assert!((r - oracle(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 5.0])).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(pearson_correlation(&[1.0], &[1.0]), Err(FeatureError::DegenerateInput(_))));
        assert!(matches!(pearson_correlation(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(FeatureError::DegenerateInput(_))));
        assert!(pearson_correlation(&[1.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(pairs in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..50)) {
            let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            if let Ok(r) = pearson_correlation(&x, &y) {
                prop_assert!((-1.0..=1.0).contains(&r));
                prop_assert_eq!(r, pearson_correlation(&y, &x).unwrap());
                let o = oracle(&x, &y);
                if o.is_finite() {
                    prop_assert!((r - o).abs() < 1e-6);
                }
            }
        }
    }
}
