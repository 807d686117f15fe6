use serde::Serialize;

use super::types::{CellId, CellSeries, SliceKind, TelemetryStore};

/// A jump in the hourly sequence: the row at `index` comes
/// `missing_hours + 1` hours after its predecessor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Gap {
    pub index: usize,
    pub missing_hours: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub cell: CellId,
    pub slice: SliceKind,
    pub length: usize,
    pub gaps: Vec<Gap>,
    /// Indices where F0 is negative.
    pub negatives: Vec<usize>,
    /// Indices whose timestamp does not advance (unsorted or repeated rows).
    pub out_of_order: Vec<usize>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.gaps.is_empty() && self.negatives.is_empty() && self.out_of_order.is_empty()
    }
}

pub fn validate_series(series: &CellSeries) -> ValidationReport {
    let mut gaps = Vec::new();
    let mut out_of_order = Vec::new();
    for (i, pair) in series.timestamps.windows(2).enumerate() {
        let step = (pair[1] - pair[0]).num_hours();
        if step > 1 {
            gaps.push(Gap { index: i + 1, missing_hours: step - 1 });
        } else if step < 1 {
            out_of_order.push(i + 1);
        }
    }
    let negatives = series
        .f0()
        .iter()
        .enumerate()
        .filter(|(_, v)| **v < 0.0)
        .map(|(i, _)| i)
        .collect();
    ValidationReport {
        cell: series.cell.clone(),
        slice: series.slice,
        length: series.len(),
        gaps,
        negatives,
        out_of_order,
    }
}

/// Reports for every series that is not clean.
pub fn validate_store(store: &TelemetryStore) -> Vec<ValidationReport> {
    store.series().map(validate_series).filter(|r| !r.is_clean()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::FeatureLabel;
    use chrono::{DateTime, Duration, Utc};
    use std::collections::BTreeMap;

    fn series(hours: &[i64], f0: Vec<f64>) -> CellSeries {
        let start: DateTime<Utc> = "2023-01-02T00:00:00Z".parse().unwrap();
        CellSeries {
            cell: CellId::new("A", 1).unwrap(),
            slice: SliceKind::Total,
            timestamps: hours.iter().map(|h| start + Duration::hours(*h)).collect(),
            features: BTreeMap::from([(FeatureLabel::F0, f0)]),
        }
    }

    #[test]
    fn clean_series() {
        let r = validate_series(&series(&[0, 1, 2, 3], vec![1.0; 4]));
        assert!(r.is_clean());
        assert_eq!(r.length, 4);
    }

    #[test]
    fn missing_hour_five() {
        let hours: Vec<i64> = (0..10).filter(|h| *h != 5).collect();
        let r = validate_series(&series(&hours, vec![1.0; 9]));
        assert_eq!(r.gaps, vec![Gap { index: 5, missing_hours: 1 }]);
        assert!(r.negatives.is_empty());
    }

    #[test]
    fn negative_value_flagged() {
        let r = validate_series(&series(&[0, 1, 2], vec![1.0, -1.0, 2.0]));
        assert_eq!(r.negatives, vec![1]);
        assert!(r.gaps.is_empty());
    }
}
