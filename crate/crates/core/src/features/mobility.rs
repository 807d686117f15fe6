use std::fmt;
use std::ops::Range;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::telemetry::{CellId, SliceKind, TelemetryStore};

use super::FeatureError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Neighbors that hand users over into the target.
    Incoming,
    /// Neighbors the target hands users over to.
    Outgoing,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Incoming => "incoming",
            Direction::Outgoing => "outgoing",
        })
    }
}

/// Handover neighbors of `target` in one direction, with weights normalized
/// to sum to one over the listed edges.
pub fn mobility_weights(
    store: &TelemetryStore,
    target: &CellId,
    direction: Direction,
) -> Result<Vec<(CellId, f64)>, FeatureError> {
    let edges = match direction {
        Direction::Incoming => store.handovers.incoming(target),
        Direction::Outgoing => store.handovers.outgoing(target),
    };
    let total: f64 = edges.iter().map(|(_, r)| r).sum();
    if edges.is_empty() || total <= 0.0 {
        return Err(FeatureError::NoNeighbors { cell: target.clone(), direction });
    }
    Ok(edges.into_iter().map(|(c, r)| (c, r / total)).collect())
}

/// Rate-weighted mean of the neighbors' total F0 at each timestamp.
pub(crate) fn aggregate_at(
    store: &TelemetryStore,
    target: &CellId,
    direction: Direction,
    timestamps: &[DateTime<Utc>],
) -> Result<Vec<f64>, FeatureError> {
    let weights = mobility_weights(store, target, direction)?;
    let mut out = vec![0.0; timestamps.len()];
    for (neighbor, w) in &weights {
        let series = store
            .get(neighbor, SliceKind::Total)
            .ok_or_else(|| FeatureError::MissingNeighborSeries(neighbor.clone()))?;
        let f0 = series.f0();
        for (o, ts) in out.iter_mut().zip(timestamps) {
            let i = series.hour_index(*ts).ok_or_else(|| FeatureError::MissingNeighborSeries(neighbor.clone()))?;
            debug_assert_eq!(series.timestamps[i], *ts);
            *o += w * f0[i];
        }
    }
    Ok(out)
}

/// Weighted average of neighbor traffic for the hours `range` of the
/// target's total series.
pub fn mobility_aggregate(
    store: &TelemetryStore,
    target: &CellId,
    direction: Direction,
    range: Range<usize>,
) -> Result<Vec<f64>, FeatureError> {
    let reference = store
        .get(target, SliceKind::Total)
        .ok_or_else(|| FeatureError::MissingSeries(target.clone(), SliceKind::Total))?;
    if range.end > reference.len() {
        return Err(FeatureError::DegenerateInput(format!("range {range:?} beyond series end")));
    }
    aggregate_at(store, target, direction, &reference.timestamps[range])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::{CellSeries, FeatureLabel, HandoverMatrix};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn id(b: &str, i: u32) -> CellId {
        CellId::new(b, i).unwrap()
    }

    fn store_with(edges: &[(CellId, CellId, f64)], values: &[(CellId, Vec<f64>)]) -> TelemetryStore {
        let mut m = HandoverMatrix::new();
        for (s, d, r) in edges {
            m.insert(s.clone(), d.clone(), *r).unwrap();
        }
        let mut store = TelemetryStore::new(m);
        let start = "2023-01-02T00:00:00Z".parse().unwrap();
        for (c, v) in values {
            store
                .insert(CellSeries::hourly(c.clone(), SliceKind::Total, start, BTreeMap::from([(FeatureLabel::F0, v.clone())])))
                .unwrap();
        }
        store
    }

    #[test]
    fn single_neighbor_passes_through() {
        let store = store_with(&[(id("B", 1), id("A", 1), 3.3)], &[(id("A", 1), vec![0.0; 4]), (id("B", 1), vec![1.0, 2.0, 3.0, 4.0])]);
        assert_eq!(mobility_aggregate(&store, &id("A", 1), Direction::Incoming, 0..4).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(mobility_aggregate(&store, &id("A", 1), Direction::Incoming, 1..3).unwrap(), vec![2.0, 3.0]);
    }

    #[test]
    fn two_neighbor_weighted_mean() {
        let store = store_with(
            &[(id("B", 1), id("A", 1), 10.0), (id("C", 1), id("A", 1), 30.0)],
            &[(id("A", 1), vec![0.0]), (id("B", 1), vec![1.0]), (id("C", 1), vec![5.0])],
        );
        assert_eq!(mobility_aggregate(&store, &id("A", 1), Direction::Incoming, 0..1).unwrap(), vec![4.0]);
    }

    #[test]
    fn table_of_incoming_rates() {
        // incoming neighbors of F-4 and their handover rates
        let rates = [
            (id("N", 2), 18.34),
            (id("F", 3), 17.72),
            (id("F", 2), 9.84),
            (id("M", 3), 7.49),
            (id("F", 1), 5.51),
            (id("F", 12), 4.88),
            (id("G", 3), 4.68),
            (id("J", 1), 4.32),
            (id("O", 5), 4.23),
        ];
        let f4 = id("F", 4);
        let edges: Vec<_> = rates.iter().map(|(c, r)| (c.clone(), f4.clone(), *r)).collect();
        let mut values: Vec<(CellId, Vec<f64>)> =
            rates.iter().enumerate().map(|(i, (c, _))| (c.clone(), vec![10.0 * (i + 1) as f64, 7.0])).collect();
        values.push((f4.clone(), vec![0.0, 0.0]));
        let store = store_with(&edges, &values);

        // direct weighted-sum oracle
        let wsum: f64 = rates.iter().map(|(_, r)| r).sum();
        let expected: f64 = rates.iter().enumerate().map(|(i, (_, r))| r * 10.0 * (i + 1) as f64).sum::<f64>() / wsum;
        let got = mobility_aggregate(&store, &f4, Direction::Incoming, 0..2).unwrap();
        assert!((got[0] - expected).abs() < 1e-12);
        assert!((got[1] - 7.0).abs() < 1e-12);
        assert!((wsum - 77.01).abs() < 1e-9);
    }

    #[test]
    fn errors() {
        let store = store_with(&[(id("B", 1), id("A", 1), 10.0)], &[(id("A", 1), vec![0.0])]);
        assert_eq!(
            mobility_aggregate(&store, &id("A", 1), Direction::Outgoing, 0..1),
            Err(FeatureError::NoNeighbors { cell: id("A", 1), direction: Direction::Outgoing })
        );
        assert_eq!(
            mobility_aggregate(&store, &id("A", 1), Direction::Incoming, 0..1),
            Err(FeatureError::MissingNeighborSeries(id("B", 1)))
        );
    }

    proptest! {
        #[test]
        fn invariant_to_uniform_weight_scaling(r1 in 0.1f64..50.0, r2 in 0.1f64..50.0, k in 0.01f64..2.0,
                                               v1 in 0.0f64..1e3, v2 in 0.0f64..1e3) {
            let vals = [(id("A", 1), vec![0.0]), (id("B", 1), vec![v1]), (id("C", 1), vec![v2])];
            let a = store_with(&[(id("B", 1), id("A", 1), r1), (id("C", 1), id("A", 1), r2)], &vals);
            let b = store_with(&[(id("B", 1), id("A", 1), r1 * k), (id("C", 1), id("A", 1), r2 * k)], &vals);
            let x = mobility_aggregate(&a, &id("A", 1), Direction::Incoming, 0..1).unwrap()[0];
            let y = mobility_aggregate(&b, &id("A", 1), Direction::Incoming, 0..1).unwrap()[0];
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
        }
    }
}
