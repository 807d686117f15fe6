use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::TelemetryError;

pub const HOURS_PER_WEEK: usize = 168;

/// One rotation of the train/validation split over hourly indices.
///
/// The pre-test span is cut into equal segments; one of them is held out for
/// validation and the others train. Training can therefore be two disjoint
/// pieces (before and after the validation segment).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub fold: usize,
    pub train: Vec<Range<usize>>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

impl FoldSplit {
    pub fn train_hours(&self) -> usize {
        self.train.iter().map(|r| r.len()).sum()
    }

    pub fn train_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.train.iter().flat_map(|r| r.clone())
    }
}

/// Rolling folds: fold `i` validates on segment `i` and trains on the rest;
/// the final `test_weeks` are the test span of every fold.
pub fn split_folds(
    total_hours: usize,
    fold_count: usize,
    segment_weeks: usize,
    test_weeks: usize,
) -> Result<Vec<FoldSplit>, TelemetryError> {
    if fold_count == 0 || segment_weeks == 0 {
        return Err(TelemetryError::InconsistentDurations(
            "fold_count and segment_weeks must be positive".into(),
        ));
    }
    let expected = (fold_count * segment_weeks + test_weeks) * HOURS_PER_WEEK;
    if total_hours != expected {
        return Err(TelemetryError::InconsistentDurations(format!(
            "{total_hours} hours given, but {fold_count} folds x {segment_weeks} weeks + {test_weeks} test weeks \
             needs {expected}"
        )));
    }
    let seg = segment_weeks * HOURS_PER_WEEK;
    let pre_test = fold_count * seg;
    let test = pre_test..total_hours;
    Ok((0..fold_count)
        .map(|i| {
            let val = i * seg..(i + 1) * seg;
            let train = [0..val.start, val.end..pre_test].into_iter().filter(|r| !r.is_empty()).collect();
            FoldSplit { fold: i, train, val, test: test.clone() }
        })
        .collect())
}
