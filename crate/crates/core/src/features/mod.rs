//! Input feature families and windowed supervised datasets.
//!
//! Three families extend the traffic history: RAN counters strongly
//! correlated with traffic, calendar flags (peak hour of day, weekday), and
//! mobility aggregates over handover neighbors. Every statistic that shapes
//! the inputs (selected counters, peak hours, normalization) is computed from
//! the training range only.

mod calendar;
mod correlation;
mod dataset;
mod mobility;

pub use calendar::{day_of_week_flags, is_weekday, label_peak_hours, PEAK_RATIO};
pub use correlation::{candidate_labels, pearson_correlation, select_features, CORRELATION_THRESHOLD};
pub use dataset::{
    build_dataset, materialize, plan_features, Channel, DatasetBundle, FeatureOptions, FeaturePlan, FeatureSet,
    ModelKind, NormStat, SupervisedDataset,
};
pub use mobility::{mobility_aggregate, mobility_weights, Direction};

use thiserror::Error;

use crate::telemetry::{CellId, FeatureLabel, SliceKind};

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("no {direction} handover neighbors for {cell}")]
    NoNeighbors { cell: CellId, direction: Direction },
    #[error("neighbor {0} has no total series covering the requested hours")]
    MissingNeighborSeries(CellId),
    #[error("no series for {0}/{1}")]
    MissingSeries(CellId, SliceKind),
    #[error("series lacks counter {0}")]
    UnknownLabel(FeatureLabel),
    #[error("window of {window} hours leaves no samples in {hours} hours")]
    WindowTooLong { window: usize, hours: usize },
    #[error("series has gaps or unsorted rows; fix the data before building datasets")]
    NotHourly,
}
