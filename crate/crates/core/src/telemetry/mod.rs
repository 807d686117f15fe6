//! Hourly RAN telemetry: data model, CSV ingestion and fold construction.

mod csvio;
mod folds;
mod types;
mod validate;

pub use csvio::{
    load_telemetry, read_handovers, read_telemetry, write_handovers, write_telemetry, HANDOVER_HEADER,
};
pub use folds::{split_folds, FoldSplit, HOURS_PER_WEEK};
pub use types::{CellId, CellSeries, FeatureLabel, HandoverMatrix, SeriesKey, SliceKind, TelemetryStore};
pub use validate::{validate_series, validate_store, Gap, ValidationReport};

use chrono::{DateTime, Utc};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("unexpected header: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("duplicate timestamp {timestamp} for {cell}/{slice}")]
    DuplicateTimestamp { cell: CellId, slice: SliceKind, timestamp: DateTime<Utc> },
    #[error("line {line}: {slice} row carries {label}, which is not measured per slice")]
    MixedSliceSchema { line: u64, slice: SliceKind, label: FeatureLabel },
    #[error("invalid handover edge {src} -> {dst}: {reason}")]
    InvalidHandover { src: CellId, dst: CellId, reason: String },
    #[error("inconsistent durations: {0}")]
    InconsistentDurations(String),
    #[error("invalid identifier `{0}`")]
    InvalidId(String),
}
