//! Training, SLA weight calibration, multi-step evaluation and reporting.

mod calibrate;
mod checkpoint;
mod config;
mod evaluate;
mod experiment;
mod train;

pub use calibrate::{weight_line_search, Calibration, LineSearch};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use config::{
    validate_grid, ArchKind, ArchitectureSpec, ExperimentConfig, FoldSpec, TargetSpec, TrainConfig, DEFAULT_GRID,
};
pub use evaluate::{
    aggregate_folds, evaluate, evaluate_predictions, predict_multi_step, test_datasets, EvalReport, EvalRow,
};
pub use experiment::{
    build_bundles, run_experiment, summary_table, write_report_csv, ExperimentOutput, ModelRecord, ReportRow, REPORT_HEADER,
};
pub use train::{train_arch, train_multihead, train_single, TrainedModel};

use thiserror::Error;

use crate::features::FeatureError;
use crate::neuralnet::NeuralError;
use crate::slaloss::LossError;

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("loss diverged in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("misaligned input groups: {0}")]
    MisalignedGroups(String),
    #[error("empty weight grid")]
    EmptyGrid,
    #[error("horizons must be >= 1")]
    HorizonZero,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Loss(#[from] LossError),
}
