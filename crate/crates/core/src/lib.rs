//! SLA-constrained traffic forecasting for cells and network slices.
//!
//! Hourly telemetry goes in ([`telemetry`], or synthetic data from
//! [`synthgen`]), windowed feature sets come out of [`features`], and
//! single-layer LSTMs ([`neuralnet`]) are trained with a weighted absolute
//! loss ([`slaloss`]) whose underprovisioning weight is calibrated until
//! the SLA violation rate on validation data meets a target ([`pipeline`]).
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which the training pipeline uses.

pub mod cli;
pub mod features;
pub mod neuralnet;
pub mod pipeline;
pub mod scalar;
pub mod slaloss;
pub mod synthgen;
pub mod telemetry;

pub use scalar::Scalar;

pub type ModelParams = neuralnet::ModelParams<f64>;
pub type LstmParams = neuralnet::LstmParams<f64>;
pub type DenseHead = neuralnet::DenseHead<f64>;
pub type ForwardCache = neuralnet::ForwardCache<f64>;
pub type OptState = neuralnet::OptState<f64>;
pub type LossSpec = slaloss::LossSpec<f64>;

pub use features::{DatasetBundle, FeatureSet, ModelKind, SupervisedDataset};
pub use pipeline::{ArchKind, ArchitectureSpec, EvalReport, ExperimentConfig, TrainConfig, TrainedModel};
pub use synthgen::{generate_scenario, ScenarioConfig};
pub use telemetry::{CellId, SliceKind, TelemetryStore};
