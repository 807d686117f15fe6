//! Recurrent forecaster: one LSTM layer per input group, dense heads over
//! the concatenated final hidden states, reverse-mode gradients and Adam.
//!
//! A single-cell model is one group with one head. Multi-cell and
//! multi-slice models have one group and one head per cell or slice, every
//! head reading all groups' hidden states.

mod gradcheck;
mod lstm;
mod optim;
mod params;

pub use gradcheck::{grad_check, grad_check_with, GradCheckReport};
pub use lstm::{backward, forward, ForwardCache};
pub use optim::{optimizer_step, AdamConfig, OptState};
pub use params::{init_params, DenseHead, LstmParams, ModelParams, NetConfig};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NeuralError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid network config: {0}")]
    InvalidConfig(String),
    #[error("non-finite gradient entry")]
    NonFiniteGradient,
}
