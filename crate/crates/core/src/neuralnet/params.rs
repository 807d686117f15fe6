use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

use super::NeuralError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetConfig {
    /// Channel count of each input group; one LSTM per group.
    pub input_channels: Vec<usize>,
    pub hidden_units: usize,
    pub window: usize,
    pub heads: usize,
    pub seed: u64,
}

impl NetConfig {
    pub fn single(channels: usize, hidden_units: usize, window: usize, seed: u64) -> Self {
        Self { input_channels: vec![channels], hidden_units, window, heads: 1, seed }
    }

    pub fn groups(&self) -> usize {
        self.input_channels.len()
    }

    /// Width of the vector each head reads.
    pub fn head_inputs(&self) -> usize {
        self.groups() * self.hidden_units
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.input_channels.is_empty() || self.input_channels.contains(&0) {
            return Err(NeuralError::InvalidConfig("every input group needs >= 1 channel".into()));
        }
        if self.hidden_units == 0 || self.window == 0 || self.heads == 0 {
            return Err(NeuralError::InvalidConfig("hidden_units, window and heads must be >= 1".into()));
        }
        Ok(())
    }
}

/// Gate-stacked LSTM weights. Column blocks of width `hidden` hold the
/// input, forget, candidate and output gates in that order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Serialize + DeserializeOwned")]
pub struct LstmParams<T> {
    pub inputs: usize,
    pub hidden: usize,
    /// `inputs x 4*hidden`, row-major.
    pub w_x: Vec<T>,
    /// `hidden x 4*hidden`, row-major.
    pub w_h: Vec<T>,
    /// `4*hidden`.
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Serialize + DeserializeOwned")]
pub struct DenseHead<T> {
    pub weights: Vec<T>,
    /// Single element, kept as a vector so every tensor is a slice.
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Serialize + DeserializeOwned")]
pub struct ModelParams<T> {
    pub config: NetConfig,
    pub lstms: Vec<LstmParams<T>>,
    pub heads: Vec<DenseHead<T>>,
}

impl<T: Scalar> ModelParams<T> {
    /// Same shapes, all zeros.
    pub fn zeros(config: &NetConfig) -> Self {
        let h = config.hidden_units;
        Self {
            config: config.clone(),
            lstms: config
                .input_channels
                .iter()
                .map(|&c| LstmParams {
                    inputs: c,
                    hidden: h,
                    w_x: vec![T::zero(); c * 4 * h],
                    w_h: vec![T::zero(); h * 4 * h],
                    bias: vec![T::zero(); 4 * h],
                })
                .collect(),
            heads: (0..config.heads)
                .map(|_| DenseHead { weights: vec![T::zero(); config.head_inputs()], bias: vec![T::zero()] })
                .collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.config)
    }

    pub fn tensors(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::with_capacity(3 * self.lstms.len() + 2 * self.heads.len());
        for l in &self.lstms {
            out.extend([l.w_x.as_slice(), l.w_h.as_slice(), l.bias.as_slice()]);
        }
        for hd in &self.heads {
            out.extend([hd.weights.as_slice(), hd.bias.as_slice()]);
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::with_capacity(3 * self.lstms.len() + 2 * self.heads.len());
        for l in &mut self.lstms {
            out.push(&mut l.w_x);
            out.push(&mut l.w_h);
            out.push(&mut l.bias);
        }
        for hd in &mut self.heads {
            out.push(&mut hd.weights);
            out.push(&mut hd.bias);
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn scale(&mut self, k: T) {
        for t in self.tensors_mut() {
            for v in t.iter_mut() {
                *v *= k;
            }
        }
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        let (a, b) = (self.tensors(), other.tensors());
        a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.len() == y.len())
    }

    /// Flat copy in tensor order.
    pub fn to_flat(&self) -> Vec<T> {
        self.tensors().concat()
    }

    pub fn set_flat(&mut self, flat: &[T]) {
        let mut offset = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
    }
}

fn fill_uniform<T: Scalar>(rng: &mut ChaCha8Rng, out: &mut [T], bound: f64) {
    for v in out.iter_mut() {
        *v = T::of(rng.gen_range(-bound..=bound));
    }
}

/// Glorot-uniform weights per gate matrix, zero biases except the forget
/// gate (1.0). Deterministic in `config.seed`.
pub fn init_params<T: Scalar>(config: &NetConfig) -> Result<ModelParams<T>, NeuralError> {
    config.validate()?;
    let mut params = ModelParams::<T>::zeros(config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let h = config.hidden_units;
    for l in &mut params.lstms {
        let bx = (6.0 / (l.inputs + h) as f64).sqrt();
        let bh = (6.0 / (2 * h) as f64).sqrt();
        // each gate block is its own fan_in x fan_out matrix; the bound is the
        // same for all four, so filling the stacked matrix at once is equivalent
        fill_uniform(&mut rng, &mut l.w_x, bx);
        fill_uniform(&mut rng, &mut l.w_h, bh);
        for b in &mut l.bias[h..2 * h] {
            *b = T::one();
        }
    }
    let bd = (6.0 / (config.head_inputs() + 1) as f64).sqrt();
    for hd in &mut params.heads {
        fill_uniform(&mut rng, &mut hd.weights, bd);
    }
    Ok(params)
}
