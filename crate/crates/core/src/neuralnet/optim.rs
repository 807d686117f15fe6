use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

use super::params::ModelParams;
use super::NeuralError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        Self { learning_rate, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self::with_lr(1e-3)
    }
}

/// Adam moment estimates, one flat buffer per parameter tensor.
#[derive(Debug, Clone)]
pub struct OptState<T> {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> OptState<T> {
    pub fn new(params: &ModelParams<T>, config: AdamConfig) -> Self {
        let zeros: Vec<Vec<T>> = params.tensors().iter().map(|t| vec![T::zero(); t.len()]).collect();
        Self { config, step: 0, m: zeros.clone(), v: zeros }
    }
}

/// One Adam update. Rejects non-finite gradients before touching anything.
pub fn optimizer_step<T: Scalar>(
    params: &mut ModelParams<T>,
    grads: &ModelParams<T>,
    state: &mut OptState<T>,
) -> Result<(), NeuralError> {
    if !params.same_shape(grads) || state.m.len() != grads.tensors().len() {
        return Err(NeuralError::ShapeMismatch("gradient does not match parameters".into()));
    }
    if !grads.is_finite() {
        return Err(NeuralError::NonFiniteGradient);
    }
    state.step += 1;
    let c = state.config;
    let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
    let (one, eps, lr) = (T::one(), T::of(c.epsilon), T::of(c.learning_rate));
    let bias1 = one - T::of(c.beta1.powi(state.step as i32));
    let bias2 = one - T::of(c.beta2.powi(state.step as i32));
    for (((p, g), m), v) in params.tensors_mut().into_iter().zip(grads.tensors()).zip(&mut state.m).zip(&mut state.v) {
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (one - b1) * g[i];
            v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
            let m_hat = m[i] / bias1;
            let v_hat = v[i] / bias2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::params::{init_params, NetConfig};
    use super::*;

    fn tiny() -> ModelParams<f64> {
        init_params(&NetConfig::single(1, 1, 1, 4)).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = tiny();
        let before = p.clone();
        let mut st = OptState::new(&p, AdamConfig::default());
        let zero = p.zeros_like();
        optimizer_step(&mut p, &zero, &mut st).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
        let mut p = tiny();
        let before = p.to_flat();
        let mut g = p.zeros_like();
        g.heads[0].bias[0] = 0.25;
        g.lstms[0].w_x[2] = -4.0;
        let mut st = OptState::new(&p, AdamConfig::with_lr(0.01));
        optimizer_step(&mut p, &g, &mut st).unwrap();
        let after = p.to_flat();
        let n = after.len();
        assert!((before[n - 1] - after[n - 1] - 0.01 * 0.25 / (0.25 + 1e-8)).abs() < 1e-15);
        assert!((after[2] - before[2] - 0.01 * 4.0 / (4.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn second_step_hand_computed() {
        let mut p = tiny();
        let mut st = OptState::new(&p, AdamConfig::with_lr(0.1));
        let start = p.heads[0].bias[0];
        let mut g = p.zeros_like();
        g.heads[0].bias[0] = 1.0;
        optimizer_step(&mut p, &g, &mut st).unwrap();
        g.heads[0].bias[0] = -2.0;
        optimizer_step(&mut p, &g, &mut st).unwrap();
        // m2 = 0.9*0.1 - 0.2 = -0.11, v2 = 0.999*0.001 + 0.004 = 0.004999
        let m_hat = -0.11 / (1.0 - 0.81);
        let v_hat: f64 = 0.004999 / (1.0 - 0.998001);
        let step1 = 0.1 * 1.0 / (1.0 + 1e-8);
        let step2 = 0.1 * m_hat / (v_hat.sqrt() + 1e-8);
        assert!((p.heads[0].bias[0] - (start - step1 - step2)).abs() < 1e-12);
    }

    #[test]
    fn rejects_nan_without_update() {
        let mut p = tiny();
        let before = p.clone();
        let mut g = p.zeros_like();
        g.lstms[0].w_h[1] = f64::NAN;
        let mut st = OptState::new(&p, AdamConfig::default());
        assert_eq!(optimizer_step(&mut p, &g, &mut st), Err(NeuralError::NonFiniteGradient));
        assert_eq!(p, before);
        assert_eq!(st.step, 0);
    }
}
