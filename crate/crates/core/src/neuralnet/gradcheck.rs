use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::slaloss::LossSpec;

use super::lstm::{backward, forward};
use super::params::{init_params, ModelParams, NetConfig};
use super::NeuralError;

const EPSILON: f64 = 1e-5;
const KINK_EXCLUSION: f64 = 1e-6;
/// Denominator floor so that two near-zero gradients compare as equal.
const REL_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Largest relative error within each parameter tensor, in tensor order.
    pub per_tensor: Vec<f64>,
    /// Prediction/target pairs left out because they sit on the kink.
    pub excluded: usize,
}

fn masked_loss(params: &ModelParams<f64>, inputs: &[&[f64]], targets: &[f64], mask: &[bool], loss: &LossSpec<f64>) -> f64 {
    let (pred, _) = forward(params, inputs).expect("shapes checked");
    let n = mask.iter().filter(|m| **m).count().max(1) as f64;
    pred.iter().zip(targets).zip(mask).filter(|(_, m)| **m).map(|((p, t), _)| loss.value(p - t)).sum::<f64>() / n
}

/// Compares backpropagated gradients of the mean loss over `targets`
/// (`batch x heads`) with central differences.
pub fn grad_check_with(
    params: &ModelParams<f64>,
    inputs: &[&[f64]],
    targets: &[f64],
    loss: &LossSpec<f64>,
) -> Result<GradCheckReport, NeuralError> {
    let (pred, cache) = forward(params, inputs)?;
    if pred.len() != targets.len() {
        return Err(NeuralError::ShapeMismatch(format!("{} targets for {} predictions", targets.len(), pred.len())));
    }
    let mask: Vec<bool> = pred.iter().zip(targets).map(|(p, t)| (p - t).abs() >= KINK_EXCLUSION).collect();
    let n = mask.iter().filter(|m| **m).count().max(1) as f64;
    let dpred: Vec<f64> =
        pred.iter().zip(targets).zip(&mask).map(|((p, t), m)| if *m { loss.grad(p - t) / n } else { 0.0 }).collect();
    let analytic = backward(params, &cache, &dpred)?;

    let mut probe = params.clone();
    let mut flat = params.to_flat();
    let sizes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    let analytic_flat = analytic.to_flat();
    let mut per_tensor = vec![0.0f64; sizes.len()];
    let mut idx = 0;
    for (ti, size) in sizes.iter().enumerate() {
        for _ in 0..*size {
            let orig = flat[idx];
            flat[idx] = orig + EPSILON;
            probe.set_flat(&flat);
            let up = masked_loss(&probe, inputs, targets, &mask, loss);
            flat[idx] = orig - EPSILON;
            probe.set_flat(&flat);
            let down = masked_loss(&probe, inputs, targets, &mask, loss);
            flat[idx] = orig;
            let numeric = (up - down) / (2.0 * EPSILON);
            let a = analytic_flat[idx];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
            per_tensor[ti] = per_tensor[ti].max(rel);
            idx += 1;
        }
    }
    let max_rel_error = per_tensor.iter().copied().fold(0.0, f64::max);
    Ok(GradCheckReport { max_rel_error, per_tensor, excluded: mask.iter().filter(|m| !**m).count() })
}

/// Gradient check of the wMAE loss on a randomly initialized network with
/// standard-normal inputs and targets, all drawn from `config.seed`.
pub fn grad_check(config: &NetConfig, loss_weight: f64, sample_count: usize) -> Result<f64, NeuralError> {
    let params = init_params::<f64>(config)?;
    let loss = LossSpec::wmae(loss_weight).map_err(|e| NeuralError::InvalidConfig(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(&mut rng)).collect() };
    let inputs: Vec<Vec<f64>> = config.input_channels.iter().map(|c| draw(sample_count * config.window * c)).collect();
    let targets = draw(sample_count * config.heads);
    let refs: Vec<&[f64]> = inputs.iter().map(|v| v.as_slice()).collect();
    Ok(grad_check_with(&params, &refs, &targets, &loss)?.max_rel_error)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_network_unit_weight() {
        let err = grad_check(&NetConfig::single(3, 4, 5, 11), 1.0, 4).unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn small_network_heavy_weight() {
        let err = grad_check(&NetConfig::single(3, 4, 5, 11), 8.0, 4).unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn multi_group_multi_head() {
        let cfg = NetConfig { input_channels: vec![2, 3], hidden_units: 3, window: 4, heads: 2, seed: 2 };
        let err = grad_check(&cfg, 3.0, 3).unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn zero_weight_network() {
        let cfg = NetConfig::single(2, 3, 4, 0);
        let mut p = ModelParams::<f64>::zeros(&cfg);
        p.heads[0].bias[0] = 0.2;
        let x: Vec<f64> = (0..3 * 4 * 2).map(|i| (i as f64).sin()).collect();
        let report = grad_check_with(&p, &[&x], &[1.0, -1.0, 0.5], &LossSpec::Wmae { w: 4.0 }).unwrap();
        let n = report.per_tensor.len();
        // the recurrent weights and head weights cannot move the output at all
        assert!(report.per_tensor[..n - 1].iter().all(|&e| e == 0.0), "{:?}", report.per_tensor);
        assert!(report.per_tensor[n - 1] < 1e-9);
    }

    #[test]
    fn kink_samples_are_excluded() {
        let cfg = NetConfig::single(1, 2, 2, 0);
        let p = ModelParams::<f64>::zeros(&cfg);
        let report = grad_check_with(&p, &[&[0.0, 0.0]], &[0.0], &LossSpec::Mae).unwrap();
        assert_eq!(report.excluded, 1);
        assert_eq!(report.max_rel_error, 0.0);
    }
}
