use crate::scalar::Scalar;

use super::params::{LstmParams, ModelParams};
use super::NeuralError;

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    pub batch: usize,
    groups: Vec<GroupCache<T>>,
}

#[derive(Debug, Clone)]
struct GroupCache<T> {
    x: Vec<T>,
    /// Post-activation gates, `batch x window x 4H`.
    gates: Vec<T>,
    /// Cell states, `batch x window x H`.
    c: Vec<T>,
    /// `tanh(c)`, same layout.
    tc: Vec<T>,
    /// Hidden states, same layout.
    h: Vec<T>,
}

impl<T: Scalar> ForwardCache<T> {
    /// Concatenated final hidden states of sample `b`.
    pub fn final_hidden(&self, b: usize, window: usize, hidden: usize) -> Vec<T> {
        let mut out = Vec::with_capacity(self.groups.len() * hidden);
        for g in &self.groups {
            let at = (b * window + window - 1) * hidden;
            out.extend_from_slice(&g.h[at..at + hidden]);
        }
        out
    }
}

fn check_inputs<T: Scalar>(params: &ModelParams<T>, inputs: &[&[T]]) -> Result<usize, NeuralError> {
    let cfg = &params.config;
    if inputs.len() != cfg.groups() {
        return Err(NeuralError::ShapeMismatch(format!("{} input groups, model has {}", inputs.len(), cfg.groups())));
    }
    let mut batch = None;
    for (g, (x, &c)) in inputs.iter().zip(&cfg.input_channels).enumerate() {
        let per_sample = cfg.window * c;
        if x.is_empty() || x.len() % per_sample != 0 {
            return Err(NeuralError::ShapeMismatch(format!(
                "group {g}: {} values is not a whole number of {}x{} windows",
                x.len(),
                cfg.window,
                c
            )));
        }
        let b = x.len() / per_sample;
        if *batch.get_or_insert(b) != b {
            return Err(NeuralError::ShapeMismatch(format!("group {g} has {b} samples, expected {}", batch.unwrap())));
        }
    }
    Ok(batch.unwrap_or(0))
}

fn run_group<T: Scalar>(p: &LstmParams<T>, x: &[T], batch: usize, window: usize) -> GroupCache<T> {
    let (ci, hd) = (p.inputs, p.hidden);
    let g4 = 4 * hd;
    let mut gates = vec![T::zero(); batch * window * g4];
    let mut c = vec![T::zero(); batch * window * hd];
    let mut tc = vec![T::zero(); batch * window * hd];
    let mut h = vec![T::zero(); batch * window * hd];
    let zero = vec![T::zero(); hd];
    for b in 0..batch {
        for t in 0..window {
            let step = b * window + t;
            let pre = &mut gates[step * g4..(step + 1) * g4];
            pre.copy_from_slice(&p.bias);
            for (k, &xv) in x[step * ci..(step + 1) * ci].iter().enumerate() {
                if xv != T::zero() {
                    for (a, &w) in pre.iter_mut().zip(&p.w_x[k * g4..(k + 1) * g4]) {
                        *a += xv * w;
                    }
                }
            }
            let (h_prev, c_prev) = if t == 0 {
                (&zero[..], &zero[..])
            } else {
                ((&h[(step - 1) * hd..step * hd]), (&c[(step - 1) * hd..step * hd]))
            };
            for (k, &hv) in h_prev.iter().enumerate() {
                for (a, &w) in pre.iter_mut().zip(&p.w_h[k * g4..(k + 1) * g4]) {
                    *a += hv * w;
                }
            }
            for j in 0..hd {
                pre[j] = pre[j].sigmoid();
                pre[hd + j] = pre[hd + j].sigmoid();
                pre[2 * hd + j] = pre[2 * hd + j].tanh();
                pre[3 * hd + j] = pre[3 * hd + j].sigmoid();
            }
            let mut c_new = vec![T::zero(); hd];
            for j in 0..hd {
                c_new[j] = pre[hd + j] * c_prev[j] + pre[j] * pre[2 * hd + j];
            }
            for j in 0..hd {
                let t_c = c_new[j].tanh();
                tc[step * hd + j] = t_c;
                h[step * hd + j] = pre[3 * hd + j] * t_c;
            }
            c[step * hd..(step + 1) * hd].copy_from_slice(&c_new);
        }
    }
    GroupCache { x: x.to_vec(), gates, c, tc, h }
}

/// Runs every group's LSTM over its windows and applies the heads.
///
/// `inputs[g]` is `batch x window x channels[g]`, row-major. Returns
/// predictions as `batch x heads`.
pub fn forward<T: Scalar>(params: &ModelParams<T>, inputs: &[&[T]]) -> Result<(Vec<T>, ForwardCache<T>), NeuralError> {
    let batch = check_inputs(params, inputs)?;
    let cfg = &params.config;
    let groups: Vec<GroupCache<T>> =
        params.lstms.iter().zip(inputs).map(|(p, x)| run_group(p, x, batch, cfg.window)).collect();
    let cache = ForwardCache { batch, groups };
    let k = cfg.heads;
    let mut preds = vec![T::zero(); batch * k];
    for b in 0..batch {
        let z = cache.final_hidden(b, cfg.window, cfg.hidden_units);
        for (head, out) in params.heads.iter().zip(&mut preds[b * k..(b + 1) * k]) {
            *out = head.bias[0] + head.weights.iter().zip(&z).map(|(&w, &v)| w * v).sum::<T>();
        }
    }
    Ok((preds, cache))
}

/// Gradient of a loss with respect to every parameter, given the loss
/// gradient `dpred` with respect to each prediction (`batch x heads`).
pub fn backward<T: Scalar>(
    params: &ModelParams<T>,
    cache: &ForwardCache<T>,
    dpred: &[T],
) -> Result<ModelParams<T>, NeuralError> {
    let cfg = &params.config;
    let (batch, k, hd, u) = (cache.batch, cfg.heads, cfg.hidden_units, cfg.window);
    if dpred.len() != batch * k {
        return Err(NeuralError::ShapeMismatch(format!("dpred has {} entries, expected {}", dpred.len(), batch * k)));
    }
    let mut grads = params.zeros_like();
    let g4 = 4 * hd;
    let one = T::one();

    let mut dh = vec![T::zero(); hd];
    let mut dc = vec![T::zero(); hd];
    let mut dpre = vec![T::zero(); g4];
    for b in 0..batch {
        let dp = &dpred[b * k..(b + 1) * k];
        if dp.iter().all(|v| *v == T::zero()) {
            continue;
        }
        let z = cache.final_hidden(b, u, hd);
        let mut dz = vec![T::zero(); z.len()];
        for ((head, ghead), &d) in params.heads.iter().zip(&mut grads.heads).zip(dp) {
            ghead.bias[0] += d;
            for ((gw, &zv), (dzv, &w)) in ghead.weights.iter_mut().zip(&z).zip(dz.iter_mut().zip(&head.weights)) {
                *gw += d * zv;
                *dzv += d * w;
            }
        }

        for (gi, (p, gc)) in params.lstms.iter().zip(&cache.groups).enumerate() {
            let gp = &mut grads.lstms[gi];
            let ci = p.inputs;
            dh.copy_from_slice(&dz[gi * hd..(gi + 1) * hd]);
            dc.iter_mut().for_each(|v| *v = T::zero());
            for t in (0..u).rev() {
                let step = b * u + t;
                let gates = &gc.gates[step * g4..(step + 1) * g4];
                let tc = &gc.tc[step * hd..(step + 1) * hd];
                for j in 0..hd {
                    let (i, f, g, o) = (gates[j], gates[hd + j], gates[2 * hd + j], gates[3 * hd + j]);
                    let c_prev = if t == 0 { T::zero() } else { gc.c[(step - 1) * hd + j] };
                    let d_o = dh[j] * tc[j];
                    let dcj = dc[j] + dh[j] * o * (one - tc[j] * tc[j]);
                    dpre[j] = dcj * g * i * (one - i);
                    dpre[hd + j] = dcj * c_prev * f * (one - f);
                    dpre[2 * hd + j] = dcj * i * (one - g * g);
                    dpre[3 * hd + j] = d_o * o * (one - o);
                    dc[j] = dcj * f;
                }
                for (gb, &d) in gp.bias.iter_mut().zip(&dpre) {
                    *gb += d;
                }
                for (kx, &xv) in gc.x[step * ci..(step + 1) * ci].iter().enumerate() {
                    if xv != T::zero() {
                        for (gw, &d) in gp.w_x[kx * g4..(kx + 1) * g4].iter_mut().zip(&dpre) {
                            *gw += xv * d;
                        }
                    }
                }
                if t > 0 {
                    let h_prev = &gc.h[(step - 1) * hd..step * hd];
                    for kh in 0..hd {
                        let row = kh * g4..(kh + 1) * g4;
                        let hv = h_prev[kh];
                        let mut acc = T::zero();
                        for ((gw, &w), &d) in gp.w_h[row.clone()].iter_mut().zip(&p.w_h[row]).zip(&dpre) {
                            *gw += hv * d;
                            acc += w * d;
                        }
                        dh[kh] = acc;
                    }
                }
            }
        }
    }
    Ok(grads)
}
