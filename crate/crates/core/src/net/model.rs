//! Forward pass and manual backpropagation.

use rand::{Rng, RngCore};

use super::kernels::{
    conv_backward, conv_forward, dense_backward, dense_forward, relu, relu_backward, ConvDims,
};
use super::loss::{logits_grad, LossSpec};
use super::params::{
    NetParams, Weights, COLS1, CONV1_LEN, CONV1_OUT, CONV2_OUT, FLAT, HIDDEN, ROWS1,
};
use super::tensor::Tensor;
use crate::datamodel::{ClassId, CHANNELS, COLS, FIELD_LEN, N_CLASSES, ROWS};
use crate::error::{Error, Result};

const CONV1: ConvDims = ConvDims {
    c_in: CHANNELS,
    rows: ROWS,
    cols: COLS,
    c_out: CONV1_OUT,
};

const CONV2: ConvDims = ConvDims {
    c_in: CONV1_OUT,
    rows: ROWS1,
    cols: COLS1,
    c_out: CONV2_OUT,
};

/// How the dropout layer behaves in a forward call.
pub enum Dropout<'a> {
    /// Eval mode: identity.
    Off,
    /// Train mode: draw a fresh mask from `rng`.
    Sample(&'a mut dyn RngCore),
    /// Replay a fixed mask of `B × 2688` multipliers (0 or `1/(1−rate)`).
    Frozen(&'a [f64]),
}

/// Intermediates kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Cache {
    batch: usize,
    input: Vec<f64>,
    conv1: Vec<f64>,
    conv2: Vec<f64>,
    mask: Option<Vec<f64>>,
    dropped: Vec<f64>,
    hidden: Vec<f64>,
    logits: Tensor,
}

impl Cache {
    pub fn batch_size(&self) -> usize {
        self.batch
    }

    pub fn logits(&self) -> &Tensor {
        &self.logits
    }

    /// The dropout mask used, if any.
    pub fn mask(&self) -> Option<&[f64]> {
        self.mask.as_deref()
    }

    /// Post-ReLU activations of conv1, conv2 and dense1.
    pub fn activations(&self) -> [&[f64]; 3] {
        [&self.conv1, &self.conv2, &self.hidden]
    }
}

pub fn sample_mask(rate: f64, len: usize, rng: &mut dyn RngCore) -> Vec<f64> {
    if rate == 0.0 {
        return vec![1.0; len];
    }
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| {
            if rng.random::<f64>() < rate {
                0.0
            } else {
                keep
            }
        })
        .collect()
}

fn check_batch(batch: &Tensor) -> Result<usize> {
    let s = batch.shape();
    if s.len() != 4 || s[1] != CHANNELS || s[2] != ROWS || s[3] != COLS || s[0] == 0 {
        return Err(Error::Shape(format!(
            "batch shape {s:?}, expected [B, 2, 16, 29] with B >= 1"
        )));
    }
    if !batch.all_finite() {
        return Err(Error::NonFinite("input batch".into()));
    }
    Ok(s[0])
}

/// Run the network on a `[B][2][16][29]` batch, returning `[B][7]` logits.
pub fn forward(
    params: &NetParams,
    batch: &Tensor,
    dropout: Dropout<'_>,
) -> Result<(Tensor, Cache)> {
    let b = check_batch(batch)?;
    let w = &params.weights;
    let mask = match dropout {
        Dropout::Off => None,
        Dropout::Sample(rng) => Some(sample_mask(params.dropout_rate, b * FLAT, rng)),
        Dropout::Frozen(m) => {
            if m.len() != b * FLAT {
                return Err(Error::Shape(format!(
                    "dropout mask of {} for batch {b}",
                    m.len()
                )));
            }
            Some(m.to_vec())
        }
    };
    let mut conv1 = vec![0.0; b * CONV1_LEN];
    let mut conv2 = vec![0.0; b * FLAT];
    let mut dropped = vec![0.0; b * FLAT];
    let mut hidden = vec![0.0; b * HIDDEN];
    let mut logits = vec![0.0; b * N_CLASSES];
    for i in 0..b {
        let x = &batch.data()[i * FIELD_LEN..(i + 1) * FIELD_LEN];
        let a1 = &mut conv1[i * CONV1_LEN..(i + 1) * CONV1_LEN];
        conv_forward(CONV1, x, w.conv1_w.data(), w.conv1_b.data(), a1);
        relu(a1);
        let a2 = &mut conv2[i * FLAT..(i + 1) * FLAT];
        conv_forward(CONV2, a1, w.conv2_w.data(), w.conv2_b.data(), a2);
        relu(a2);
        let d = &mut dropped[i * FLAT..(i + 1) * FLAT];
        match &mask {
            Some(m) => {
                for ((o, a), k) in d
                    .iter_mut()
                    .zip(a2.iter())
                    .zip(&m[i * FLAT..(i + 1) * FLAT])
                {
                    *o = a * k;
                }
            }
            None => d.copy_from_slice(a2),
        }
        let h = &mut hidden[i * HIDDEN..(i + 1) * HIDDEN];
        dense_forward(d, w.dense1_w.data(), w.dense1_b.data(), h);
        relu(h);
        dense_forward(
            h,
            w.dense2_w.data(),
            w.dense2_b.data(),
            &mut logits[i * N_CLASSES..(i + 1) * N_CLASSES],
        );
    }
    let logits = Tensor::from_vec(&[b, N_CLASSES], logits)?;
    let cache = Cache {
        batch: b,
        input: batch.data().to_vec(),
        conv1,
        conv2,
        mask,
        dropped,
        hidden,
        logits: logits.clone(),
    };
    Ok((logits, cache))
}

/// Gradients of the batch loss with respect to every parameter.
pub fn backward(
    params: &NetParams,
    cache: &Cache,
    labels: &[ClassId],
    smooth: &[bool],
    spec: &LossSpec,
) -> Result<Weights> {
    let g_logits = logits_grad(&cache.logits, labels, smooth, spec)?;
    backward_from_logits(params, cache, &g_logits)
}

/// Backpropagate a given logits gradient.
pub fn backward_from_logits(
    params: &NetParams,
    cache: &Cache,
    g_logits: &Tensor,
) -> Result<Weights> {
    let b = cache.batch;
    if g_logits.shape() != [b, N_CLASSES] {
        return Err(Error::Shape(format!(
            "logits gradient {:?} for batch {b}",
            g_logits.shape()
        )));
    }
    let w = &params.weights;
    let mut g = Weights::zeros();
    let mut d_hidden = vec![0.0; HIDDEN];
    let mut d_flat = vec![0.0; FLAT];
    let mut d_conv1 = vec![0.0; CONV1_LEN];
    for i in 0..b {
        let h = &cache.hidden[i * HIDDEN..(i + 1) * HIDDEN];
        d_hidden.fill(0.0);
        dense_backward(
            h,
            w.dense2_w.data(),
            g_logits.row(i),
            g.dense2_w.data_mut(),
            g.dense2_b.data_mut(),
            Some(&mut d_hidden),
        );
        relu_backward(h, &mut d_hidden);

        d_flat.fill(0.0);
        dense_backward(
            &cache.dropped[i * FLAT..(i + 1) * FLAT],
            w.dense1_w.data(),
            &d_hidden,
            g.dense1_w.data_mut(),
            g.dense1_b.data_mut(),
            Some(&mut d_flat),
        );
        if let Some(m) = &cache.mask {
            for (d, k) in d_flat.iter_mut().zip(&m[i * FLAT..(i + 1) * FLAT]) {
                *d *= k;
            }
        }
        let a2 = &cache.conv2[i * FLAT..(i + 1) * FLAT];
        relu_backward(a2, &mut d_flat);

        let a1 = &cache.conv1[i * CONV1_LEN..(i + 1) * CONV1_LEN];
        d_conv1.fill(0.0);
        conv_backward(
            CONV2,
            a1,
            w.conv2_w.data(),
            &d_flat,
            g.conv2_w.data_mut(),
            g.conv2_b.data_mut(),
            Some(&mut d_conv1),
        );
        relu_backward(a1, &mut d_conv1);

        conv_backward(
            CONV1,
            &cache.input[i * FIELD_LEN..(i + 1) * FIELD_LEN],
            w.conv1_w.data(),
            &d_conv1,
            g.conv1_w.data_mut(),
            g.conv1_b.data_mut(),
            None,
        );
    }
    if !g.all_finite() {
        return Err(Error::NonFinite("gradient".into()));
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::params::init_params;
    use crate::seeds;

    fn random_batch(b: usize, seed: u64) -> Tensor {
        let mut rng = seeds::rng(seed, "test-batch", 0);
        let data = (0..b * FIELD_LEN)
            .map(|_| rng.random::<f64>() * 2.0 - 1.0)
            .collect();
        Tensor::from_vec(&[b, CHANNELS, ROWS, COLS], data).unwrap()
    }

    #[test]
    fn zero_params_zero_logits() {
        let p = NetParams::zeros(0.0).unwrap();
        let x = Tensor::zeros(&[3, 2, 16, 29]);
        let (z, _) = forward(&p, &x, Dropout::Off).unwrap();
        assert_eq!(z.shape(), &[3, 7]);
        assert!(z.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn eval_mode_is_deterministic() {
        let p = init_params(1, 0.4).unwrap();
        let x = random_batch(2, 5);
        let (a, _) = forward(&p, &x, Dropout::Off).unwrap();
        let (b, _) = forward(&p, &x, Dropout::Off).unwrap();
        assert_eq!(a, b);
        assert!(forward(&p, &Tensor::zeros(&[1, 2, 16, 28]), Dropout::Off).is_err());
        assert!(forward(&p, &Tensor::zeros(&[0, 2, 16, 29]), Dropout::Off).is_err());
    }

    #[test]
    fn batch_rows_are_independent() {
        let p = init_params(2, 0.0).unwrap();
        let x = random_batch(3, 9);
        let (all, _) = forward(&p, &x, Dropout::Off).unwrap();
        for i in 0..3 {
            let one = Tensor::from_vec(
                &[1, 2, 16, 29],
                x.data()[i * FIELD_LEN..(i + 1) * FIELD_LEN].to_vec(),
            )
            .unwrap();
            let (z, _) = forward(&p, &one, Dropout::Off).unwrap();
            assert_eq!(z.row(0), all.row(i));
        }
    }

    #[test]
    fn inverted_dropout_preserves_expectation() {
        let rate = 0.3;
        let draws = 10_000;
        let mut rng = seeds::rng(4, "mask", 0);
        let mut sums = vec![0.0; 64];
        for _ in 0..draws {
            for (s, m) in sums.iter_mut().zip(sample_mask(rate, 64, &mut rng)) {
                *s += m;
            }
        }
        for s in sums {
            assert!((s / draws as f64 - 1.0).abs() < 0.02 * 3.0);
        }
        // And over a full activation vector the mean scale stays within 2%.
        let p = init_params(3, rate).unwrap();
        let x = random_batch(1, 1);
        let (_, eval) = forward(&p, &x, Dropout::Off).unwrap();
        let mut acc = vec![0.0; FLAT];
        let n = 2_000;
        for _ in 0..n {
            let (_, c) = forward(&p, &x, Dropout::Sample(&mut rng)).unwrap();
            for (a, d) in acc.iter_mut().zip(&c.dropped) {
                *a += d;
            }
        }
        let total_eval: f64 = eval.dropped.iter().sum();
        let total_train: f64 = acc.iter().sum::<f64>() / n as f64;
        assert!((total_train / total_eval - 1.0).abs() < 0.02);
    }

    #[test]
    fn zero_loss_gives_zero_gradient() {
        // Drive one logit far up through the dense2 bias.
        let mut p = NetParams::zeros(0.0).unwrap();
        p.weights.dense2_b.data_mut()[3] = 60.0;
        let x = random_batch(2, 3);
        let (_, cache) = forward(&p, &x, Dropout::Off).unwrap();
        let spec = LossSpec::uniform(0.0).unwrap();
        let g = backward(
            &p,
            &cache,
            &[ClassId::Nea, ClassId::Nea],
            &[false, false],
            &spec,
        )
        .unwrap();
        for t in g.tensors() {
            assert!(t.data().iter().all(|v| v.abs() < 1e-20));
        }
    }

    #[test]
    fn frozen_mask_replays() {
        let p = init_params(8, 0.5).unwrap();
        let x = random_batch(2, 2);
        let mut rng = seeds::rng(1, "m", 0);
        let (a, cache) = forward(&p, &x, Dropout::Sample(&mut rng)).unwrap();
        let mask = cache.mask().unwrap().to_vec();
        let (b, _) = forward(&p, &x, Dropout::Frozen(&mask)).unwrap();
        assert_eq!(a, b);
        assert!(forward(&p, &x, Dropout::Frozen(&mask[1..])).is_err());
    }
}
