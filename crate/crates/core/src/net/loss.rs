//! Softmax head and the class-weighted, optionally label-smoothed cross-entropy.

use super::tensor::Tensor;
use crate::datamodel::{ClassId, N_CLASSES};
use crate::error::{Error, Result};
use crate::smoothing::smoothed_row;

/// Probabilities below this are clamped before taking the log.
pub const PROB_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    pub class_weights: [f64; N_CLASSES],
    pub smoothing_eps: f64,
}

impl LossSpec {
    pub fn new(class_weights: [f64; N_CLASSES], smoothing_eps: f64) -> Result<Self> {
        if class_weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::invalid(format!(
                "class weights must be positive: {class_weights:?}"
            )));
        }
        let sum: f64 = class_weights.iter().sum();
        if (sum - N_CLASSES as f64).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "class weights sum to {sum}, expected {N_CLASSES}"
            )));
        }
        if !(0.0..1.0).contains(&smoothing_eps) {
            return Err(Error::invalid(format!(
                "smoothing eps {smoothing_eps} not in [0, 1)"
            )));
        }
        Ok(Self {
            class_weights,
            smoothing_eps,
        })
    }

    pub fn uniform(smoothing_eps: f64) -> Result<Self> {
        Self::new([1.0; N_CLASSES], smoothing_eps)
    }

    /// Inverse-frequency weights from class frequencies, normalized to sum to 7.
    pub fn from_frequencies(freqs: &[f64; N_CLASSES], smoothing_eps: f64) -> Result<Self> {
        Self::new(inverse_frequency_weights(freqs)?, smoothing_eps)
    }

    /// Per-example weight and target distribution.
    pub fn target(&self, label: ClassId, smooth: bool) -> (f64, [f64; N_CLASSES]) {
        let k = label.index();
        let eps = if smooth { self.smoothing_eps } else { 0.0 };
        (self.class_weights[k], smoothed_row(k, eps))
    }
}

/// `w_k ∝ 1 / f_k`, scaled so the weights sum to the number of classes.
///
/// A class absent from the training data gets the largest weight among the
/// present classes; it cannot occur as a target, so this only keeps the
/// weights finite and positive.
pub fn inverse_frequency_weights(freqs: &[f64; N_CLASSES]) -> Result<[f64; N_CLASSES]> {
    if freqs.iter().any(|f| !f.is_finite() || *f < 0.0) || freqs.iter().all(|f| *f == 0.0) {
        return Err(Error::invalid(format!("bad class frequencies {freqs:?}")));
    }
    let max_inv = freqs
        .iter()
        .filter(|f| **f > 0.0)
        .map(|f| 1.0 / f)
        .fold(0.0, f64::max);
    let inv = freqs.map(|f| if f > 0.0 { 1.0 / f } else { max_inv });
    let sum: f64 = inv.iter().sum();
    Ok(inv.map(|w| w * N_CLASSES as f64 / sum))
}

fn log_softmax(z: &[f64]) -> [f64; N_CLASSES] {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    let mut out = [0.0; N_CLASSES];
    for (o, v) in out.iter_mut().zip(z) {
        *o = v - max - lse;
    }
    out
}

pub(crate) fn softmax_row(z: &[f64]) -> [f64; N_CLASSES] {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0; N_CLASSES];
    let mut sum = 0.0;
    for (o, v) in out.iter_mut().zip(z) {
        *o = (v - max).exp();
        sum += *o;
    }
    for o in &mut out {
        *o /= sum;
    }
    out
}

/// Row-wise softmax of `[B][7]` logits.
pub fn softmax_probs(logits: &Tensor) -> Tensor {
    let b = logits.shape()[0];
    let mut data = Vec::with_capacity(b * N_CLASSES);
    for i in 0..b {
        data.extend_from_slice(&softmax_row(logits.row(i)));
    }
    Tensor::from_vec(&[b, N_CLASSES], data).expect("same shape as logits")
}

fn check_batch(rows: usize, labels: &[ClassId], smooth: &[bool]) -> Result<()> {
    if labels.len() != rows || smooth.len() != rows {
        return Err(Error::Shape(format!(
            "batch of {rows} rows with {} labels and {} smoothing flags",
            labels.len(),
            smooth.len()
        )));
    }
    if rows == 0 {
        return Err(Error::invalid("empty batch"));
    }
    Ok(())
}

fn weighted_ce(
    rows: usize,
    log_row: impl Fn(usize) -> ([f64; N_CLASSES], usize),
    labels: &[ClassId],
    smooth: &[bool],
    spec: &LossSpec,
) -> f64 {
    let mut total = 0.0;
    let mut clamped = 0;
    for b in 0..rows {
        let (w, q) = spec.target(labels[b], smooth[b]);
        let (logp, hits) = log_row(b);
        clamped += hits;
        total += w * -q.iter().zip(&logp).map(|(qk, lk)| qk * lk).sum::<f64>();
    }
    if clamped > 0 {
        log::warn!("{clamped} probabilities clamped at {PROB_FLOOR:e} in the loss");
    }
    total / rows as f64
}

/// Mean over the batch of `w_y · CE(q, p)`. `smooth[b]` selects the
/// label-smoothed target for example `b`.
pub fn loss(probs: &Tensor, labels: &[ClassId], smooth: &[bool], spec: &LossSpec) -> Result<f64> {
    let rows = probs.shape()[0];
    check_batch(rows, labels, smooth)?;
    let floor = PROB_FLOOR.ln();
    Ok(weighted_ce(
        rows,
        |b| {
            let mut hits = 0;
            let mut out = [0.0; N_CLASSES];
            for (o, p) in out.iter_mut().zip(probs.row(b)) {
                if *p < PROB_FLOOR {
                    hits += 1;
                    *o = floor;
                } else {
                    *o = p.ln();
                }
            }
            (out, hits)
        },
        labels,
        smooth,
        spec,
    ))
}

/// Same loss evaluated from logits through a log-softmax, which is more
/// accurate than taking logs of rounded probabilities.
pub fn loss_from_logits(
    logits: &Tensor,
    labels: &[ClassId],
    smooth: &[bool],
    spec: &LossSpec,
) -> Result<f64> {
    let rows = logits.shape()[0];
    check_batch(rows, labels, smooth)?;
    let floor = PROB_FLOOR.ln();
    Ok(weighted_ce(
        rows,
        |b| {
            let mut hits = 0;
            let mut out = log_softmax(logits.row(b));
            for o in &mut out {
                if *o < floor {
                    hits += 1;
                    *o = floor;
                }
            }
            (out, hits)
        },
        labels,
        smooth,
        spec,
    ))
}

/// Gradient of the loss with respect to the logits: `w_y (p − q) / B`.
pub fn logits_grad(
    logits: &Tensor,
    labels: &[ClassId],
    smooth: &[bool],
    spec: &LossSpec,
) -> Result<Tensor> {
    let rows = logits.shape()[0];
    check_batch(rows, labels, smooth)?;
    let mut data = Vec::with_capacity(rows * N_CLASSES);
    for b in 0..rows {
        let p = softmax_row(logits.row(b));
        let (w, q) = spec.target(labels[b], smooth[b]);
        data.extend((0..N_CLASSES).map(|k| w * (p[k] - q[k]) / rows as f64));
    }
    Tensor::from_vec(&[rows, N_CLASSES], data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn logits(rows: &[[f64; N_CLASSES]]) -> Tensor {
        Tensor::from_vec(&[rows.len(), N_CLASSES], rows.concat()).unwrap()
    }

    #[test]
    fn softmax_examples() {
        let p = softmax_probs(&logits(&[[0.0; 7]]));
        assert!(p.data().iter().all(|v| (v - 1.0 / 7.0).abs() < 1e-15));
        let p = softmax_probs(&logits(&[[1000.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]]));
        assert!(p.all_finite());
        assert!((p.data()[0] - 1.0).abs() < 1e-12);
        let z = [0.3, -1.2, 2.0, 0.0, 0.7, -0.1, 1.1];
        let shifted = z.map(|v| v + 123.4);
        let a = softmax_probs(&logits(&[z]));
        let b = softmax_probs(&logits(&[shifted]));
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a.data().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loss_examples() {
        let spec = LossSpec::uniform(0.0).unwrap();
        let one_hot = Tensor::from_vec(&[1, 7], vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(
            loss(&one_hot, &[ClassId::Hfa], &[false], &spec).unwrap(),
            0.0
        );
        let uniform = Tensor::from_vec(&[1, 7], vec![1.0 / 7.0; 7]).unwrap();
        let l = loss(&uniform, &[ClassId::Res], &[false], &spec).unwrap();
        assert!((l - 7f64.ln()).abs() < 1e-12);
        assert!((l - 1.9459).abs() < 1e-4);
    }

    #[test]
    fn zero_probability_is_clamped() {
        let spec = LossSpec::uniform(0.0).unwrap();
        let p = Tensor::from_vec(&[1, 7], vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let l = loss(&p, &[ClassId::Hna], &[false], &spec).unwrap();
        assert!((l + PROB_FLOOR.ln()).abs() < 1e-9);
    }

    #[test]
    fn two_class_weights() {
        // Inverse frequencies 1.25 and 5 scaled to sum to 2.
        let (a, b): (f64, f64) = (1.0 / 0.8, 1.0 / 0.2);
        let s = 2.0 / (a + b);
        assert!((a * s - 0.4).abs() < 1e-12 && (b * s - 1.6).abs() < 1e-12);
        let mut f = [0.0; 7];
        f[0] = 0.4;
        f[1] = 0.1;
        f[6] = 0.5;
        let w = inverse_frequency_weights(&f).unwrap();
        assert!((w.iter().sum::<f64>() - 7.0).abs() < 1e-12);
        assert!((w[0] / w[6] - 1.25).abs() < 1e-12);
        assert!((w[1] / w[0] - 4.0).abs() < 1e-12);
        assert_eq!(w[2], w[1]);
        assert!(LossSpec::from_frequencies(&f, 0.1).is_ok());
    }

    #[test]
    fn spec_validation() {
        assert!(LossSpec::new([1.0; 7], 1.0).is_err());
        assert!(LossSpec::new([2.0; 7], 0.1).is_err());
        assert!(LossSpec::new([0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 2.0], 0.1).is_err());
    }

    #[test]
    fn unit_weights_no_smoothing_is_plain_cross_entropy() {
        let z = logits(&[
            [0.3, -1.2, 2.0, 0.0, 0.7, -0.1, 1.1],
            [1.0, 0.0, -1.0, 0.5, 0.5, 0.0, 0.2],
        ]);
        let labels = [ClassId::Hfa, ClassId::Sea];
        let spec = LossSpec::uniform(0.0).unwrap();
        let p = softmax_probs(&z);
        let plain = -(p.row(0)[2].ln() + p.row(1)[4].ln()) / 2.0;
        let a = loss(&p, &labels, &[false, false], &spec).unwrap();
        let b = loss_from_logits(&z, &labels, &[false, false], &spec).unwrap();
        assert!((a - plain).abs() < 1e-12 && (b - plain).abs() < 1e-12);
        // Smoothing only changes flagged rows.
        let s = LossSpec::uniform(0.1).unwrap();
        let c = loss_from_logits(&z, &labels, &[false, false], &s).unwrap();
        assert!((c - plain).abs() < 1e-12);
        assert!(loss_from_logits(&z, &labels, &[true, false], &s).unwrap() > plain);
    }

    #[test]
    fn logits_gradient() {
        let spec = LossSpec::uniform(0.0).unwrap();
        let z = logits(&[[50.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]]);
        let g = logits_grad(&z, &[ClassId::Bm], &[false], &spec).unwrap();
        assert!(g.data().iter().all(|v| v.abs() < 1e-20));

        let z = logits(&[
            [0.3, -1.2, 2.0, 0.0, 0.7, -0.1, 1.1],
            [1.0, 0.0, -1.0, 0.5, 0.5, 0.0, 0.2],
        ]);
        let labels = [ClassId::Hfa, ClassId::Sea];
        let mut w = [1.0; 7];
        let base = logits_grad(
            &z,
            &labels,
            &[false, false],
            &LossSpec {
                class_weights: w,
                smoothing_eps: 0.0,
            },
        )
        .unwrap();
        w[ClassId::Sea.index()] = 2.0;
        let doubled = logits_grad(
            &z,
            &labels,
            &[false, false],
            &LossSpec {
                class_weights: w,
                smoothing_eps: 0.0,
            },
        )
        .unwrap();
        for k in 0..7 {
            assert_eq!(doubled.row(0)[k], base.row(0)[k]);
            assert!((doubled.row(1)[k] - 2.0 * base.row(1)[k]).abs() < 1e-15);
        }
        // Central differences on the loss.
        let h = 1e-6;
        let spec = LossSpec::new([0.5, 1.5, 1.0, 1.0, 1.0, 1.0, 1.0], 0.1).unwrap();
        let smooth = [true, false];
        let g = logits_grad(&z, &labels, &smooth, &spec).unwrap();
        for i in 0..14 {
            let mut up = z.clone();
            up.data_mut()[i] += h;
            let mut dn = z.clone();
            dn.data_mut()[i] -= h;
            let num = (loss_from_logits(&up, &labels, &smooth, &spec).unwrap()
                - loss_from_logits(&dn, &labels, &smooth, &spec).unwrap())
                / (2.0 * h);
            assert!(
                (num - g.data()[i]).abs() < 1e-8,
                "{i}: {num} vs {}",
                g.data()[i]
            );
        }
    }
}
