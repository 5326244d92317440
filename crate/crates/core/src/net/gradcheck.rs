//! Central finite-difference check of the analytic gradients.
//!
//! A perturbed parameter only changes the layers downstream of it, so each
//! probe starts from the affected stage.

use rand::seq::index;

use super::kernels::{conv_forward, dense_forward, ConvDims};
use super::loss::{loss_from_logits, softmax_row, LossSpec, PROB_FLOOR};
use super::model::{backward, forward, Dropout};
use super::params::{
    NetParams, Weights, COLS1, CONV1_LEN, CONV1_OUT, CONV2_OUT, FLAT, HIDDEN, KERNEL, ROWS1,
    TENSOR_NAMES,
};
use super::tensor::Tensor;
use crate::datamodel::{ClassId, CHANNELS, COLS, FIELD_LEN, N_CLASSES, ROWS};
use crate::error::{Error, Result};
use crate::seeds;

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

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    /// Finite-difference step.
    pub h: f64,
    /// Denominator floor of the relative error, so that gradients that are
    /// zero up to rounding are compared in absolute terms.
    pub floor: f64,
    /// Check at most this many entries per tensor (chosen at random);
    /// `None` checks every entry.
    pub max_per_tensor: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            h: 1e-5,
            floor: 1e-4,
            max_per_tensor: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: &'static str,
    pub checked: usize,
    /// Entries skipped because the ±h probes saw different ReLU patterns.
    pub kinks: usize,
    pub max_rel_err: f64,
    pub worst_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.tensors
            .iter()
            .map(|t| t.max_rel_err)
            .fold(0.0, f64::max)
    }

    pub fn checked(&self) -> usize {
        self.tensors.iter().map(|t| t.checked).sum()
    }

    pub fn kinks(&self) -> usize {
        self.tensors.iter().map(|t| t.kinks).sum()
    }
}

/// `|a − n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Forward state of the unperturbed network; `z*` are pre-activations.
struct Base {
    z1: Vec<f64>,
    a1: Vec<f64>,
    z2: Vec<f64>,
    dropped: Vec<f64>,
    z3: Vec<f64>,
    hidden: Vec<f64>,
    logits: Vec<f64>,
}

struct Probe<'a> {
    batch: usize,
    input: &'a [f64],
    mask: Vec<f64>,
    labels: &'a [ClassId],
    smooth: &'a [bool],
    spec: &'a LossSpec,
    w: &'a Weights,
    base: Base,
}

fn relu_copy(z: &[f64]) -> Vec<f64> {
    z.iter().map(|v| v.max(0.0)).collect()
}

/// Zero `dz` where the unit is inactive. `None` when `z + dz` and `z − dz`
/// fall on different sides of zero for some unit (a kink).
fn gate(z: &[f64], dz: &mut [f64]) -> Option<()> {
    for (zi, d) in z.iter().zip(dz.iter_mut()) {
        let (up, down) = (zi + *d > 0.0, zi - *d > 0.0);
        if up != down {
            return None;
        }
        if !up {
            *d = 0.0;
        }
    }
    Some(())
}

/// Perturbation of output plane `o` of a convolution whose kernel entry
/// `(o, c, ky, kx)` moves by `h`.
fn conv_weight_delta(
    d: ConvDims,
    input: &[f64],
    in_len: usize,
    out_len: usize,
    batch: usize,
    idx: usize,
    h: f64,
) -> Vec<f64> {
    let kk = KERNEL * KERNEL;
    let (o, c, ky, kx) = (
        idx / (d.c_in * kk),
        idx / kk % d.c_in,
        idx % kk / KERNEL,
        idx % KERNEL,
    );
    let (or, oc) = (d.out_rows(), d.out_cols());
    let mut dz = vec![0.0; batch * out_len];
    for b in 0..batch {
        let src = &input[b * in_len + c * d.rows * d.cols..][..d.rows * d.cols];
        let plane = &mut dz[b * out_len + o * or * oc..][..or * oc];
        for y in 0..or {
            for x in 0..oc {
                plane[y * oc + x] = h * src[(y + ky) * d.cols + x + kx];
            }
        }
    }
    dz
}

fn conv_bias_delta(d: ConvDims, out_len: usize, batch: usize, o: usize, h: f64) -> Vec<f64> {
    let plane = d.out_rows() * d.out_cols();
    let mut dz = vec![0.0; batch * out_len];
    for b in 0..batch {
        dz[b * out_len + o * plane..][..plane].fill(h);
    }
    dz
}

impl<'a> Probe<'a> {
    #[allow(clippy::too_many_arguments)]
    fn new(
        w: &'a Weights,
        input: &'a [f64],
        batch: usize,
        mask: Vec<f64>,
        labels: &'a [ClassId],
        smooth: &'a [bool],
        spec: &'a LossSpec,
    ) -> Self {
        let mut z1 = vec![0.0; batch * CONV1_LEN];
        let mut z2 = vec![0.0; batch * FLAT];
        let mut z3 = vec![0.0; batch * HIDDEN];
        let mut logits = vec![0.0; batch * N_CLASSES];
        for b in 0..batch {
            conv_forward(
                CONV1,
                &input[b * FIELD_LEN..][..FIELD_LEN],
                w.conv1_w.data(),
                w.conv1_b.data(),
                &mut z1[b * CONV1_LEN..][..CONV1_LEN],
            );
        }
        let a1 = relu_copy(&z1);
        for b in 0..batch {
            conv_forward(
                CONV2,
                &a1[b * CONV1_LEN..][..CONV1_LEN],
                w.conv2_w.data(),
                w.conv2_b.data(),
                &mut z2[b * FLAT..][..FLAT],
            );
        }
        let dropped: Vec<f64> = relu_copy(&z2)
            .iter()
            .zip(&mask)
            .map(|(a, m)| a * m)
            .collect();
        for b in 0..batch {
            dense_forward(
                &dropped[b * FLAT..][..FLAT],
                w.dense1_w.data(),
                w.dense1_b.data(),
                &mut z3[b * HIDDEN..][..HIDDEN],
            );
        }
        let hidden = relu_copy(&z3);
        for b in 0..batch {
            dense_forward(
                &hidden[b * HIDDEN..][..HIDDEN],
                w.dense2_w.data(),
                w.dense2_b.data(),
                &mut logits[b * N_CLASSES..][..N_CLASSES],
            );
        }
        Self {
            batch,
            input,
            mask,
            labels,
            smooth,
            spec,
            w,
            base: Base {
                z1,
                a1,
                z2,
                dropped,
                z3,
                hidden,
                logits,
            },
        }
    }

    fn through_z1(&self, mut dz1: Vec<f64>) -> Option<Vec<f64>> {
        gate(&self.base.z1, &mut dz1)?;
        let mut dz2 = vec![0.0; self.batch * FLAT];
        let zero = [0.0; CONV2_OUT];
        for b in 0..self.batch {
            conv_forward(
                CONV2,
                &dz1[b * CONV1_LEN..][..CONV1_LEN],
                self.w.conv2_w.data(),
                &zero,
                &mut dz2[b * FLAT..][..FLAT],
            );
        }
        self.through_z2(dz2)
    }

    fn through_z2(&self, mut dz2: Vec<f64>) -> Option<Vec<f64>> {
        gate(&self.base.z2, &mut dz2)?;
        for (d, m) in dz2.iter_mut().zip(&self.mask) {
            *d *= m;
        }
        let mut dz3 = vec![0.0; self.batch * HIDDEN];
        let zero = [0.0; HIDDEN];
        for b in 0..self.batch {
            dense_forward(
                &dz2[b * FLAT..][..FLAT],
                self.w.dense1_w.data(),
                &zero,
                &mut dz3[b * HIDDEN..][..HIDDEN],
            );
        }
        self.through_z3(dz3)
    }

    fn through_z3(&self, mut dz3: Vec<f64>) -> Option<Vec<f64>> {
        gate(&self.base.z3, &mut dz3)?;
        let mut dl = vec![0.0; self.batch * N_CLASSES];
        let zero = [0.0; N_CLASSES];
        for b in 0..self.batch {
            dense_forward(
                &dz3[b * HIDDEN..][..HIDDEN],
                self.w.dense2_w.data(),
                &zero,
                &mut dl[b * N_CLASSES..][..N_CLASSES],
            );
        }
        Some(dl)
    }

    /// Logit change when entry `idx` of tensor `t` moves by `h`, or `None`
    /// at a kink. The change for `−h` is its exact negation.
    fn logit_delta(&self, t: usize, idx: usize, h: f64) -> Option<Vec<f64>> {
        let b = self.batch;
        match t {
            0 => self.through_z1(conv_weight_delta(
                CONV1, self.input, FIELD_LEN, CONV1_LEN, b, idx, h,
            )),
            1 => self.through_z1(conv_bias_delta(CONV1, CONV1_LEN, b, idx, h)),
            2 => self.through_z2(conv_weight_delta(
                CONV2,
                &self.base.a1,
                CONV1_LEN,
                FLAT,
                b,
                idx,
                h,
            )),
            3 => self.through_z2(conv_bias_delta(CONV2, FLAT, b, idx, h)),
            4 | 5 => {
                let mut dz3 = vec![0.0; b * HIDDEN];
                let j = if t == 4 { idx / FLAT } else { idx };
                for i in 0..b {
                    dz3[i * HIDDEN + j] = if t == 4 {
                        h * self.base.dropped[i * FLAT + idx % FLAT]
                    } else {
                        h
                    };
                }
                self.through_z3(dz3)
            }
            _ => {
                let mut dl = vec![0.0; b * N_CLASSES];
                let k = if t == 6 { idx / HIDDEN } else { idx };
                for i in 0..b {
                    dl[i * N_CLASSES + k] = if t == 6 {
                        h * self.base.hidden[i * HIDDEN + idx % HIDDEN]
                    } else {
                        h
                    };
                }
                Some(dl)
            }
        }
    }

    /// `L(z + dl) − L(z − dl)` around the base logits, computed from
    /// `2·dl` so that rounding in the loss value itself cancels.
    fn loss_difference(&self, dl: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for i in 0..self.batch {
            let z = &self.base.logits[i * N_CLASSES..][..N_CLASSES];
            let d = &dl[i * N_CLASSES..][..N_CLASSES];
            let zu: Vec<f64> = z.iter().zip(d).map(|(a, b)| a + b).collect();
            let zd: Vec<f64> = z.iter().zip(d).map(|(a, b)| a - b).collect();
            let pd = softmax_row(&zd);
            if softmax_row(&zu).iter().chain(&pd).any(|&p| p < PROB_FLOOR) {
                // The probability clamp is active; difference the clamped losses.
                let labels = &self.labels[i..=i];
                let smooth = &self.smooth[i..=i];
                let l = |z: Vec<f64>| -> Result<f64> {
                    loss_from_logits(
                        &Tensor::from_vec(&[1, N_CLASSES], z)?,
                        labels,
                        smooth,
                        self.spec,
                    )
                };
                total += l(zu)? - l(zd)?;
                continue;
            }
            let (w, q) = self.spec.target(self.labels[i], self.smooth[i]);
            let mut lse = 0.0f64;
            let mut target = 0.0;
            for k in 0..N_CLASSES {
                let dz = 2.0 * d[k];
                lse += pd[k] * dz.exp_m1();
                target += q[k] * dz;
            }
            total += w * (lse.ln_1p() - target);
        }
        Ok(total / self.batch as f64)
    }
}

/// Compare `backward` against central differences for the given batch.
/// `mask` is a frozen dropout mask; `None` disables dropout.
///
/// With the ReLU pattern fixed, the logits are affine in any single
/// parameter. Each probe therefore pushes only the perturbation through the
/// layers above the parameter and adds it to the unperturbed logits, which
/// evaluates `L(θ ± h)` without the rounding noise of recomputing every sum.
/// Entries whose `±h` probes straddle a ReLU kink are skipped and counted.
pub fn grad_check(
    params: &NetParams,
    batch: &Tensor,
    labels: &[ClassId],
    smooth: &[bool],
    spec: &LossSpec,
    mask: Option<&[f64]>,
    config: &GradCheckConfig,
) -> Result<GradCheckReport> {
    let dropout = match mask {
        Some(m) => Dropout::Frozen(m),
        None => Dropout::Off,
    };
    let (_, cache) = forward(params, batch, dropout)?;
    let analytic = backward(params, &cache, labels, smooth, spec)?;
    if config.h.is_nan() || config.h <= 0.0 {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let b = cache.batch_size();
    let mask = mask.map_or_else(|| vec![1.0; b * FLAT], <[f64]>::to_vec);
    let probe = Probe::new(&params.weights, batch.data(), b, mask, labels, smooth, spec);

    let mut report = GradCheckReport {
        tensors: Vec::new(),
    };
    for (t, name) in TENSOR_NAMES.iter().enumerate() {
        let len = params.weights.tensors()[t].len();
        let indices: Vec<usize> = match config.max_per_tensor {
            Some(k) if k < len => {
                let mut rng = seeds::rng(config.seed, "gradcheck", t as u64);
                let mut v = index::sample(&mut rng, len, k).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..len).collect(),
        };
        let mut check = TensorCheck {
            name,
            checked: 0,
            kinks: 0,
            max_rel_err: 0.0,
            worst_index: 0,
        };
        for &idx in &indices {
            let Some(dl) = probe.logit_delta(t, idx, config.h) else {
                check.kinks += 1;
                continue;
            };
            let numeric = probe.loss_difference(&dl)? / (2.0 * config.h);
            let err = relative_error(analytic.tensors()[t].data()[idx], numeric, config.floor);
            check.checked += 1;
            if err > check.max_rel_err {
                check.max_rel_err = err;
                check.worst_index = idx;
            }
        }
        report.tensors.push(check);
    }
    Ok(report)
}
