//! Bias-corrected Adam.

use super::params::Weights;
use super::TENSOR_NAMES;
use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPS_HAT: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Weights,
    pub v: Weights,
}

impl AdamState {
    pub fn new() -> Self {
        Self {
            step: 0,
            m: Weights::zeros(),
            v: Weights::zeros(),
        }
    }
}

impl Default for AdamState {
    fn default() -> Self {
        Self::new()
    }
}

pub fn adam_step(
    params: &mut Weights,
    grads: &Weights,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    for (t, name) in grads.tensors().iter().zip(TENSOR_NAMES) {
        if let Some(i) = t.data().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "gradient of {name}[{i}] is {} at step {}",
                t.data()[i],
                state.step + 1
            )));
        }
    }
    state.step += 1;
    let c1 = 1.0 - BETA1.powi(state.step as i32);
    let c2 = 1.0 - BETA2.powi(state.step as i32);
    let ps = params.tensors_mut();
    let ms = state.m.tensors_mut();
    let vs = state.v.tensors_mut();
    for (((p, g), m), v) in ps.into_iter().zip(grads.tensors()).zip(ms).zip(vs) {
        for (((pi, gi), mi), vi) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut().iter_mut())
            .zip(v.data_mut().iter_mut())
        {
            *mi = BETA1 * *mi + (1.0 - BETA1) * gi;
            *vi = BETA2 * *vi + (1.0 - BETA2) * gi * gi;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            *pi -= lr * m_hat / (v_hat.sqrt() + EPS_HAT);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::params::init_params;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut w = init_params(1, 0.0).unwrap().weights;
        let before = w.clone();
        let mut s = AdamState::new();
        adam_step(&mut w, &Weights::zeros(), &mut s, 0.01).unwrap();
        assert_eq!(w, before);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut w = Weights::zeros();
        let mut g = Weights::zeros();
        g.dense2_b
            .data_mut()
            .copy_from_slice(&[0.5, -2.0, 1e-3, -1e-3, 10.0, -0.1, 0.0]);
        let mut s = AdamState::new();
        let lr = 1e-3;
        adam_step(&mut w, &g, &mut s, lr).unwrap();
        // m̂ = g and v̂ = g², so the step is lr·g/(|g| + eps_hat).
        for (p, gi) in w.dense2_b.data().iter().zip(g.dense2_b.data()) {
            let expected = -lr * gi / (gi.abs() + EPS_HAT);
            assert!((p - expected).abs() < 1e-15);
            if *gi != 0.0 {
                assert!((p.abs() - lr).abs() < lr * 1e-4);
            }
        }
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut w = Weights::zeros();
        let mut g = Weights::zeros();
        g.conv2_b.data_mut()[3] = f64::NAN;
        let mut s = AdamState::new();
        let err = adam_step(&mut w, &g, &mut s, 0.1).unwrap_err();
        assert!(err.to_string().contains("conv2.bias[3]"));
        assert_eq!(s.step, 0);
    }
}
