//! Network parameters and their initialization.

use rand_distr::{Distribution, Normal};

use super::tensor::Tensor;
use crate::datamodel::{CHANNELS, COLS, N_CLASSES, ROWS};
use crate::error::{Error, Result};
use crate::seeds;

pub const KERNEL: usize = 5;
pub const CONV1_OUT: usize = 8;
pub const CONV2_OUT: usize = 16;
pub const ROWS1: usize = ROWS - KERNEL + 1;
pub const COLS1: usize = COLS - KERNEL + 1;
pub const ROWS2: usize = ROWS1 - KERNEL + 1;
pub const COLS2: usize = COLS1 - KERNEL + 1;
pub const CONV1_LEN: usize = CONV1_OUT * ROWS1 * COLS1;
pub const FLAT: usize = CONV2_OUT * ROWS2 * COLS2;
pub const HIDDEN: usize = 64;

const _: () = assert!(ROWS1 == 12 && COLS1 == 25 && ROWS2 == 8 && COLS2 == 21);
const _: () = assert!(FLAT == 2688);

pub const TENSOR_NAMES: [&str; 8] = [
    "conv1.weight",
    "conv1.bias",
    "conv2.weight",
    "conv2.bias",
    "dense1.weight",
    "dense1.bias",
    "dense2.weight",
    "dense2.bias",
];

pub fn tensor_shapes() -> [Vec<usize>; 8] {
    [
        vec![CONV1_OUT, CHANNELS, KERNEL, KERNEL],
        vec![CONV1_OUT],
        vec![CONV2_OUT, CONV1_OUT, KERNEL, KERNEL],
        vec![CONV2_OUT],
        vec![HIDDEN, FLAT],
        vec![HIDDEN],
        vec![N_CLASSES, HIDDEN],
        vec![N_CLASSES],
    ]
}

/// All trainable buffers of the network. Also used for gradients and Adam
/// moments, which share the layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub conv1_w: Tensor,
    pub conv1_b: Tensor,
    pub conv2_w: Tensor,
    pub conv2_b: Tensor,
    pub dense1_w: Tensor,
    pub dense1_b: Tensor,
    pub dense2_w: Tensor,
    pub dense2_b: Tensor,
}

impl Weights {
    pub fn zeros() -> Self {
        let [a, b, c, d, e, f, g, h] = tensor_shapes().map(|s| Tensor::zeros(&s));
        Weights {
            conv1_w: a,
            conv1_b: b,
            conv2_w: c,
            conv2_b: d,
            dense1_w: e,
            dense1_b: f,
            dense2_w: g,
            dense2_b: h,
        }
    }

    /// Build from tensors in declaration order, checking every shape.
    pub fn from_tensors(tensors: Vec<Tensor>) -> Result<Self> {
        let shapes = tensor_shapes();
        if tensors.len() != shapes.len() {
            return Err(Error::Shape(format!(
                "expected 8 tensors, got {}",
                tensors.len()
            )));
        }
        for ((t, s), name) in tensors.iter().zip(&shapes).zip(TENSOR_NAMES) {
            if t.shape() != s.as_slice() {
                return Err(Error::Shape(format!(
                    "{name}: shape {:?}, expected {s:?}",
                    t.shape()
                )));
            }
        }
        let mut it = tensors.into_iter();
        let mut next = || it.next().expect("length checked");
        Ok(Weights {
            conv1_w: next(),
            conv1_b: next(),
            conv2_w: next(),
            conv2_b: next(),
            dense1_w: next(),
            dense1_b: next(),
            dense2_w: next(),
            dense2_b: next(),
        })
    }

    pub fn tensors(&self) -> [&Tensor; 8] {
        [
            &self.conv1_w,
            &self.conv1_b,
            &self.conv2_w,
            &self.conv2_b,
            &self.dense1_w,
            &self.dense1_b,
            &self.dense2_w,
            &self.dense2_b,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 8] {
        [
            &mut self.conv1_w,
            &mut self.conv1_b,
            &mut self.conv2_w,
            &mut self.conv2_b,
            &mut self.dense1_w,
            &mut self.dense1_b,
            &mut self.dense2_w,
            &mut self.dense2_b,
        ]
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.all_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    pub weights: Weights,
    pub dropout_rate: f64,
}

impl NetParams {
    pub fn new(weights: Weights, dropout_rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::invalid(format!(
                "dropout rate {dropout_rate} not in [0, 1)"
            )));
        }
        Ok(Self {
            weights,
            dropout_rate,
        })
    }

    /// All-zero weights; mostly useful in tests.
    pub fn zeros(dropout_rate: f64) -> Result<Self> {
        Self::new(Weights::zeros(), dropout_rate)
    }
}

/// He initialization: weights ~ N(0, 2 / fan_in), biases zero.
pub fn init_params(seed: u64, dropout_rate: f64) -> Result<NetParams> {
    let mut weights = Weights::zeros();
    let fan_ins = [
        CHANNELS * KERNEL * KERNEL,
        CONV1_OUT * KERNEL * KERNEL,
        FLAT,
        HIDDEN,
    ];
    let layers = [
        &mut weights.conv1_w,
        &mut weights.conv2_w,
        &mut weights.dense1_w,
        &mut weights.dense2_w,
    ];
    for (i, (t, fan_in)) in layers.into_iter().zip(fan_ins).enumerate() {
        let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
        let mut rng = seeds::rng(seed, "init", i as u64);
        for v in t.data_mut() {
            *v = normal.sample(&mut rng);
        }
    }
    NetParams::new(weights, dropout_rate)
}
