//! Per-channel standardization of input fields.

use crate::datamodel::{Dataset, CELLS, CHANNELS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Standardizer {
    pub mean: [f64; CHANNELS],
    pub std: [f64; CHANNELS],
}

impl Standardizer {
    /// Mean and population standard deviation of each channel over every
    /// cell of every day.
    pub fn fit(data: &Dataset) -> Result<Self> {
        Self::fit_indices(data, &(0..data.len()).collect::<Vec<_>>())
    }

    /// As [`Standardizer::fit`], over days `indices` only.
    pub fn fit_indices(data: &Dataset, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::invalid("cannot standardize an empty dataset"));
        }
        let n = (indices.len() * CELLS) as f64;
        let channel = |c: usize| {
            indices
                .iter()
                .flat_map(move |&i| data.samples()[i].field.channel(c))
        };
        let mut mean = [0.0; CHANNELS];
        let mut std = [0.0; CHANNELS];
        for c in 0..CHANNELS {
            let sum: f64 = channel(c).sum();
            mean[c] = sum / n;
            let ss: f64 = channel(c).map(|v| (v - mean[c]).powi(2)).sum();
            std[c] = (ss / n).sqrt();
            if std[c].is_nan() || std[c] <= 0.0 {
                return Err(Error::Numeric(format!("channel {c} has zero variance")));
            }
        }
        Ok(Self { mean, std })
    }

    pub fn identity() -> Self {
        Self {
            mean: [0.0; CHANNELS],
            std: [1.0; CHANNELS],
        }
    }

    /// Append the standardized values of every sample in `indices` to `out`.
    pub fn apply_into(&self, data: &Dataset, indices: &[usize], out: &mut Vec<f64>) {
        for &i in indices {
            let field = &data.samples()[i].field;
            for c in 0..CHANNELS {
                out.extend(
                    field
                        .channel(c)
                        .iter()
                        .map(|v| (v - self.mean[c]) / self.std[c]),
                );
            }
        }
    }
}
