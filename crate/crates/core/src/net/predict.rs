//! A trained classifier bundled with its input standardization, and inference.

use super::loss::{softmax_row, LossSpec};
use super::model::{forward, Dropout};
use super::params::NetParams;
use super::standardize::Standardizer;
use super::tensor::Tensor;
use crate::datamodel::{Dataset, CHANNELS, COLS, FIELD_LEN, N_CLASSES, ROWS};
use crate::error::{Error, Result};
use crate::smoothing::ProbSeries;

/// Days per forward call during inference.
pub const PREDICT_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub params: NetParams,
    pub standardizer: Standardizer,
    pub loss_spec: LossSpec,
    pub seed: u64,
    /// Resolved configuration that produced the model, as `key=value` lines.
    pub provenance: String,
}

/// Eval-mode class probabilities for every day of `dataset`.
pub fn predict_probs(model: &TrainedModel, dataset: &Dataset) -> Result<ProbSeries> {
    predict_chunked(model, dataset, PREDICT_CHUNK)
}

/// As [`predict_probs`] with an explicit chunk size.
pub fn predict_chunked(
    model: &TrainedModel,
    dataset: &Dataset,
    chunk: usize,
) -> Result<ProbSeries> {
    let start = dataset
        .start_date()
        .ok_or_else(|| Error::invalid("cannot predict on an empty dataset"))?;
    if chunk == 0 {
        return Err(Error::invalid("chunk size must be >= 1"));
    }
    let mut rows: Vec<[f64; N_CLASSES]> = Vec::with_capacity(dataset.len());
    let all: Vec<usize> = (0..dataset.len()).collect();
    for idx in all.chunks(chunk) {
        let mut data = Vec::with_capacity(idx.len() * FIELD_LEN);
        model.standardizer.apply_into(dataset, idx, &mut data);
        let x = Tensor::from_vec(&[idx.len(), CHANNELS, ROWS, COLS], data)?;
        let (z, _) = forward(&model.params, &x, Dropout::Off)?;
        rows.extend((0..idx.len()).map(|i| softmax_row(z.row(i))));
    }
    ProbSeries::new(start, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::params::init_params;
    use crate::synth::{generate, SynthConfig};

    #[test]
    fn batched_and_single_day_agree() {
        let (data, _) = generate(&SynthConfig {
            n_days: 40,
            seed: 1,
            ..SynthConfig::default()
        })
        .unwrap();
        let model = TrainedModel {
            params: init_params(2, 0.3).unwrap(),
            standardizer: Standardizer::fit(&data).unwrap(),
            loss_spec: LossSpec::uniform(0.1).unwrap(),
            seed: 2,
            provenance: String::new(),
        };
        let a = predict_probs(&model, &data).unwrap();
        let b = predict_chunked(&model, &data, 1).unwrap();
        assert_eq!(a.len(), 40);
        assert_eq!(a.start_date(), data.start_date().unwrap());
        for (ra, rb) in a.rows().iter().zip(b.rows()) {
            assert!((ra.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (x, y) in ra.iter().zip(rb) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        assert_eq!(a, predict_probs(&model, &data).unwrap());
    }
}
