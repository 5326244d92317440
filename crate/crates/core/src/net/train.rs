//! Mini-batch training with early stopping on validation loss.

use std::sync::Arc;

use rand::seq::SliceRandom;

use super::adam::{adam_step, AdamState};
use super::loss::{loss_from_logits, LossSpec};
use super::model::{backward, forward, Dropout};
use super::params::{init_params, NetParams};
use super::standardize::Standardizer;
use super::tensor::Tensor;
use crate::datamodel::{ClassId, Dataset, CHANNELS, COLS, FIELD_LEN, ROWS};
use crate::error::{Error, Result};
use crate::seeds;

/// Examples per forward call during evaluation.
const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub dropout_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            dropout_rate: 0.25,
            batch_size: 128,
            max_epochs: 35,
            patience: 6,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid(format!(
                "learning rate {} must be > 0",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::invalid(format!(
                "dropout rate {} not in [0, 1)",
                self.dropout_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be >= 1"));
        }
        if self.patience == 0 {
            return Err(Error::invalid("patience must be >= 1"));
        }
        if self.max_epochs == 0 {
            return Err(Error::invalid("max epochs must be >= 1"));
        }
        Ok(())
    }
}

/// Standardized inputs with their labels and label-smoothing flags.
///
/// The input buffer is shared, so subsets are cheap.
#[derive(Debug, Clone)]
pub struct Examples {
    inputs: Arc<[f64]>,
    rows: Vec<usize>,
    labels: Vec<ClassId>,
    smooth: Vec<bool>,
}

impl Examples {
    /// Days `indices` of `data`. `labels` and `smooth` are indexed like `data`,
    /// so boundary flags come from the full series rather than the subset.
    pub fn select(
        data: &Dataset,
        labels: &[ClassId],
        smooth: &[bool],
        indices: &[usize],
        standardizer: &Standardizer,
    ) -> Result<Self> {
        if labels.len() != data.len() || smooth.len() != data.len() {
            return Err(Error::Shape(format!(
                "{} days with {} labels and {} smoothing flags",
                data.len(),
                labels.len(),
                smooth.len()
            )));
        }
        if let Some(&i) = indices.iter().find(|&&i| i >= data.len()) {
            return Err(Error::invalid(format!("day index {i} out of range")));
        }
        let mut inputs = Vec::with_capacity(indices.len() * FIELD_LEN);
        standardizer.apply_into(data, indices, &mut inputs);
        Ok(Self {
            inputs: inputs.into(),
            rows: (0..indices.len()).collect(),
            labels: indices.iter().map(|&i| labels[i]).collect(),
            smooth: indices.iter().map(|&i| smooth[i]).collect(),
        })
    }

    /// Examples at `positions` of this set.
    pub fn subset(&self, positions: &[usize]) -> Result<Self> {
        if let Some(&i) = positions.iter().find(|&&i| i >= self.len()) {
            return Err(Error::invalid(format!("example {i} out of range")));
        }
        Ok(Self {
            inputs: Arc::clone(&self.inputs),
            rows: positions.iter().map(|&i| self.rows[i]).collect(),
            labels: positions.iter().map(|&i| self.labels[i]).collect(),
            smooth: positions.iter().map(|&i| self.smooth[i]).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn smooth(&self) -> &[bool] {
        &self.smooth
    }

    fn gather(&self, positions: impl Iterator<Item = usize>) -> Result<Tensor> {
        let mut data = Vec::new();
        let mut n = 0;
        for i in positions {
            let r = self.rows[i];
            data.extend_from_slice(&self.inputs[r * FIELD_LEN..(r + 1) * FIELD_LEN]);
            n += 1;
        }
        Tensor::from_vec(&[n, CHANNELS, ROWS, COLS], data)
    }
}

/// Eval-mode logits for every example, in chunks.
pub(crate) fn eval_logits(params: &NetParams, examples: &Examples) -> Result<Vec<Tensor>> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < examples.len() {
        let end = (start + EVAL_CHUNK).min(examples.len());
        let (z, _) = forward(params, &examples.gather(start..end)?, Dropout::Off)?;
        out.push(z);
        start = end;
    }
    Ok(out)
}

/// Mean loss and accuracy in eval mode.
pub fn evaluate_examples(
    params: &NetParams,
    examples: &Examples,
    spec: &LossSpec,
) -> Result<(f64, f64)> {
    if examples.is_empty() {
        return Err(Error::invalid("no examples to evaluate"));
    }
    let mut total = 0.0;
    let mut correct = 0usize;
    let mut start = 0;
    for z in eval_logits(params, examples)? {
        let n = z.shape()[0];
        let labels = &examples.labels[start..start + n];
        total += n as f64 * loss_from_logits(&z, labels, &examples.smooth[start..start + n], spec)?;
        for (i, y) in labels.iter().enumerate() {
            if crate::smoothing::argmax_row(z.row(i)) == y.index() {
                correct += 1;
            }
        }
        start += n;
    }
    Ok((
        total / examples.len() as f64,
        correct as f64 / examples.len() as f64,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Tracks the best validation loss; stops after `patience` epochs without
/// a strict improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: Option<usize>,
    waited: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: None,
            waited: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> StopDecision {
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = Some(epoch);
            self.waited = 0;
            return StopDecision::Improved;
        }
        self.waited += 1;
        if self.waited >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub params: NetParams,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainOutcome {
    pub fn best_val_loss(&self) -> f64 {
        self.history[self.best_epoch - 1].val_loss
    }
}

/// Train from a fresh initialization. Epochs are 1-based in the history.
pub fn train(
    train_set: &Examples,
    val_set: &Examples,
    spec: &LossSpec,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::invalid(
            "training and validation sets must be nonempty",
        ));
    }
    let mut params = init_params(config.seed, config.dropout_rate)?;
    let mut adam = AdamState::new();
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = params.clone();
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut stopped_early = false;
    for epoch in 1..=config.max_epochs {
        let mut shuffle_rng = seeds::rng(config.seed, "shuffle", epoch as u64);
        order.sort_unstable();
        order.shuffle(&mut shuffle_rng);
        let mut dropout_rng = seeds::rng(config.seed, "dropout", epoch as u64);
        let mut train_total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let x = train_set.gather(chunk.iter().copied())?;
            let labels: Vec<ClassId> = chunk.iter().map(|&i| train_set.labels[i]).collect();
            let smooth: Vec<bool> = chunk.iter().map(|&i| train_set.smooth[i]).collect();
            let (z, cache) = forward(&params, &x, Dropout::Sample(&mut dropout_rng))?;
            train_total += chunk.len() as f64 * loss_from_logits(&z, &labels, &smooth, spec)?;
            let grads = backward(&params, &cache, &labels, &smooth, spec)?;
            adam_step(&mut params.weights, &grads, &mut adam, config.learning_rate)?;
        }
        let (val_loss, val_accuracy) = evaluate_examples(&params, val_set, spec)?;
        if !val_loss.is_finite() {
            return Err(Error::Numeric(format!(
                "validation loss is {val_loss} at epoch {epoch}"
            )));
        }
        let record = EpochRecord {
            epoch,
            train_loss: train_total / train_set.len() as f64,
            val_loss,
            val_accuracy,
        };
        log::debug!(
            "epoch {epoch}: train {:.5} val {:.5} acc {:.4}",
            record.train_loss,
            val_loss,
            val_accuracy
        );
        history.push(record);
        match stopper.observe(epoch, val_loss) {
            StopDecision::Improved => best = params.clone(),
            StopDecision::Continue => {}
            StopDecision::Stop => {
                stopped_early = epoch < config.max_epochs;
                break;
            }
        }
    }
    Ok(TrainOutcome {
        params: best,
        history,
        best_epoch: stopper.best_epoch().expect("at least one epoch"),
        stopped_early,
    })
}
