//! Seeded random search over learning rate and dropout rate.

use rand::Rng;

use super::loss::LossSpec;
use super::train::{train, Examples, TrainConfig};
use crate::error::{Error, Result};
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSpace {
    /// Sampled log-uniformly.
    pub learning_rate: (f64, f64),
    /// Sampled uniformly.
    pub dropout_rate: (f64, f64),
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            learning_rate: (1e-4, 1e-2),
            dropout_rate: (0.0, 0.5),
        }
    }
}

impl SearchSpace {
    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.learning_rate;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::invalid(format!("learning rate range {lo}..{hi}")));
        }
        let (lo, hi) = self.dropout_rate;
        if !(lo >= 0.0 && hi >= lo && hi < 1.0) {
            return Err(Error::invalid(format!("dropout range {lo}..{hi}")));
        }
        Ok(())
    }

    /// The first `budget` points of the search sequence for `seed`.
    pub fn sample(&self, budget: usize, seed: u64) -> Vec<(f64, f64)> {
        let mut rng = seeds::rng(seed, "tune", 0);
        let (lr_lo, lr_hi) = (self.learning_rate.0.ln(), self.learning_rate.1.ln());
        let (d_lo, d_hi) = self.dropout_rate;
        (0..budget)
            .map(|_| {
                let lr = (lr_lo + (lr_hi - lr_lo) * rng.random::<f64>()).exp();
                let dr = d_lo + (d_hi - d_lo) * rng.random::<f64>();
                (lr, dr)
            })
            .collect()
    }
}

/// One train/validation split given as positions into a shared pool.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub learning_rate: f64,
    pub dropout_rate: f64,
    /// Best validation loss of each split.
    pub split_losses: Vec<f64>,
    /// Mean of `split_losses`; the selection score.
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneOutcome {
    pub best: usize,
    pub trials: Vec<Trial>,
}

impl TuneOutcome {
    pub fn best_trial(&self) -> &Trial {
        &self.trials[self.best]
    }
}

/// Score `budget` sampled configurations by their mean best validation loss
/// over `splits`; ties go to the earlier trial.
pub fn tune(
    pool: &Examples,
    splits: &[Split],
    spec: &LossSpec,
    base: &TrainConfig,
    space: &SearchSpace,
    budget: usize,
    seed: u64,
) -> Result<TuneOutcome> {
    if budget == 0 {
        return Err(Error::invalid("tuning budget must be >= 1"));
    }
    if splits.is_empty() {
        return Err(Error::invalid("tuning needs at least one split"));
    }
    space.validate()?;
    let mut trials = Vec::with_capacity(budget);
    for (i, (lr, dr)) in space.sample(budget, seed).into_iter().enumerate() {
        let config = TrainConfig {
            learning_rate: lr,
            dropout_rate: dr,
            ..*base
        };
        let mut split_losses = Vec::with_capacity(splits.len());
        for split in splits {
            let out = train(
                &pool.subset(&split.train)?,
                &pool.subset(&split.val)?,
                spec,
                &config,
            )?;
            split_losses.push(out.best_val_loss());
        }
        let val_loss = split_losses.iter().sum::<f64>() / split_losses.len() as f64;
        log::info!("trial {i}: lr {lr:.3e} dropout {dr:.3} val loss {val_loss:.5}");
        trials.push(Trial {
            learning_rate: lr,
            dropout_rate: dr,
            split_losses,
            val_loss,
        });
    }
    let best = (0..trials.len())
        .reduce(|a, b| {
            if trials[b].val_loss < trials[a].val_loss {
                b
            } else {
                a
            }
        })
        .expect("budget >= 1");
    Ok(TuneOutcome { best, trials })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::boundary_mask;
    use crate::net::Standardizer;
    use crate::synth::{generate, SynthConfig};

    #[test]
    fn samples_stay_in_range_and_are_seeded() {
        let s = SearchSpace::default();
        let a = s.sample(200, 5);
        assert_eq!(a, s.sample(200, 5));
        assert_ne!(a, s.sample(200, 6));
        assert!(a
            .iter()
            .all(|(lr, d)| (1e-4..=1e-2).contains(lr) && (0.0..=0.5).contains(d)));
        // Log-uniform: roughly half the draws fall below the geometric midpoint 1e-3.
        let below = a.iter().filter(|(lr, _)| *lr < 1e-3).count();
        assert!((70..=130).contains(&below));
        assert_eq!(s.sample(3, 5)[..], a[..3]);
    }

    #[test]
    fn best_trial_is_argmin() {
        let (data, labels) = generate(&SynthConfig {
            n_days: 60,
            seed: 2,
            ..SynthConfig::default()
        })
        .unwrap();
        let mask = boundary_mask(&labels.labels);
        let idx: Vec<usize> = (0..60).collect();
        let pool = Examples::select(
            &data,
            &labels.labels,
            &mask,
            &idx,
            &Standardizer::fit(&data).unwrap(),
        )
        .unwrap();
        let splits = [Split {
            train: (0..40).collect(),
            val: (40..60).collect(),
        }];
        let spec = LossSpec::uniform(0.1).unwrap();
        let base = TrainConfig {
            max_epochs: 1,
            batch_size: 20,
            ..TrainConfig::default()
        };
        let space = SearchSpace::default();
        let one = tune(&pool, &splits, &spec, &base, &space, 1, 3).unwrap();
        assert_eq!(one.trials.len(), 1);
        assert_eq!(
            (one.trials[0].learning_rate, one.trials[0].dropout_rate),
            space.sample(1, 3)[0]
        );
        let out = tune(&pool, &splits, &spec, &base, &space, 3, 3).unwrap();
        assert!(out
            .trials
            .iter()
            .all(|t| out.best_trial().val_loss <= t.val_loss));
        assert_eq!(out.trials[0], one.trials[0]);
        assert!(tune(&pool, &splits, &spec, &base, &space, 0, 3).is_err());
    }
}
