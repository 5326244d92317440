//! Nested, year-grouped cross-validation and the smoothing ablation.

use std::collections::BTreeSet;
use std::thread;

use chrono::NaiveDate;

use super::folds::{plan_folds, years_of, FoldPlan, FoldRoles};
use super::metrics::{ConfusionMatrix, MetricsReport};
use crate::datamodel::{boundary_mask, frequencies, ClassId, Dataset, LabelSeries};
use crate::error::{Error, Result};
use crate::net::{
    predict_probs, train, tune, EpochRecord, Examples, LossSpec, SearchSpace, Split, Standardizer,
    TrainConfig, TrainedModel, Trial,
};
use crate::seeds;
use crate::smoothing::{argmax_series, transition_smooth_bounded};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AblationConfig {
    pub label_smoothing: bool,
    pub transition_smoothing: bool,
}

impl AblationConfig {
    pub const FINAL: AblationConfig = AblationConfig {
        label_smoothing: true,
        transition_smoothing: true,
    };

    /// Rows of the ablation table, in display order.
    pub const ALL: [AblationConfig; 4] = [
        AblationConfig::FINAL,
        AblationConfig {
            label_smoothing: false,
            transition_smoothing: true,
        },
        AblationConfig {
            label_smoothing: true,
            transition_smoothing: false,
        },
        AblationConfig {
            label_smoothing: false,
            transition_smoothing: false,
        },
    ];

    pub fn name(&self) -> &'static str {
        match (self.label_smoothing, self.transition_smoothing) {
            (true, true) => "Smoothed network",
            (false, true) => "No LS",
            (true, false) => "No TS",
            (false, false) => "No LS and TS",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    pub n_outer: usize,
    pub n_inner: usize,
    pub fold_seed: u64,
    /// Batch size, epochs, patience and training seed; its learning rate and
    /// dropout are used as-is when `budget` is 0.
    pub train: TrainConfig,
    pub space: SearchSpace,
    /// Random-search trials per outer fold; 0 skips tuning.
    pub budget: usize,
    pub tune_seed: u64,
    /// Inner folds scored per trial (at most `n_inner`).
    pub tune_folds: usize,
    pub smoothing_eps: f64,
    /// Cap on transition-smoothing passes; `None` iterates to a fixpoint
    /// (at most `T` passes).
    pub smoothing_passes: Option<usize>,
    /// Outer folds run concurrently.
    pub workers: usize,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            n_outer: 11,
            n_inner: 10,
            fold_seed: 0,
            train: TrainConfig::default(),
            space: SearchSpace::default(),
            budget: 10,
            tune_seed: 0,
            tune_folds: 10,
            smoothing_eps: 0.1,
            smoothing_passes: None,
            workers: 1,
        }
    }
}

impl CvConfig {
    fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.tune_folds == 0 || self.tune_folds > self.n_inner {
            return Err(Error::invalid(format!(
                "tune folds {} must lie in 1..={}",
                self.tune_folds, self.n_inner
            )));
        }
        if self.smoothing_passes == Some(0) {
            return Err(Error::invalid("smoothing passes must be >= 1"));
        }
        if self.workers == 0 {
            return Err(Error::invalid("workers must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.smoothing_eps) {
            return Err(Error::invalid(format!(
                "smoothing eps {} not in [0, 1)",
                self.smoothing_eps
            )));
        }
        Ok(())
    }
}

/// Which days each stage of a fold touched, as dataset indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldProvenance {
    pub test: Vec<usize>,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub tune: Vec<usize>,
    /// Days the input standardization was fitted on.
    pub standardize: Vec<usize>,
}

impl FoldProvenance {
    /// Test days that also served in any training, validation, tuning or
    /// standardization role.
    pub fn leaked(&self) -> Vec<usize> {
        let test: BTreeSet<usize> = self.test.iter().copied().collect();
        let mut used: BTreeSet<usize> = BTreeSet::new();
        for v in [&self.train, &self.val, &self.tune, &self.standardize] {
            used.extend(v.iter().filter(|i| test.contains(i)));
        }
        used.into_iter().collect()
    }
}

/// One outer fold, scored with and without transition smoothing.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldRun {
    pub fold: usize,
    pub test_years: Vec<i32>,
    pub label_smoothing: bool,
    pub learning_rate: f64,
    pub dropout_rate: f64,
    pub trials: Vec<Trial>,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub raw: ConfusionMatrix,
    pub smoothed: ConfusionMatrix,
    /// Days relabelled by transition smoothing.
    pub smoothing_changes: usize,
    pub unconverged_segments: usize,
    pub provenance: FoldProvenance,
}

impl FoldRun {
    pub fn confusion(&self, transition_smoothing: bool) -> &ConfusionMatrix {
        if transition_smoothing {
            &self.smoothed
        } else {
            &self.raw
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldFailure {
    pub fold: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub ablation: AblationConfig,
    pub plan: FoldPlan,
    /// Metrics of the elementwise mean of the per-fold confusion matrices.
    pub report: MetricsReport,
    pub fold_reports: Vec<(usize, MetricsReport)>,
    pub runs: Vec<FoldRun>,
    pub failures: Vec<FoldFailure>,
}

fn contiguous_segments(indices: &[usize]) -> Vec<std::ops::Range<usize>> {
    let mut out: Vec<std::ops::Range<usize>> = Vec::new();
    for &i in indices {
        match out.last_mut() {
            Some(r) if r.end == i => r.end += 1,
            _ => out.push(i..i + 1),
        }
    }
    out
}

/// Boundary flags computed separately inside each contiguous block of
/// `indices`, so no flag depends on a label outside the block. Indexed like
/// the full dataset; days outside `indices` are false.
fn segment_boundaries(labels: &[ClassId], indices: &[usize]) -> Vec<bool> {
    let mut mask = vec![false; labels.len()];
    for seg in contiguous_segments(indices) {
        for (i, b) in seg.clone().zip(boundary_mask(&labels[seg])) {
            mask[i] = b;
        }
    }
    mask
}

struct Job<'a> {
    data: &'a Dataset,
    labels: &'a [ClassId],
    dates: &'a [NaiveDate],
    plan: &'a FoldPlan,
    config: &'a CvConfig,
    label_smoothing: bool,
}

impl Job<'_> {
    fn run(&self, fold: usize) -> Result<FoldRun> {
        let config = self.config;
        let roles: FoldRoles = self.plan.roles(self.dates, fold)?;
        if roles.test.is_empty() || roles.train.is_empty() {
            return Err(Error::invalid(format!(
                "outer fold {fold} has an empty split"
            )));
        }
        let standardizer = Standardizer::fit_indices(self.data, &roles.train)?;
        let train_labels: Vec<ClassId> = roles.train.iter().map(|&i| self.labels[i]).collect();
        let eps = if self.label_smoothing {
            config.smoothing_eps
        } else {
            0.0
        };
        let spec = LossSpec::from_frequencies(&frequencies(&train_labels), eps)?;
        let smooth = if self.label_smoothing {
            segment_boundaries(self.labels, &roles.train)
        } else {
            vec![false; self.labels.len()]
        };
        let pool = Examples::select(self.data, self.labels, &smooth, &roles.train, &standardizer)?;
        let base = TrainConfig {
            seed: seeds::derive_indexed(config.train.seed, "fold-train", fold as u64),
            ..config.train
        };
        let splits: Vec<Split> = (0..config.tune_folds)
            .map(|k| Split {
                train: roles.inner_train(k),
                val: roles.inner[k].clone(),
            })
            .collect();

        let (mut learning_rate, mut dropout_rate, mut trials) =
            (base.learning_rate, base.dropout_rate, Vec::new());
        let mut tune_days = Vec::new();
        if config.budget > 0 {
            let tune_seed = seeds::derive_indexed(config.tune_seed, "fold-tune", fold as u64);
            let out = tune(
                &pool,
                &splits,
                &spec,
                &base,
                &config.space,
                config.budget,
                tune_seed,
            )?;
            learning_rate = out.best_trial().learning_rate;
            dropout_rate = out.best_trial().dropout_rate;
            trials = out.trials;
            let used: BTreeSet<usize> = splits
                .iter()
                .flat_map(|s| s.train.iter().chain(&s.val))
                .map(|&p| roles.train[p])
                .collect();
            tune_days = used.into_iter().collect();
        }

        let refit = &splits[0];
        let train_config = TrainConfig {
            learning_rate,
            dropout_rate,
            ..base
        };
        let outcome = train(
            &pool.subset(&refit.train)?,
            &pool.subset(&refit.val)?,
            &spec,
            &train_config,
        )?;
        let model = TrainedModel {
            params: outcome.params,
            standardizer,
            loss_spec: spec,
            seed: base.seed,
            provenance: String::new(),
        };

        let mut raw = ConfusionMatrix::default();
        let mut smoothed = ConfusionMatrix::default();
        let (mut smoothing_changes, mut unconverged_segments) = (0, 0);
        for seg in contiguous_segments(&roles.test) {
            let probs = predict_probs(&model, &self.data.slice(seg.clone()))?;
            let truth = &self.labels[seg.clone()];
            let (ts, report) =
                transition_smooth_bounded(&probs, config.smoothing_passes.unwrap_or(usize::MAX));
            smoothing_changes += report.total_changes();
            if !report.converged && !report.skipped {
                unconverged_segments += 1;
            }
            for ((a, s), t) in argmax_series(&probs)
                .labels
                .iter()
                .zip(&ts.labels)
                .zip(truth)
            {
                raw.record(*a, *t);
                smoothed.record(*s, *t);
            }
        }

        let to_days = |ps: &[usize]| -> Vec<usize> { ps.iter().map(|&p| roles.train[p]).collect() };
        Ok(FoldRun {
            fold,
            test_years: self.plan.test_years(fold).into_iter().collect(),
            label_smoothing: self.label_smoothing,
            learning_rate,
            dropout_rate,
            trials,
            history: outcome.history,
            best_epoch: outcome.best_epoch,
            raw,
            smoothed,
            smoothing_changes,
            unconverged_segments,
            provenance: FoldProvenance {
                test: roles.test.clone(),
                train: to_days(&refit.train),
                val: to_days(&refit.val),
                tune: tune_days,
                standardize: roles.train.clone(),
            },
        })
    }
}

fn check_inputs(data: &Dataset, labels: &LabelSeries) -> Result<Vec<NaiveDate>> {
    if data.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} days of fields, {} labels",
            data.len(),
            labels.len()
        )));
    }
    if data.start_date() != Some(labels.start_date) {
        return Err(Error::invalid("fields and labels start on different dates"));
    }
    Ok(data.dates().collect())
}

/// Run every outer fold, training once with the given label-smoothing
/// setting. Failed folds are reported rather than aborting the others.
fn run_folds(
    data: &Dataset,
    labels: &LabelSeries,
    config: &CvConfig,
    label_smoothing: bool,
) -> Result<(FoldPlan, Vec<FoldRun>, Vec<FoldFailure>)> {
    config.validate()?;
    let dates = check_inputs(data, labels)?;
    let plan = plan_folds(
        &years_of(dates.iter().copied()),
        config.n_outer,
        config.n_inner,
        config.fold_seed,
    )?;
    let job = Job {
        data,
        labels: &labels.labels,
        dates: &dates,
        plan: &plan,
        config,
        label_smoothing,
    };
    let mut results: Vec<Option<Result<FoldRun>>> = (0..config.n_outer).map(|_| None).collect();
    let workers = config.workers.min(config.n_outer);
    if workers == 1 {
        for (f, slot) in results.iter_mut().enumerate() {
            *slot = Some(job.run(f));
        }
    } else {
        thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let job = &job;
                    scope.spawn(move || {
                        (w..config.n_outer)
                            .step_by(workers)
                            .map(|f| (f, job.run(f)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (f, r) in h.join().expect("fold worker panicked") {
                    results[f] = Some(r);
                }
            }
        });
    }
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (fold, r) in results.into_iter().enumerate() {
        match r.expect("every fold scheduled") {
            Ok(run) => runs.push(run),
            Err(e) => {
                log::error!("outer fold {fold} failed: {e}");
                failures.push(FoldFailure {
                    fold,
                    message: e.to_string(),
                })
            }
        }
    }
    if runs.is_empty() {
        return Err(Error::Numeric(format!(
            "every outer fold failed; first: {}",
            failures.first().map_or("", |f| f.message.as_str())
        )));
    }
    Ok((plan, runs, failures))
}

fn summarize(
    ablation: AblationConfig,
    plan: FoldPlan,
    runs: Vec<FoldRun>,
    failures: Vec<FoldFailure>,
) -> Result<CvOutcome> {
    let matrices: Vec<ConfusionMatrix> = runs
        .iter()
        .map(|r| *r.confusion(ablation.transition_smoothing))
        .collect();
    let report = MetricsReport::from_confusion(ConfusionMatrix::mean(&matrices)?);
    let fold_reports = runs
        .iter()
        .zip(&matrices)
        .map(|(r, m)| (r.fold, MetricsReport::from_confusion(*m)))
        .collect();
    Ok(CvOutcome {
        ablation,
        plan,
        report,
        fold_reports,
        runs,
        failures,
    })
}

pub fn nested_cv(
    data: &Dataset,
    labels: &LabelSeries,
    config: &CvConfig,
    ablation: AblationConfig,
) -> Result<CvOutcome> {
    let (plan, runs, failures) = run_folds(data, labels, config, ablation.label_smoothing)?;
    summarize(ablation, plan, runs, failures)
}

/// Outcomes for the four smoothing combinations in [`AblationConfig::ALL`]
/// order. Transition smoothing only post-processes predictions, so each
/// label-smoothing setting is trained once and scored both ways; this equals
/// running [`nested_cv`] four times with shared seeds.
pub fn ablation(data: &Dataset, labels: &LabelSeries, config: &CvConfig) -> Result<Vec<CvOutcome>> {
    let with_ls = run_folds(data, labels, config, true)?;
    let without_ls = run_folds(data, labels, config, false)?;
    AblationConfig::ALL
        .iter()
        .map(|a| {
            let (plan, runs, failures) = if a.label_smoothing {
                &with_ls
            } else {
                &without_ls
            };
            summarize(*a, plan.clone(), runs.clone(), failures.clone())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segments() {
        assert_eq!(
            contiguous_segments(&[0, 1, 2, 5, 6, 9]),
            vec![0..3, 5..7, 9..10]
        );
        assert!(contiguous_segments(&[]).is_empty());
    }

    #[test]
    fn boundaries_do_not_look_past_segments() {
        use ClassId::*;
        let labels = [Bm, Bm, Bm, Bm, Hna, Hna, Hna];
        let m = segment_boundaries(&labels, &[0, 1, 2, 5, 6]);
        assert_eq!(m, vec![true, false, true, false, false, true, true]);
    }

    #[test]
    fn ablation_names() {
        let names: Vec<&str> = AblationConfig::ALL.iter().map(|a| a.name()).collect();
        assert_eq!(
            names,
            ["Smoothed network", "No LS", "No TS", "No LS and TS"]
        );
    }
}
