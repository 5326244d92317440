//! Subcommand implementations.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use gwl_core::datamodel::{
    boundary_mask, class_frequencies, parse_fields, parse_labels, write_fields, write_labels,
    CatalogMapping, LabelCoding,
};
use gwl_core::evalcv::{
    ablation_table, comparison_table, confusion_table, fold_summary, metric_records, nested_cv,
    parse_metric_records, AblationConfig, CvConfig, CvOutcome,
};
use gwl_core::net::{
    load_checkpoint, predict_probs, save_checkpoint, train as fit, tune as search, Examples,
    LossSpec, SearchSpace, Split, Standardizer, TrainConfig, TrainedModel,
};
use gwl_core::smoothing::{parse_probs, transition_smooth_bounded, write_probs};
use gwl_core::synth::{generate, SynthConfig};
use gwl_core::{ClassId, Dataset, Error, LabelSeries};

use crate::config::{FileConfig, Provenance, Resolver};
use crate::error::{as_usage, CliError, CliResult};
use crate::{
    CvCmd, DataArgs, PredictArgs, ReportArgs, SmoothArgs, SynthArgs, TrainArgs, TrainCmd, TuneCmd,
};

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, text).map_err(io)
}

fn arg_path(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{}{suffix}", path.display()))
}

fn with_comments(prov: &Provenance, body: &str) -> String {
    let mut s = prov.comment_block();
    s.push_str(body);
    s
}

/// Fields and labels covering the same days.
fn load_data(res: &mut Resolver, a: &DataArgs) -> CliResult<(Dataset, LabelSeries)> {
    let fields: String = res.required("fields", arg_path(&a.fields))?;
    let labels: String = res.required("labels", arg_path(&a.labels))?;
    let raw = res.switch("raw-labels", a.raw_labels)?;
    let mapping: Option<String> = res.optional("mapping", arg_path(&a.mapping))?;
    let coding = match (&mapping, raw) {
        (Some(m), _) => LabelCoding::Catalog(CatalogMapping::parse(&read_text(Path::new(m))?)?),
        (None, true) => LabelCoding::Catalog(CatalogMapping::default()),
        (None, false) => LabelCoding::Classes,
    };
    let data = parse_fields(&read_text(Path::new(&fields))?)?;
    let series = parse_labels(&read_text(Path::new(&labels))?, &coding)?;
    if data.start_date() != Some(series.start_date) || data.len() != series.len() {
        return Err(Error::Shape(format!(
            "fields cover {} days from {:?}, labels {} days from {}",
            data.len(),
            data.start_date(),
            series.len(),
            series.start_date
        ))
        .into());
    }
    Ok((data, series))
}

struct TrainSettings {
    config: TrainConfig,
    eps: f64,
}

fn train_settings(res: &mut Resolver, a: &TrainArgs) -> CliResult<TrainSettings> {
    let d = TrainConfig::default();
    let config = TrainConfig {
        seed: res.value("seed", a.seed, d.seed)?,
        max_epochs: res.value("epochs", a.epochs, d.max_epochs)?,
        batch_size: res.value("batch", a.batch, d.batch_size)?,
        learning_rate: res.value("lr", a.lr, d.learning_rate)?,
        dropout_rate: res.value("dropout", a.dropout, d.dropout_rate)?,
        patience: res.value("patience", a.patience, d.patience)?,
    };
    as_usage(config.validate())?;
    let eps: f64 = res.value("eps", a.eps, CvConfig::default().smoothing_eps)?;
    if !(0.0..1.0).contains(&eps) {
        return Err(CliError::usage(format!("--eps {eps} must lie in [0, 1)")));
    }
    let eps = if res.switch("no-label-smoothing", a.no_label_smoothing)? {
        0.0
    } else {
        eps
    };
    Ok(TrainSettings { config, eps })
}

/// Training and validation days, the validation part being the last
/// `val_years` calendar years.
struct HoldOut {
    train: Vec<usize>,
    val: Vec<usize>,
}

fn hold_out(data: &Dataset, val_years: usize) -> CliResult<HoldOut> {
    let years: Vec<i32> = data.dates().map(|d| d.year()).collect();
    let mut distinct = years.clone();
    distinct.dedup();
    if val_years == 0 || val_years >= distinct.len() {
        return Err(CliError::usage(format!(
            "--val-years must lie in 1..{} for {} years of data",
            distinct.len(),
            distinct.len()
        )));
    }
    let first_val = distinct[distinct.len() - val_years];
    let (train, val): (Vec<usize>, Vec<usize>) =
        (0..data.len()).partition(|&i| years[i] < first_val);
    Ok(HoldOut { train, val })
}

/// Boundary flags computed within the training block and the validation
/// block separately.
fn block_boundaries(labels: &[ClassId], split: &HoldOut, eps: f64) -> Vec<bool> {
    let mut mask = vec![false; labels.len()];
    if eps > 0.0 {
        for block in [&split.train, &split.val] {
            if let (Some(&a), Some(&b)) = (block.first(), block.last()) {
                mask[a..=b].copy_from_slice(&boundary_mask(&labels[a..=b]));
            }
        }
    }
    mask
}

struct Prepared {
    train: Examples,
    val: Examples,
    pool: Examples,
    split: Split,
    standardizer: Standardizer,
    spec: LossSpec,
}

fn prepare(data: &Dataset, labels: &LabelSeries, split: &HoldOut, eps: f64) -> CliResult<Prepared> {
    let standardizer = Standardizer::fit_indices(data, &split.train)?;
    let train_labels = LabelSeries::new(
        labels.start_date,
        split.train.iter().map(|&i| labels.labels[i]).collect(),
    );
    let spec = LossSpec::from_frequencies(&class_frequencies(&train_labels)?, eps)?;
    let smooth = block_boundaries(&labels.labels, split, eps);
    let all: Vec<usize> = split.train.iter().chain(&split.val).copied().collect();
    let pool = Examples::select(data, &labels.labels, &smooth, &all, &standardizer)?;
    let n = split.train.len();
    let positions = Split {
        train: (0..n).collect(),
        val: (n..all.len()).collect(),
    };
    Ok(Prepared {
        train: pool.subset(&positions.train)?,
        val: pool.subset(&positions.val)?,
        pool,
        split: positions,
        standardizer,
        spec,
    })
}

pub fn synth(a: &SynthArgs, file: FileConfig) -> CliResult<()> {
    let mut res = Resolver::new(file);
    let d = SynthConfig::default();
    let start: String = res.value(
        "start",
        a.start.clone(),
        d.start_date.format("%Y-%m-%d").to_string(),
    )?;
    let start_date = NaiveDate::parse_from_str(&start, "%Y-%m-%d")
        .map_err(|e| CliError::usage(format!("--start {start:?}: {e}")))?;
    let config = SynthConfig {
        n_days: res.value("days", a.days, d.n_days)?,
        seed: res.value("seed", a.seed, d.seed)?,
        start_date,
        noise_sigma: [
            res.value("noise-slp", a.noise_slp, d.noise_sigma[0])?,
            res.value("noise-z500", a.noise_z500, d.noise_sigma[1])?,
        ],
        dwell_p: res.value("dwell-p", a.dwell_p, d.dwell_p)?,
        blend_transitions: !res.switch("no-blend", a.no_blend)?,
        class_weights: d.class_weights,
    };
    let out = res.output("out", a.out.clone())?;
    let prov = res.finish("synth")?;
    as_usage(config.validate())?;
    let (fields, labels) = generate(&config)?;
    write_text(&out.join("fields.txt"), &write_fields(&fields, &prov.lines))?;
    write_text(&out.join("labels.txt"), &write_labels(&labels, &prov.lines))?;
    log::info!("wrote {} days to {}", labels.len(), out.display());
    Ok(())
}

pub fn train(a: &TrainCmd, file: FileConfig) -> CliResult<()> {
    let mut res = Resolver::new(file);
    let (data, labels) = load_data(&mut res, &a.data)?;
    let s = train_settings(&mut res, &a.train)?;
    let val_years = res.value("val-years", a.val_years, 10)?;
    let out = res.output("out", a.out.clone())?;
    let prov = res.finish("train")?;

    let split = hold_out(&data, val_years)?;
    let p = prepare(&data, &labels, &split, s.eps)?;
    let outcome = fit(&p.train, &p.val, &p.spec, &s.config)?;
    log::info!(
        "best epoch {} of {}, val loss {:.5}",
        outcome.best_epoch,
        outcome.history.len(),
        outcome.best_val_loss()
    );
    let model = TrainedModel {
        params: outcome.params.clone(),
        standardizer: p.standardizer,
        loss_spec: p.spec,
        seed: s.config.seed,
        provenance: prov.text(),
    };
    save_checkpoint(&model, &out)?;
    let mut history = String::from("epoch,train_loss,val_loss,val_accuracy\n");
    for r in &outcome.history {
        let _ = writeln!(
            history,
            "{},{},{},{}",
            r.epoch, r.train_loss, r.val_loss, r.val_accuracy
        );
    }
    write_text(
        &sibling(&out, ".history.csv"),
        &with_comments(&prov, &history),
    )
}

pub fn tune(a: &TuneCmd, file: FileConfig) -> CliResult<()> {
    let mut res = Resolver::new(file);
    let (data, labels) = load_data(&mut res, &a.data)?;
    let s = train_settings(&mut res, &a.train)?;
    let val_years = res.value("val-years", a.val_years, 10)?;
    let budget = res.value("budget", a.budget, CvConfig::default().budget)?;
    let out = res.output("out", a.out.clone())?;
    let prov = res.finish("tune")?;
    if budget == 0 {
        return Err(CliError::usage("--budget must be >= 1"));
    }

    let split = hold_out(&data, val_years)?;
    let p = prepare(&data, &labels, &split, s.eps)?;
    let outcome = search(
        &p.pool,
        std::slice::from_ref(&p.split),
        &p.spec,
        &s.config,
        &SearchSpace::default(),
        budget,
        s.config.seed,
    )?;
    let mut csv = String::from("trial,learning_rate,dropout_rate,val_loss,best\n");
    for (i, t) in outcome.trials.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{i},{},{},{},{}",
            t.learning_rate,
            t.dropout_rate,
            t.val_loss,
            i == outcome.best
        );
    }
    write_text(&out, &with_comments(&prov, &csv))
}

pub fn predict(a: &PredictArgs, file: FileConfig) -> CliResult<()> {
    let mut res = Resolver::new(file);
    let model: String = res.required("model", arg_path(&a.model))?;
    let fields: String = res.required("fields", arg_path(&a.fields))?;
    let out = res.output("out", a.out.clone())?;
    let prov = res.finish("predict")?;
    let model = load_checkpoint(Path::new(&model))?;
    let data = parse_fields(&read_text(Path::new(&fields))?)?;
    let probs = predict_probs(&model, &data)?;
    let mut comments = prov.lines.clone();
    comments.extend(model.provenance.lines().map(|l| format!("model.{l}")));
    write_text(&out, &write_probs(&probs, &comments))
}

pub fn smooth(a: &SmoothArgs, file: FileConfig) -> CliResult<()> {
    let mut res = Resolver::new(file);
    let probs: String = res.required("probs", arg_path(&a.probs))?;
    let passes: Option<usize> = res.optional("passes", a.passes)?;
    let out = res.output("out", a.out.clone())?;
    let report = res.optional_output("report", a.report.clone())?;
    let prov = res.finish("smooth")?;
    if passes == Some(0) {
        return Err(CliError::usage("--passes must be >= 1"));
    }
    let probs = parse_probs(&read_text(Path::new(&probs))?)?;
    let (pred, summary) = transition_smooth_bounded(&probs, passes.unwrap_or(usize::MAX));
    if !summary.converged {
        log::warn!(
            "transition smoothing stopped after {} passes without converging",
            summary.passes_run
        );
    }
    write_text(&out, &write_labels(&pred.into_label_series(), &prov.lines))?;
    let report = report.unwrap_or_else(|| sibling(&out, ".report.txt"));
    write_text(&report, &with_comments(&prov, &summary.to_text()))
}

fn cv_config(res: &mut Resolver, a: &CvCmd) -> CliResult<(CvConfig, AblationConfig)> {
    let d = CvConfig::default();
    let s = train_settings(res, &a.train)?;
    let fold_seed = res.value("fold-seed", a.fold_seed, d.fold_seed)?;
    let n_inner = res.value("inner-folds", a.inner_folds, d.n_inner)?;
    let config = CvConfig {
        n_outer: res.value("outer-folds", a.outer_folds, d.n_outer)?,
        n_inner,
        fold_seed,
        tune_seed: fold_seed,
        budget: res.value("budget", a.budget, d.budget)?,
        tune_folds: res.value("tune-folds", a.tune_folds, n_inner)?,
        workers: res.value("workers", a.workers, d.workers)?,
        smoothing_passes: res.optional("passes", a.passes)?,
        smoothing_eps: if s.eps > 0.0 { s.eps } else { d.smoothing_eps },
        train: s.config,
        space: d.space,
    };
    let ablation = AblationConfig {
        label_smoothing: s.eps > 0.0,
        transition_smoothing: !res.switch("no-transition-smoothing", a.no_transition_smoothing)?,
    };
    if config.tune_folds == 0 || config.tune_folds > config.n_inner {
        return Err(CliError::usage(format!(
            "--tune-folds must lie in 1..={}",
            config.n_inner
        )));
    }
    if config.workers == 0 || config.smoothing_passes == Some(0) {
        return Err(CliError::usage("--workers and --passes must be >= 1"));
    }
    Ok((config, ablation))
}

fn check_failures(outcomes: &[CvOutcome]) -> CliResult<()> {
    let failed: usize = outcomes.iter().map(|o| o.failures.len()).sum();
    for f in outcomes.iter().flat_map(|o| &o.failures) {
        log::error!("outer fold {} failed: {}", f.fold, f.message);
    }
    if failed > 0 {
        return Err(Error::Numeric(format!(
            "{failed} outer fold runs failed; partial results were written"
        ))
        .into());
    }
    Ok(())
}

pub fn evaluate(a: &CvCmd, file: FileConfig) -> CliResult<()> {
    let mut res = Resolver::new(file);
    let (data, labels) = load_data(&mut res, &a.data)?;
    let (config, ablation) = cv_config(&mut res, a)?;
    let out = res.output("out", a.out.clone())?;
    let prov = res.finish("evaluate")?;
    let outcome = nested_cv(&data, &labels, &config, ablation)?;
    log::info!(
        "{}: accuracy {:.4}, macro F1 {:.4}",
        ablation.name(),
        outcome.report.accuracy,
        outcome.report.macro_f1
    );
    let outcomes = [outcome];
    write_text(
        &out.join("table1.csv"),
        &with_comments(&prov, &confusion_table(&outcomes[0].report)),
    )?;
    write_text(
        &out.join("records.csv"),
        &with_comments(&prov, &metric_records(&outcomes)),
    )?;
    write_text(
        &out.join("folds.csv"),
        &with_comments(&prov, &fold_summary(&outcomes[0])),
    )?;
    check_failures(&outcomes)
}

pub fn ablate(a: &CvCmd, file: FileConfig) -> CliResult<()> {
    let mut res = Resolver::new(file);
    let (data, labels) = load_data(&mut res, &a.data)?;
    let (config, _) = cv_config(&mut res, a)?;
    let out = res.output("out", a.out.clone())?;
    let prov = res.finish("ablate")?;
    let outcomes = gwl_core::evalcv::ablation(&data, &labels, &config)?;
    write_text(
        &out.join("table2.csv"),
        &with_comments(&prov, &ablation_table(&outcomes)),
    )?;
    write_text(
        &out.join("records.csv"),
        &with_comments(&prov, &metric_records(&outcomes)),
    )?;
    let mut folds = String::new();
    for o in &outcomes {
        let _ = writeln!(folds, "# variant={}", o.ablation.name());
        folds.push_str(&fold_summary(o));
    }
    write_text(&out.join("folds.csv"), &with_comments(&prov, &folds))?;
    check_failures(&outcomes)
}

pub fn report(a: &ReportArgs, file: FileConfig) -> CliResult<()> {
    let mut res = Resolver::new(file);
    let records: String = res.required("records", arg_path(&a.records))?;
    let out = res.output("out", a.out.clone())?;
    let prov = res.finish("report")?;
    let variants = parse_metric_records(&read_text(Path::new(&records))?)?;
    let (_, main) = variants
        .iter()
        .find(|(name, _)| name == AblationConfig::FINAL.name())
        .unwrap_or(&variants[0]);
    write_text(
        &out.join("table1.csv"),
        &with_comments(&prov, &confusion_table(main)),
    )?;
    let rows: Vec<(&str, &_)> = variants.iter().map(|(n, r)| (n.as_str(), r)).collect();
    write_text(
        &out.join("table2.csv"),
        &with_comments(&prov, &comparison_table(&rows)),
    )
}
