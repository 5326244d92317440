//! Seeded synthetic datasets: semi-Markov label paths with a 3-day minimum
//! dwell, rendered through per-class pressure templates plus Gaussian noise.

mod templates;

pub use templates::{make_templates, Bump, ClassTemplate, Sign, BASELINE_SLP, BASELINE_Z500};

use chrono::NaiveDate;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Geometric, Normal};

use crate::datamodel::{
    ClassId, DailySample, Dataset, GridField, LabelSeries, CELLS, CHANNELS, N_CLASSES,
};
use crate::error::{Error, Result};
use crate::seeds;

pub const MIN_DWELL: usize = 3;

/// Label marginals of the published averaged confusion matrix (column sums
/// normalised), BM..RES.
pub const CATALOG_MARGINALS: [f64; N_CLASSES] = [
    309.6 / 3652.3,
    108.6 / 3652.3,
    76.2 / 3652.3,
    127.7 / 3652.3,
    52.1 / 3652.3,
    77.4 / 3652.3,
    2900.7 / 3652.3,
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_days: usize,
    pub start_date: NaiveDate,
    /// Per-channel noise standard deviation (hPa, m).
    pub noise_sigma: [f64; CHANNELS],
    /// Success probability of the geometric extra dwell beyond 3 days.
    pub dwell_p: f64,
    /// Relative sampling weight of each class for a new segment.
    pub class_weights: [f64; N_CLASSES],
    pub blend_transitions: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_days: 3650,
            start_date: NaiveDate::from_ymd_opt(1900, 1, 1).expect("valid date"),
            noise_sigma: [4.0, 40.0],
            dwell_p: 0.35,
            class_weights: CATALOG_MARGINALS,
            blend_transitions: true,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_days == 0 {
            return Err(Error::invalid("n_days must be at least 1"));
        }
        if self.noise_sigma.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::invalid("noise sigma must be finite and >= 0"));
        }
        if !(self.dwell_p > 0.0 && self.dwell_p <= 1.0) {
            return Err(Error::invalid("dwell_p must lie in (0, 1]"));
        }
        if self
            .class_weights
            .iter()
            .any(|w| !w.is_finite() || *w < 0.0)
            || self.class_weights.iter().sum::<f64>() <= 0.0
        {
            return Err(Error::invalid(
                "class weights must be >= 0 with a positive sum",
            ));
        }
        Ok(())
    }
}

/// Sample a label path of `n_days` days.
///
/// The path is a sequence of segments, each `3 + Geometric(dwell_p)` days
/// long with its class drawn independently from `class_weights`. Consecutive
/// segments of the same class merge into one longer run, so every maximal run
/// except a truncated final one lasts at least three days and the day-level
/// class frequencies converge to the normalised weights.
pub fn sample_label_path(config: &SynthConfig) -> Result<LabelSeries> {
    config.validate()?;
    let mut rng = seeds::rng(config.seed, "synth-labels", 0);
    let classes =
        WeightedIndex::new(config.class_weights).map_err(|e| Error::invalid(e.to_string()))?;
    let extra = Geometric::new(config.dwell_p).map_err(|e| Error::invalid(e.to_string()))?;
    let mut labels = Vec::with_capacity(config.n_days);
    while labels.len() < config.n_days {
        let class = ClassId::from_index(classes.sample(&mut rng)).expect("7 weights");
        let len = MIN_DWELL + extra.sample(&mut rng) as usize;
        let take = len.min(config.n_days - labels.len());
        labels.extend(std::iter::repeat_n(class, take));
    }
    Ok(LabelSeries::new(config.start_date, labels))
}

/// Render one field per labeled day.
///
/// With `blend_transitions`, the first day of a run is the mean of its
/// template and the previous run's, and the last day the mean of its template
/// and the next run's (a one-day run blends with the previous run). Noise for
/// day `i` comes from stream `i` of the noise generator, so any day can be
/// rendered independently.
pub fn render_fields(
    labels: &LabelSeries,
    templates: &[ClassTemplate],
    config: &SynthConfig,
) -> Result<Dataset> {
    if labels.is_empty() {
        return Err(Error::invalid("cannot render an empty label series"));
    }
    if templates.len() != N_CLASSES {
        return Err(Error::invalid(format!(
            "expected {N_CLASSES} templates, got {}",
            templates.len()
        )));
    }
    let rendered: Vec<Vec<f64>> = templates.iter().map(ClassTemplate::values).collect();
    let noise: Vec<Normal<f64>> = config
        .noise_sigma
        .iter()
        .map(|&s| Normal::new(0.0, s).map_err(|e| Error::invalid(e.to_string())))
        .collect::<Result<_>>()?;
    let runs = crate::datamodel::runs(&labels.labels);
    let mut samples = Vec::with_capacity(labels.len());
    for (k, run) in runs.iter().enumerate() {
        for day in run.start..run.end() {
            let own = &rendered[run.class.index()];
            let neighbour = if !config.blend_transitions {
                None
            } else if day == run.start && k > 0 {
                Some(runs[k - 1].class)
            } else if day + 1 == run.end() && k + 1 < runs.len() {
                Some(runs[k + 1].class)
            } else {
                None
            };
            let mut values: Vec<f64> = match neighbour {
                Some(other) => own
                    .iter()
                    .zip(&rendered[other.index()])
                    .map(|(a, b)| 0.5 * (a + b))
                    .collect(),
                None => own.clone(),
            };
            let mut rng = seeds::rng(config.seed, "synth-noise", day as u64);
            for (c, dist) in noise.iter().enumerate() {
                if config.noise_sigma[c] > 0.0 {
                    for v in &mut values[c * CELLS..(c + 1) * CELLS] {
                        *v += dist.sample(&mut rng);
                    }
                }
            }
            samples.push(DailySample {
                date: labels.date(day),
                field: GridField::new(values)?,
            });
        }
    }
    Dataset::new(samples)
}

/// Labels and fields for a full synthetic configuration.
pub fn generate(config: &SynthConfig) -> Result<(Dataset, LabelSeries)> {
    let labels = sample_label_path(config)?;
    let fields = render_fields(&labels, &make_templates(), config)?;
    Ok((fields, labels))
}
