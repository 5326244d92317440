//! Probability and prediction series, plus the `PROBS 7` text format.

use std::fmt::Write as _;

use chrono::NaiveDate;

use crate::datamodel::{ClassId, LabelSeries, N_CLASSES};
use crate::error::{Error, Result};

pub type ProbRow = [f64; N_CLASSES];

const ROW_SUM_TOL: f64 = 1e-9;

/// Predicted class probabilities, one row per day.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbSeries {
    start_date: NaiveDate,
    rows: Vec<ProbRow>,
}

impl ProbSeries {
    pub fn new(start_date: NaiveDate, rows: Vec<ProbRow>) -> Result<Self> {
        for (t, row) in rows.iter().enumerate() {
            if row.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
                return Err(Error::invalid(format!(
                    "probability row {t} has entries outside [0,1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::invalid(format!("probability row {t} sums to {sum}")));
            }
        }
        Ok(Self { start_date, rows })
    }

    pub fn start_date(&self) -> NaiveDate {
        self.start_date
    }

    pub fn rows(&self) -> &[ProbRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn date(&self, index: usize) -> NaiveDate {
        self.start_date + chrono::Days::new(index as u64)
    }
}

/// Predicted class labels, one per day.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredSeries {
    pub start_date: NaiveDate,
    pub labels: Vec<ClassId>,
}

impl PredSeries {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn into_label_series(self) -> LabelSeries {
        LabelSeries::new(self.start_date, self.labels)
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax_row(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &p) in row.iter().enumerate().skip(1) {
        if p > row[best] {
            best = k;
        }
    }
    best
}

pub fn argmax_series(probs: &ProbSeries) -> PredSeries {
    PredSeries {
        start_date: probs.start_date,
        labels: probs
            .rows
            .iter()
            .map(|r| ClassId::from_index(argmax_row(r)).expect("7 columns"))
            .collect(),
    }
}

const HEADER: &str = "PROBS 7";

/// Parse a `PROBS 7` file: header line, then `YYYY-MM-DD p0 .. p6` per day.
pub fn parse_probs(text: &str) -> Result<ProbSeries> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, h)) if h.split_whitespace().eq(HEADER.split_whitespace()) => {}
        Some((n, _)) => return Err(Error::parse(n, "expected header \"PROBS 7\"")),
        None => return Err(Error::parse(1, "expected header \"PROBS 7\"")),
    }
    let mut start = None;
    let mut prev: Option<NaiveDate> = None;
    let mut rows = Vec::new();
    for (n, line) in lines.filter(|(_, l)| !l.starts_with('#')) {
        let mut toks = line.split_whitespace();
        let date = crate::datamodel::fields_parse_date(toks.next().unwrap_or(""), n)?;
        if let Some(p) = prev {
            if p.succ_opt() != Some(date) {
                return Err(Error::parse(n, format!("date gap or disorder after {p}")));
            }
        }
        let vals: Vec<f64> = toks
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::parse(n, format!("bad real {t:?}")))
            })
            .collect::<Result<_>>()?;
        let row: ProbRow = vals.try_into().map_err(|v: Vec<f64>| {
            Error::parse(n, format!("expected 7 probabilities, got {}", v.len()))
        })?;
        start.get_or_insert(date);
        prev = Some(date);
        rows.push(row);
    }
    let start = start.ok_or_else(|| Error::parse(1, "no probability records"))?;
    ProbSeries::new(start, rows)
}

pub fn write_probs(probs: &ProbSeries, comments: &[String]) -> String {
    let mut out = String::with_capacity(probs.len() * 160);
    let _ = writeln!(out, "{HEADER}");
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    for (t, row) in probs.rows.iter().enumerate() {
        let _ = write!(out, "{}", probs.date(t).format("%Y-%m-%d"));
        for p in row {
            let _ = write!(out, " {p}");
        }
        out.push('\n');
    }
    out
}
