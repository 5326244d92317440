//! Daily label catalogs.

use std::collections::HashMap;
use std::fmt::Write as _;

use chrono::NaiveDate;

use super::class::{ClassId, N_CLASSES};
use super::fields::parse_date;
use crate::error::{Error, Result};

/// A gap-free daily sequence of class labels starting at `start_date`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSeries {
    pub start_date: NaiveDate,
    pub labels: Vec<ClassId>,
}

impl LabelSeries {
    pub fn new(start_date: NaiveDate, labels: Vec<ClassId>) -> Self {
        Self { start_date, labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn date(&self, index: usize) -> NaiveDate {
        self.start_date + chrono::Days::new(index as u64)
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        (0..self.len()).map(|i| self.date(i))
    }
}

/// Mapping from raw catalog type codes to the 7-class scheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalogMapping {
    table: HashMap<String, ClassId>,
}

const DEFAULT_MAPPING: &str = include_str!("../../data/catalog_mapping.txt");

impl CatalogMapping {
    /// Parse `RAW=CLASS` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut table = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (raw, class) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(i + 1, "expected RAW=CLASS"))?;
            let class: ClassId = class
                .trim()
                .parse()
                .map_err(|_| Error::parse(i + 1, format!("unknown code {:?}", class.trim())))?;
            table.insert(raw.trim().to_owned(), class);
        }
        Ok(Self { table })
    }

    pub fn get(&self, raw: &str) -> Option<ClassId> {
        self.table.get(raw).copied()
    }
}

impl Default for CatalogMapping {
    fn default() -> Self {
        Self::parse(DEFAULT_MAPPING).expect("shipped mapping parses")
    }
}

/// How codes in a label file are interpreted.
#[derive(Debug, Clone, Default)]
pub enum LabelCoding {
    /// Codes are already one of the seven class codes.
    #[default]
    Classes,
    /// Codes are raw catalog types, folded through the mapping.
    Catalog(CatalogMapping),
}

/// Parse a `YYYY-MM-DD,CODE` label file. Blank and `#` lines are skipped.
pub fn parse_labels(text: &str, coding: &LabelCoding) -> Result<LabelSeries> {
    let mut start = None;
    let mut prev: Option<NaiveDate> = None;
    let mut labels = Vec::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (date, code) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(line_no, "expected DATE,CODE"))?;
        let date = parse_date(date.trim(), line_no)?;
        let code = code.trim();
        let class = match coding {
            LabelCoding::Classes => code.parse::<ClassId>().ok(),
            LabelCoding::Catalog(map) => map.get(code),
        }
        .ok_or_else(|| Error::parse(line_no, format!("unknown code {code:?}")))?;

        if let Some(p) = prev {
            if date <= p {
                return Err(Error::parse(
                    line_no,
                    format!("duplicate or out-of-order date {date}"),
                ));
            }
            if p.succ_opt() != Some(date) {
                return Err(Error::parse(
                    line_no,
                    format!("date gap between {p} and {date}"),
                ));
            }
        }
        start.get_or_insert(date);
        prev = Some(date);
        labels.push(class);
    }
    let start_date = start.ok_or_else(|| Error::parse(1, "no label records"))?;
    Ok(LabelSeries { start_date, labels })
}

pub fn write_labels(series: &LabelSeries, comments: &[String]) -> String {
    let mut out = String::with_capacity(series.len() * 16);
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    for (date, class) in series.dates().zip(&series.labels) {
        let _ = writeln!(out, "{},{}", date.format("%Y-%m-%d"), class);
    }
    out
}

/// Relative frequency of each class.
pub fn class_frequencies(labels: &LabelSeries) -> Result<[f64; N_CLASSES]> {
    if labels.is_empty() {
        return Err(Error::invalid("class frequencies of an empty label series"));
    }
    Ok(frequencies(&labels.labels))
}

pub(crate) fn class_counts(labels: &[ClassId]) -> [usize; N_CLASSES] {
    let mut counts = [0usize; N_CLASSES];
    for c in labels {
        counts[c.index()] += 1;
    }
    counts
}

pub(crate) fn frequencies(labels: &[ClassId]) -> [f64; N_CLASSES] {
    let counts = class_counts(labels);
    let total = labels.len() as f64;
    counts.map(|c| c as f64 / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ClassId::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    #[test]
    fn parses_direct_codes() {
        let s = parse_labels("1900-01-01,BM\n1900-01-02,BM", &LabelCoding::Classes).unwrap();
        assert_eq!(s, LabelSeries::new(d("1900-01-01"), vec![Bm, Bm]));
    }

    #[test]
    fn unknown_code_reports_line() {
        let err = parse_labels("1900-01-01,XYZ", &LabelCoding::Classes).unwrap_err();
        assert_eq!(err.to_string(), "unknown code \"XYZ\" at line 1");
        assert!(err.to_string().contains("at line 1"));
    }

    #[test]
    fn malformed_date_gap_and_duplicate() {
        let err = parse_labels("1900-13-01,BM", &LabelCoding::Classes).unwrap_err();
        assert!(err.to_string().contains("malformed date"));
        let err = parse_labels("1900-01-01,BM\n1900-01-03,BM", &LabelCoding::Classes).unwrap_err();
        assert!(err.to_string().contains("gap") && err.to_string().contains("line 2"));
        let err = parse_labels("1900-01-01,BM\n1900-01-01,BM", &LabelCoding::Classes).unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn catalog_types_fold_into_residual() {
        let coding = LabelCoding::Catalog(CatalogMapping::default());
        let text = "1900-01-01,WZ\n1900-01-02,HNFA\n1900-01-03,TRM\n1900-01-04,SEA\n1900-01-05,U";
        let s = parse_labels(text, &coding).unwrap();
        assert_eq!(s.labels, vec![Res, Hnfa, Res, Sea, Res]);
        // RES itself is not a catalog type
        assert!(parse_labels("1900-01-01,RES", &coding).is_err());
    }

    #[test]
    fn shipped_mapping_keeps_six_types() {
        let map = CatalogMapping::default();
        assert_eq!(map.table.len(), 30);
        let kept: Vec<_> = map.table.iter().filter(|(_, c)| **c != Res).collect();
        assert_eq!(kept.len(), 6);
        for (raw, class) in kept {
            assert_eq!(raw, class.code());
        }
    }

    #[test]
    fn frequencies_simple_cases() {
        let s = LabelSeries::new(d("1900-01-01"), vec![Bm, Bm, Res, Res]);
        assert_eq!(
            class_frequencies(&s).unwrap(),
            [0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5]
        );
        let s = LabelSeries::new(d("1900-01-01"), vec![Res; 9]);
        assert_eq!(class_frequencies(&s).unwrap()[6], 1.0);
        assert!(class_frequencies(&LabelSeries::new(d("1900-01-01"), vec![])).is_err());
    }

    #[test]
    fn frequencies_from_published_label_totals() {
        // Column sums of the published averaged confusion matrix, scaled by 10.
        let counts = [3096, 1086, 762, 1277, 521, 774, 29007];
        let labels: Vec<ClassId> = counts
            .iter()
            .zip(ClassId::ALL)
            .flat_map(|(&n, c)| std::iter::repeat_n(c, n))
            .collect();
        let f = class_frequencies(&LabelSeries::new(d("1900-01-01"), labels)).unwrap();
        assert!((f[0] - 0.0848).abs() < 5e-5, "{}", f[0]);
    }

    #[test]
    fn write_then_parse() {
        let s = LabelSeries::new(d("1999-12-30"), vec![Bm, Hna, Res, Res]);
        let text = write_labels(&s, &["origin=test".into()]);
        assert_eq!(parse_labels(&text, &LabelCoding::Classes).unwrap(), s);
    }
}
