//! Gridded daily fields and the `GWLGRID` text format.

use std::fmt::Write as _;

use chrono::NaiveDate;

use crate::error::{Error, Result};

pub const CHANNELS: usize = 2;
pub const ROWS: usize = 16;
pub const COLS: usize = 29;
pub const CELLS: usize = ROWS * COLS;
pub const FIELD_LEN: usize = CHANNELS * CELLS;

pub const CHANNEL_NAMES: [&str; CHANNELS] = ["slp", "z500"];

/// One day's fields: channel 0 is sea level pressure (hPa), channel 1 is
/// geopotential height at 500 hPa (m). Stored flat in `[channel][row][col]`
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    values: Vec<f64>,
}

impl GridField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != FIELD_LEN {
            return Err(Error::Shape(format!(
                "grid field needs {FIELD_LEN} values, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "channel {} cell {}",
                CHANNEL_NAMES[i / CELLS],
                i % CELLS
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.values[c * CELLS..(c + 1) * CELLS]
    }

    pub fn get(&self, channel: usize, row: usize, col: usize) -> f64 {
        self.values[channel * CELLS + row * COLS + col]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DailySample {
    pub date: NaiveDate,
    pub field: GridField,
}

/// A gap-free daily sequence of fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<DailySample>,
}

impl Dataset {
    pub fn new(samples: Vec<DailySample>) -> Result<Self> {
        check_contiguous(samples.iter().map(|s| s.date))?;
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[DailySample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn start_date(&self) -> Option<NaiveDate> {
        self.samples.first().map(|s| s.date)
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.samples.iter().map(|s| s.date)
    }

    /// Copy of days `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Dataset {
        Dataset {
            samples: self.samples[range].to_vec(),
        }
    }
}

fn check_contiguous(dates: impl Iterator<Item = NaiveDate>) -> Result<()> {
    let mut prev: Option<NaiveDate> = None;
    for (i, d) in dates.enumerate() {
        if let Some(p) = prev {
            if p.succ_opt() != Some(d) {
                return Err(Error::invalid(format!(
                    "dates not consecutive at sample {i}: {p} followed by {d}"
                )));
            }
        }
        prev = Some(d);
    }
    Ok(())
}

pub(crate) fn parse_date(s: &str, line: usize) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|_| Error::parse(line, format!("malformed date {s:?}")))
}

const HEADER_TAG: &str = "GWLGRID";

/// Parse a field file.
///
/// Layout: a `GWLGRID 2 16 29` header, then per day a `YYYY-MM-DD` line and
/// one line of 464 reals per channel. Blank lines and `#` comment lines after
/// the header are skipped.
pub fn parse_fields(text: &str) -> Result<Dataset> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "missing GWLGRID header"))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(HEADER_TAG) {
        return Err(Error::parse(hline, "missing GWLGRID header"));
    }
    let dims: Vec<&str> = parts.collect();
    let expected = [CHANNELS, ROWS, COLS];
    let parsed: Vec<Option<usize>> = dims.iter().map(|d| d.parse().ok()).collect();
    if parsed.len() != 3 || parsed.iter().zip(expected).any(|(p, e)| *p != Some(e)) {
        return Err(Error::Shape(format!(
            "header declares dims {:?}, expected {CHANNELS} {ROWS} {COLS} (line {hline})",
            dims.join(" ")
        )));
    }

    let mut lines = lines.filter(|(_, l)| !l.starts_with('#'));
    let mut samples = Vec::new();
    let mut prev: Option<NaiveDate> = None;
    while let Some((dline, dtext)) = lines.next() {
        let date = parse_date(dtext, dline)?;
        if let Some(p) = prev {
            if date <= p {
                return Err(Error::parse(
                    dline,
                    format!("duplicate or out-of-order date {date}"),
                ));
            }
            if p.succ_opt() != Some(date) {
                return Err(Error::parse(
                    dline,
                    format!("date gap between {p} and {date}"),
                ));
            }
        }
        let mut values = Vec::with_capacity(FIELD_LEN);
        for (c, name) in CHANNEL_NAMES.iter().enumerate() {
            let (vline, vtext) = lines.next().ok_or_else(|| {
                Error::parse(dline, format!("missing channel {c} ({name}) for {date}"))
            })?;
            let before = values.len();
            for tok in vtext.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| Error::parse(vline, format!("bad real {tok:?}")))?;
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "{date} channel {c} ({name}) at line {vline}"
                    )));
                }
                values.push(v);
            }
            let got = values.len() - before;
            if got != CELLS {
                return Err(Error::Shape(format!(
                    "{date} channel {c} has {got} values, expected {CELLS} (line {vline})"
                )));
            }
        }
        samples.push(DailySample {
            date,
            field: GridField { values },
        });
        prev = Some(date);
    }
    Dataset::new(samples)
}

/// Serialize a dataset in the `GWLGRID` format. `comments` are written as
/// `# ` lines right after the header.
pub fn write_fields(dataset: &Dataset, comments: &[String]) -> String {
    let mut out = String::with_capacity(dataset.len() * FIELD_LEN * 12 + 64);
    let _ = writeln!(out, "{HEADER_TAG} {CHANNELS} {ROWS} {COLS}");
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    for s in dataset.samples() {
        let _ = writeln!(out, "{}", s.date.format("%Y-%m-%d"));
        for c in 0..CHANNELS {
            let mut first = true;
            for v in s.field.channel(c) {
                if !first {
                    out.push(' ');
                }
                first = false;
                // `Display` for f64 is the shortest string that round-trips.
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(date: &str, base: f64) -> String {
        let row = |offset: f64| {
            (0..CELLS)
                .map(|i| format!("{}", base + offset + i as f64 * 0.25))
                .collect::<Vec<_>>()
                .join(" ")
        };
        format!("{date}\n{}\n{}\n", row(0.0), row(4000.0))
    }

    #[test]
    fn parses_two_days() {
        let text = format!(
            "GWLGRID 2 16 29\n{}{}",
            day("1900-01-01", 1000.0),
            day("1900-01-02", 1001.0)
        );
        let ds = parse_fields(&text).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.samples()[1].field.get(0, 0, 1), 1001.25);
        assert_eq!(ds.samples()[0].field.get(1, 0, 0), 5000.0);
    }

    #[test]
    fn wrong_row_count_is_dimension_mismatch() {
        let text = format!("GWLGRID 2 15 29\n{}", day("1900-01-01", 0.0));
        let err = parse_fields(&text).unwrap_err();
        assert!(err.to_string().contains("dimension mismatch"), "{err}");
    }

    #[test]
    fn nan_names_date_and_channel() {
        let good = day("1900-01-01", 0.0);
        let bad = good.replacen("4000.25", "NaN", 1);
        let err = parse_fields(&format!("GWLGRID 2 16 29\n{bad}")).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("1900-01-01") && msg.contains("channel 1"),
            "{msg}"
        );
    }

    #[test]
    fn missing_channel_and_gap() {
        let one = day("1900-01-01", 0.0);
        let truncated: String = one.lines().take(2).collect::<Vec<_>>().join("\n");
        let err = parse_fields(&format!("GWLGRID 2 16 29\n{truncated}\n")).unwrap_err();
        assert!(err.to_string().contains("missing channel 1"), "{err}");

        let text = format!(
            "GWLGRID 2 16 29\n{}{}",
            day("1900-01-01", 0.0),
            day("1900-01-03", 0.0)
        );
        let err = parse_fields(&text).unwrap_err();
        assert!(err.to_string().contains("gap"), "{err}");
    }

    #[test]
    fn ragged_channel_line() {
        let one = day("1900-01-01", 0.0);
        let mut lines: Vec<String> = one.lines().map(str::to_owned).collect();
        lines[1].push_str(" 1.0");
        let err = parse_fields(&format!("GWLGRID 2 16 29\n{}\n", lines.join("\n"))).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn grid_field_rejects_bad_shape() {
        assert!(GridField::new(vec![0.0; 10]).is_err());
        let mut v = vec![0.0; FIELD_LEN];
        v[3] = f64::INFINITY;
        assert!(matches!(GridField::new(v), Err(Error::NonFinite(_))));
    }

    #[test]
    fn comments_survive_round_trip() {
        let text = format!("GWLGRID 2 16 29\n{}", day("1900-01-01", 0.5));
        let ds = parse_fields(&text).unwrap();
        let written = write_fields(&ds, &["seed=3".to_owned()]);
        assert!(written.contains("# seed=3"));
        assert_eq!(parse_fields(&written).unwrap(), ds);
    }
}
