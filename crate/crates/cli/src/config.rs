//! Resolution of settings from flags and an optional `key=value` file.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{CliError, CliResult};

/// Parsed `key=value` lines; `#` starts a comment.
#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    entries: BTreeMap<String, (usize, String)>,
}

impl FileConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::usage(format!("config line {}: expected key=value", i + 1))
            })?;
            let key = k.trim().to_string();
            if entries
                .insert(key.clone(), (i + 1, v.trim().to_string()))
                .is_some()
            {
                return Err(CliError::usage(format!(
                    "config line {}: duplicate key {key:?}",
                    i + 1
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn load_optional(path: Option<&Path>) -> CliResult<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }
}

/// Looks settings up flag-first, then in the file, then falls back to a
/// default, and records every resolved value for provenance.
pub struct Resolver {
    file: FileConfig,
    seen: Vec<String>,
    resolved: Vec<(String, String)>,
}

impl Resolver {
    pub fn new(file: FileConfig) -> Self {
        Self {
            file,
            seen: Vec::new(),
            resolved: Vec::new(),
        }
    }

    fn file_value<T: FromStr>(&mut self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: Display,
    {
        self.seen.push(key.to_string());
        match self.file.entries.get(key) {
            None => Ok(None),
            Some((line, raw)) => raw.parse().map(Some).map_err(|e| {
                CliError::usage(format!(
                    "config line {line}: bad value {raw:?} for {key}: {e}"
                ))
            }),
        }
    }

    fn record(&mut self, key: &str, value: impl Display) {
        self.resolved.push((key.to_string(), value.to_string()));
    }

    pub fn value<T: FromStr + Display>(
        &mut self,
        key: &str,
        flag: Option<T>,
        default: T,
    ) -> CliResult<T>
    where
        T::Err: Display,
    {
        let file = self.file_value(key)?;
        let v = flag.or(file).unwrap_or(default);
        self.record(key, &v);
        Ok(v)
    }

    pub fn optional<T: FromStr + Display>(
        &mut self,
        key: &str,
        flag: Option<T>,
    ) -> CliResult<Option<T>>
    where
        T::Err: Display,
    {
        let file = self.file_value(key)?;
        let v = flag.or(file);
        match &v {
            Some(x) => self.record(key, x),
            None => self.record(key, "none"),
        }
        Ok(v)
    }

    pub fn required<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> CliResult<T>
    where
        T::Err: Display,
    {
        let file = self.file_value(key)?;
        let v = flag
            .or(file)
            .ok_or_else(|| CliError::usage(format!("--{key} is required")))?;
        self.record(key, &v);
        Ok(v)
    }

    /// A switch: set by the flag or by `key=true` in the file.
    pub fn switch(&mut self, key: &str, flag: bool) -> CliResult<bool> {
        let file: Option<bool> = self.file_value(key)?;
        let v = flag || file.unwrap_or(false);
        self.record(key, v);
        Ok(v)
    }

    /// An output path. Kept out of the provenance record so that identical
    /// runs written to different places produce identical artifacts.
    pub fn output(&mut self, key: &str, flag: Option<PathBuf>) -> CliResult<PathBuf> {
        let file: Option<PathBuf> = self.file_value(key)?;
        flag.or(file)
            .ok_or_else(|| CliError::usage(format!("--{key} is required")))
    }

    pub fn optional_output(
        &mut self,
        key: &str,
        flag: Option<PathBuf>,
    ) -> CliResult<Option<PathBuf>> {
        let file: Option<PathBuf> = self.file_value(key)?;
        Ok(flag.or(file))
    }

    /// Fail on file keys that the command never asked for, and return the
    /// resolved settings.
    pub fn finish(self, command: &str) -> CliResult<Provenance> {
        if let Some((key, (line, _))) = self
            .file
            .entries
            .iter()
            .find(|(k, _)| !self.seen.contains(k))
        {
            return Err(CliError::usage(format!(
                "config line {line}: unknown key {key:?} for {command}"
            )));
        }
        let mut lines = vec![
            format!("gwl_version={}", env!("CARGO_PKG_VERSION")),
            format!("command={command}"),
        ];
        lines.extend(self.resolved.into_iter().map(|(k, v)| format!("{k}={v}")));
        Ok(Provenance { lines })
    }
}

/// Resolved `key=value` settings of a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub lines: Vec<String>,
}

impl Provenance {
    pub fn text(&self) -> String {
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }

    /// `# key=value` lines for CSV artifacts.
    pub fn comment_block(&self) -> String {
        self.lines.iter().map(|l| format!("# {l}\n")).collect()
    }
}
