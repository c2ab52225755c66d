//! Text formats: the dataset record format, CSV tables and JSON sidecars.
//!
//! Every file starts with a provenance line carrying the configuration hash
//! and master seed (a `#` comment in text formats, two leading keys in JSON).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chainsense_core::protocol::{Dataset, Outcome, OutcomeSequence, Schedule};
use chainsense_core::spin::ChainTemplate;
use serde::Serialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn comment(&self) -> String {
        format!("# config_hash={} seed={}\n", self.config_hash, self.seed)
    }
}

fn join_floats(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

pub fn sequence_to_string(seq: &OutcomeSequence) -> String {
    seq.outcomes()
        .iter()
        .map(|o| if o.is_up() { '+' } else { '-' })
        .collect()
}

pub fn sequence_from_str(s: &str) -> Option<OutcomeSequence> {
    s.chars()
        .map(|c| match c {
            '+' => Some(Outcome::Up),
            '-' => Some(Outcome::Down),
            _ => None,
        })
        .collect::<Option<Vec<_>>>()
        .filter(|v| !v.is_empty())
        .map(OutcomeSequence::new)
}

/// Dataset as text: `#` header lines with the chain and schedule, then one
/// `<+/- string> <count>` record per observed sequence in index order.
pub fn format_dataset(dataset: &Dataset, provenance: Option<&Provenance>) -> String {
    let mut out = String::new();
    if let Some(p) = provenance {
        out.push_str(&p.comment());
    }
    let template = dataset.template();
    let _ = writeln!(out, "# n_sites={}", template.n_sites());
    let _ = writeln!(out, "# coupling={}", template.coupling());
    let _ = writeln!(out, "# taus={}", join_floats(dataset.schedule().taus()));
    let mut records: Vec<_> = dataset.counts().iter().collect();
    records.sort_by_key(|(seq, _)| seq.index());
    for (seq, count) in records {
        let _ = writeln!(out, "{} {}", sequence_to_string(seq), count);
    }
    out
}

pub fn parse_dataset(text: &str, path: &Path) -> Result<Dataset> {
    let fail = |line: usize, message: String| CliError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut n_sites: Option<usize> = None;
    let mut coupling: Option<f64> = None;
    let mut taus: Option<Vec<f64>> = None;
    let mut counts: BTreeMap<OutcomeSequence, u64> = BTreeMap::new();
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        last_line = lineno;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            let header = header.trim();
            if let Some(v) = header.strip_prefix("n_sites=") {
                n_sites = Some(v.parse().map_err(|e| fail(lineno, format!("n_sites: {e}")))?);
            } else if let Some(v) = header.strip_prefix("coupling=") {
                coupling = Some(v.parse().map_err(|e| fail(lineno, format!("coupling: {e}")))?);
            } else if let Some(v) = header.strip_prefix("taus=") {
                taus = Some(
                    v.split(',')
                        .map(|t| t.trim().parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| fail(lineno, format!("taus: {e}")))?,
                );
            }
            continue;
        }
        let expected = taus
            .as_ref()
            .map(Vec::len)
            .ok_or_else(|| fail(lineno, "record before the taus header".into()))?;
        let mut parts = line.split_whitespace();
        let (Some(seq), Some(count), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(fail(lineno, "expected `<sequence> <count>`".into()));
        };
        let seq = sequence_from_str(seq)
            .ok_or_else(|| fail(lineno, format!("bad sequence `{seq}`")))?;
        if seq.len() != expected {
            return Err(fail(
                lineno,
                format!("sequence has {} outcomes, schedule has {expected}", seq.len()),
            ));
        }
        let count: u64 = count.parse().map_err(|e| fail(lineno, format!("count: {e}")))?;
        if counts.insert(seq, count).is_some() {
            return Err(fail(lineno, "duplicate sequence".into()));
        }
    }
    let header = |name: &str| fail(last_line, format!("missing `{name}` header"));
    let template = ChainTemplate::new(
        n_sites.ok_or_else(|| header("n_sites"))?,
        coupling.ok_or_else(|| header("coupling"))?,
    )
    .map_err(|e| fail(1, e.to_string()))?;
    let schedule =
        Schedule::new(taus.ok_or_else(|| header("taus"))?).map_err(|e| fail(1, e.to_string()))?;
    Dataset::new(template, schedule, counts).map_err(|e| fail(last_line, e.to_string()))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    parse_dataset(&text, path)
}

/// Comma-separated table with a provenance line and a column header.
#[derive(Debug, Clone)]
pub struct CsvTable {
    text: String,
    columns: usize,
}

impl CsvTable {
    pub fn new(provenance: &Provenance, columns: &[&str]) -> Self {
        let mut text = provenance.comment();
        text.push_str(&columns.join(","));
        text.push('\n');
        Self {
            text,
            columns: columns.len(),
        }
    }

    pub fn comment(&mut self, line: &str) {
        let _ = writeln!(self.text, "# {line}");
    }

    pub fn row(&mut self, cells: &[String]) {
        debug_assert_eq!(cells.len(), self.columns);
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

/// Pretty JSON with the provenance keys first.
pub fn json_with_provenance<T: Serialize>(provenance: &Provenance, body: &T) -> Result<String> {
    let mut value = serde_json::Map::new();
    value.insert("config_hash".into(), provenance.config_hash.clone().into());
    value.insert("seed".into(), provenance.seed.into());
    match serde_json::to_value(body).map_err(|e| CliError::config("<output>", e.to_string()))? {
        serde_json::Value::Object(map) => value.extend(map),
        other => {
            value.insert("data".into(), other);
        }
    }
    let mut text = serde_json::to_string_pretty(&serde_json::Value::Object(value))
        .map_err(|e| CliError::config("<output>", e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// Output directory of one run. Files are never replaced by different
/// content; rewriting identical bytes is a no-op.
#[derive(Debug, Clone)]
pub struct RunDir {
    path: PathBuf,
    written: Vec<PathBuf>,
}

impl RunDir {
    pub fn create(root: &Path, command: &str, config_hash: &str) -> Result<Self> {
        let path = root.join(format!("{command}-{}", &config_hash[..16]));
        fs::create_dir_all(&path)
            .map_err(|e| CliError::io(format!("creating {}", path.display()), e))?;
        Ok(Self {
            path,
            written: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let target = self.path.join(name);
        match fs::read(&target) {
            Ok(existing) if existing == contents.as_bytes() => {}
            Ok(_) => {
                return Err(CliError::io(
                    format!("{} exists with different content", target.display()),
                    std::io::Error::from(std::io::ErrorKind::AlreadyExists),
                ))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                fs::write(&target, contents)
                    .map_err(|e| CliError::io(format!("writing {}", target.display()), e))?;
            }
            Err(e) => return Err(CliError::io(format!("reading {}", target.display()), e)),
        }
        self.written.push(target.clone());
        Ok(target)
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    x.to_string()
}
