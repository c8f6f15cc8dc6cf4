//! Scenario configuration (flat `key = value` text with dotted sections) and result tables
//! serialized as CSV or JSON with a provenance block.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Parsed configuration; keys keep their dotted form (`source.sigma_p`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    /// Parses `key = value` lines; `#` starts a comment, blank lines are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::invalid("config", format!("line {}: expected 'key = value'", no + 1))
            })?;
            let key = key.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.') {
                return Err(Error::invalid("config", format!("line {}: bad key '{key}'", no + 1)));
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(Error::invalid(key, format!("line {}: duplicate key", no + 1)));
            }
        }
        Ok(Config { entries })
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.str(key).unwrap_or(default)
    }

    pub fn parse_value<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.str(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| Error::invalid(key, format!("cannot parse '{v}'"))),
        }
    }

    pub fn value_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parse_value(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.parse_value(key)?.ok_or_else(|| Error::invalid(key, "required key is missing"))
    }

    /// A list of numbers: comma separated values or `start:stop:count` (inclusive, evenly spaced).
    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(v) = self.str(key) else { return Ok(None) };
        parse_list(v).map(Some).map_err(|reason| Error::invalid(key, reason))
    }

    /// A (lo, hi) pair; a single value fixes both ends.
    pub fn range(&self, key: &str) -> Result<Option<(f64, f64)>> {
        match self.list(key)? {
            None => Ok(None),
            Some(v) if v.len() == 1 => Ok(Some((v[0], v[0]))),
            Some(v) if v.len() == 2 => Ok(Some((v[0], v[1]))),
            Some(_) => Err(Error::invalid(key, "expected 'lo, hi' or a single value")),
        }
    }

    /// Rejects keys outside the allowed set.
    pub fn check_known(&self, allowed: &[&str]) -> Result<()> {
        for key in self.keys() {
            if !allowed.contains(&key) {
                return Err(Error::invalid(key, "unknown configuration key"));
            }
        }
        Ok(())
    }

    /// Canonical `key = value` text, sorted by key.
    pub fn canonical(&self) -> String {
        self.entries.iter().fold(String::new(), |mut s, (k, v)| {
            let _ = writeln!(s, "{k} = {v}");
            s
        })
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes()).iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

fn parse_list(v: &str) -> std::result::Result<Vec<f64>, String> {
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("bad number '{}'", s.trim()));
    let parts: Vec<&str> = v.split(':').collect();
    let out = match parts.len() {
        1 => v.split(',').map(num).collect::<std::result::Result<Vec<_>, _>>()?,
        3 => {
            let (a, b) = (num(parts[0])?, num(parts[1])?);
            let n: usize = parts[2].trim().parse().map_err(|_| format!("bad count '{}'", parts[2]))?;
            match n {
                0 => return Err("count must be >= 1".into()),
                1 => vec![a],
                _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
            }
        }
        _ => return Err("expected a comma list or start:stop:count".into()),
    };
    if out.iter().any(|x| !x.is_finite()) {
        return Err("values must be finite".into());
    }
    Ok(out)
}

pub const TIMESTAMP_KEY: &str = "timestamp";

/// Ordered provenance entries; `config_hash`, `code_version` and `seed` are always present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance(pub Vec<(String, String)>);

impl Provenance {
    pub fn new(config_hash: &str, seed: u64) -> Self {
        Provenance(vec![
            ("config_hash".into(), config_hash.into()),
            ("code_version".into(), env!("CARGO_PKG_VERSION").into()),
            ("seed".into(), seed.to_string()),
        ])
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.0.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Appends the current Unix time in seconds.
    pub fn stamp(&mut self) {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        self.push(TIMESTAMP_KEY, secs);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::invalid("format", format!("unknown format '{s}' (csv, json)"))),
        }
    }
}

/// Numeric table with named columns and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct JsonTable {
    provenance: BTreeMap<String, String>,
    provenance_order: Vec<String>,
    columns: Vec<String>,
    rows: Vec<Vec<Option<f64>>>,
}

/// 17 significant digits, enough to round-trip any f64.
pub fn format_number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

impl ResultTable {
    pub fn new(columns: &[&str], provenance: Provenance) -> Self {
        ResultTable { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new(), provenance }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::invalid("table", "row width differs from the column count"));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.provenance.0 {
            let _ = writeln!(s, "# {k} = {v}");
        }
        let _ = writeln!(s, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&x| format_number(x)).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut provenance = Vec::new();
        let mut columns: Option<Vec<String>> = None;
        let mut rows = Vec::new();
        for (no, line) in text.lines().enumerate() {
            if let Some(meta) = line.strip_prefix("# ") {
                let (k, v) = meta
                    .split_once(" = ")
                    .ok_or_else(|| Error::invalid("table", format!("line {}: bad provenance", no + 1)))?;
                provenance.push((k.to_string(), v.to_string()));
            } else if columns.is_none() {
                columns = Some(line.split(',').map(str::to_string).collect());
            } else {
                let row: std::result::Result<Vec<f64>, _> = line.split(',').map(str::parse).collect();
                let row = row.map_err(|_| Error::invalid("table", format!("line {}: bad number", no + 1)))?;
                rows.push(row);
            }
        }
        let columns = columns.ok_or_else(|| Error::invalid("table", "missing column header"))?;
        let table = ResultTable { columns, rows, provenance: Provenance(provenance) };
        table.validate()?;
        Ok(table)
    }

    pub fn to_json(&self) -> String {
        let j = JsonTable {
            provenance: self.provenance.0.iter().cloned().collect(),
            provenance_order: self.provenance.0.iter().map(|(k, _)| k.clone()).collect(),
            columns: self.columns.clone(),
            rows: self.rows.iter().map(|r| r.iter().map(|&x| x.is_finite().then_some(x)).collect()).collect(),
        };
        let mut s = serde_json::to_string_pretty(&j).expect("tables serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: JsonTable = serde_json::from_str(text).map_err(|e| Error::invalid("table", e.to_string()))?;
        let provenance = j
            .provenance_order
            .iter()
            .map(|k| {
                let v = j
                    .provenance
                    .get(k)
                    .ok_or_else(|| Error::invalid("table", "provenance order mismatch"))?;
                Ok((k.clone(), v.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let rows =
            j.rows.into_iter().map(|r| r.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect()).collect();
        let table = ResultTable { columns: j.columns, rows, provenance: Provenance(provenance) };
        table.validate()?;
        Ok(table)
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    pub fn parse(text: &str, format: Format) -> Result<Self> {
        match format {
            Format::Csv => Self::from_csv(text),
            Format::Json => Self::from_json(text),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for key in ["config_hash", "code_version", "seed"] {
            if self.provenance.get(key).is_none() {
                return Err(Error::invalid("table", format!("provenance lacks '{key}'")));
            }
        }
        if self.rows.iter().any(|r| r.len() != self.columns.len()) {
            return Err(Error::invalid("table", "row width differs from the column count"));
        }
        Ok(())
    }
}
