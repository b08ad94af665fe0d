use std::fmt::Write as _;
use std::path::Path;

use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
    Flag(bool),
    Empty,
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Num(v) => Some(v),
            Cell::Int(v) => Some(v as f64),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match *self {
            Cell::Flag(b) => Some(b),
            _ => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Flag(v)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}
impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

/// 17 significant digits, exponent form, independent of locale.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub seed: u64,
    pub config_digest: String,
    pub config: Value,
    /// Free-form per-run records (redraw counts, exclusions, centering constants, trend summaries).
    pub notes: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub kind: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub provenance: Provenance,
}

impl ReportTable {
    pub(crate) fn new(config: &ExperimentConfig, columns: &[&'static str]) -> Self {
        ReportTable {
            kind: config.kind.as_str(),
            columns: columns.to_vec(),
            rows: Vec::new(),
            provenance: Provenance {
                seed: config.seed,
                config_digest: config.digest(),
                config: serde_json::to_value(config.raw()).expect("config serializes"),
                notes: Vec::new(),
            },
        }
    }

    pub(crate) fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for {}", self.kind);
        self.rows.push(row);
    }

    pub(crate) fn note(&mut self, v: Value) {
        self.provenance.notes.push(v);
    }

    pub fn col(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }

    pub fn cell(&self, row: usize, name: &str) -> Option<&Cell> {
        self.rows.get(row)?.get(self.col(name)?)
    }

    pub fn num(&self, row: usize, name: &str) -> Option<f64> {
        self.cell(row, name)?.as_f64()
    }

    /// Numeric column, `None` entries for empty or non-numeric cells.
    pub fn column(&self, name: &str) -> Vec<Option<f64>> {
        (0..self.rows.len()).map(|r| self.num(r, name)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let fields: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Int(v) => v.to_string(),
                    Cell::Num(v) => fmt_num(*v),
                    Cell::Text(t) => t.clone(),
                    Cell::Flag(b) => b.to_string(),
                    Cell::Empty => String::new(),
                })
                .collect();
            s.push_str(&fields.join(","));
            s.push('\n');
        }
        s
    }

    pub fn provenance_jsonl(&self) -> String {
        let mut s = String::new();
        let head = json!({
            "record": "run",
            "kind": self.kind,
            "seed": self.provenance.seed,
            "config_sha256": self.provenance.config_digest,
            "config": self.provenance.config,
            "version": env!("CARGO_PKG_VERSION"),
            "rows": self.rows.len(),
        });
        writeln!(s, "{head}").unwrap();
        for n in &self.provenance.notes {
            writeln!(s, "{}", json!({ "record": "note", "note": n })).unwrap();
        }
        s
    }

    /// Writes `report.csv` and `provenance.jsonl` into `dir`, creating it if needed.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let io = |e: std::io::Error| HarnessError::Io(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        std::fs::write(dir.join("report.csv"), self.to_csv()).map_err(io)?;
        std::fs::write(dir.join("provenance.jsonl"), self.provenance_jsonl()).map_err(io)?;
        Ok(())
    }
}
