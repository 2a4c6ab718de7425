//! Artifact writing: data tables (CSV or JSON records), the summary and the
//! manifest.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::config::{hex, ExperimentConfig, Format};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Bool(bool),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<Option<usize>> for Cell {
    fn from(v: Option<usize>) -> Self {
        v.map_or(Cell::Text(String::new()), Cell::from)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Text(String::new()), Cell::Float)
    }
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Float(v) => v.to_string(),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Float(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Int(v) => Value::from(*v),
            Cell::Bool(v) => Value::from(*v),
            Cell::Text(s) if s.is_empty() => Value::Null,
            Cell::Text(s) => Value::from(s.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&'static str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> io::Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::text))?;
        }
        w.into_inner().map_err(|e| io::Error::other(e.to_string()))
    }

    pub fn to_json(&self) -> Vec<u8> {
        let records: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let mut m = Map::new();
                for (c, v) in self.columns.iter().zip(r) {
                    m.insert((*c).to_string(), v.json());
                }
                Value::Object(m)
            })
            .collect();
        let mut out = serde_json::to_vec_pretty(&records).unwrap_or_default();
        out.push(b'\n');
        out
    }
}

/// Field dump with columns `y, re, im`.
pub fn field_table(name: &str, field: &pointerlab::ComplexField) -> Table {
    let mut t = Table::new(name, &["y", "re", "im"]);
    let grid = field.grid();
    for (j, a) in field.amplitudes().iter().enumerate() {
        t.push(vec![grid.position(j).into(), a.re.into(), a.im.into()]);
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Criterion {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: String,
}

impl Criterion {
    pub fn new(name: &str, pass: bool, value: f64, threshold: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            pass,
            value,
            threshold: threshold.into(),
        }
    }
}

/// Everything an experiment produces.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub tables: Vec<Table>,
    pub summary: Map<String, Value>,
    pub criteria: Vec<Criterion>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub program: &'static str,
    pub version: &'static str,
    pub experiment: &'static str,
    pub seed: u64,
    pub config: std::collections::BTreeMap<String, String>,
    pub config_hash: String,
    pub files: Vec<FileRecord>,
    pub criteria: Vec<Criterion>,
    pub all_pass: bool,
}

fn sha(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn write(dir: &Path, name: &str, bytes: &[u8], files: &mut Vec<FileRecord>) -> io::Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, bytes)?;
    files.push(FileRecord {
        path: name.to_string(),
        sha256: sha(bytes),
    });
    Ok(path)
}

/// Writes the tables, `summary.json`, the re-runnable `config.ini` and
/// `manifest.json` into `config.out`.
pub fn write_artifacts(config: &ExperimentConfig, artifacts: &Artifacts) -> io::Result<Manifest> {
    let dir = &config.out;
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let prefix = config.experiment.name();
    for t in &artifacts.tables {
        let (bytes, ext) = match config.format {
            Format::Csv => (t.to_csv()?, "csv"),
            Format::Json => (t.to_json(), "json"),
        };
        write(dir, &format!("{prefix}_{}.{ext}", t.name), &bytes, &mut files)?;
    }
    let mut summary = artifacts.summary.clone();
    summary.insert("experiment".into(), Value::from(prefix));
    summary.insert(
        "criteria".into(),
        serde_json::to_value(&artifacts.criteria).unwrap_or(Value::Null),
    );
    summary.insert("all_pass".into(), Value::from(artifacts.criteria.iter().all(|c| c.pass)));
    let mut bytes = serde_json::to_vec_pretty(&Value::Object(summary))?;
    bytes.push(b'\n');
    write(dir, "summary.json", &bytes, &mut files)?;
    write(dir, "config.ini", config.to_config_text().as_bytes(), &mut files)?;
    let manifest = Manifest {
        program: "pointerlab",
        version: env!("CARGO_PKG_VERSION"),
        experiment: prefix,
        seed: config.seed,
        config: config.echo(),
        config_hash: config.hash(),
        files,
        criteria: artifacts.criteria.clone(),
        all_pass: artifacts.criteria.iter().all(|c| c.pass),
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    fs::write(dir.join("manifest.json"), bytes)?;
    Ok(manifest)
}
