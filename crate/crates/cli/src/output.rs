//! Tables, manifests and small file helpers.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Map, Value};

use crate::config::{Format, RunConfig};
use crate::error::{CliError, CliResult};

/// Column-oriented table written as CSV and optionally JSON.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(ToString::to_string).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut obj = Map::new();
                for (h, v) in self.header.iter().zip(r) {
                    let value = match v.as_str() {
                        "true" => Value::Bool(true),
                        "false" => Value::Bool(false),
                        _ => v.parse::<f64>().ok().and_then(|x| serde_json::Number::from_f64(x).map(Value::Number)).unwrap_or_else(|| Value::String(v.clone())),
                    };
                    obj.insert(h.clone(), value);
                }
                Value::Object(obj)
            })
            .collect();
        Value::Array(rows)
    }

    pub fn parse_csv(text: &str) -> CliResult<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| CliError::Dependency("empty table".into()))?
            .split(',')
            .map(|h| h.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate() {
            let row: Vec<String> = line.split(',').map(|v| v.trim().to_string()).collect();
            if row.len() != header.len() {
                return Err(CliError::Dependency(format!("row {} has {} columns, expected {}", k + 1, row.len(), header.len())));
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse_csv(&text)
    }

    pub fn column(&self, name: &str) -> CliResult<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Dependency(format!("table has no column '{name}'")))
    }

    pub fn numbers(&self, name: &str) -> CliResult<Vec<f64>> {
        let c = self.column(name)?;
        self.rows
            .iter()
            .map(|r| r[c].parse().map_err(|_| CliError::Dependency(format!("'{}' in column {name} is not a number", r[c]))))
            .collect()
    }

    /// Writes `<stem>.csv` and/or `<stem>.json`; returns the written paths.
    pub fn write(&self, dir: &Path, stem: &str, formats: &[Format]) -> CliResult<Vec<PathBuf>> {
        let mut written = Vec::new();
        for f in formats {
            let (path, body) = match f {
                Format::Csv => (dir.join(format!("{stem}.csv")), self.to_csv()),
                Format::Json => (dir.join(format!("{stem}.json")), pretty(&self.to_json())),
            };
            write_file(&path, &body)?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Shortest round-trip form, switching to exponent notation for very small or large values.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

pub fn write_file(path: &Path, body: &str) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, body).map_err(|e| CliError::io(path, e))
}

/// Writes through a temporary file so an interrupted run never leaves a torn file.
pub fn write_atomic(path: &Path, body: &str) -> CliResult<()> {
    let tmp = path.with_extension("tmp");
    write_file(&tmp, body)?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

/// Run manifest: configuration, results and timing.
pub struct Manifest {
    body: Map<String, Value>,
    started: SystemTime,
}

impl Manifest {
    pub fn new(cfg: &RunConfig) -> Self {
        let mut body = Map::new();
        body.insert("tool".into(), json!(concat!("rydberg ", env!("CARGO_PKG_VERSION"))));
        let config: Map<String, Value> = cfg.to_pairs().into_iter().map(|(k, v)| (k, Value::String(v))).collect();
        body.insert("config".into(), Value::Object(config));
        Self { body, started: SystemTime::now() }
    }

    pub fn set(&mut self, key: &str, value: Value) {
        self.body.insert(key.into(), value);
    }

    /// Adds timing fields and writes `manifest.json` into `dir`.
    pub fn finish(mut self, dir: &Path) -> CliResult<Value> {
        let now = SystemTime::now();
        let wall = now.duration_since(self.started).map(|d| d.as_secs_f64()).unwrap_or(0.0);
        let stamp = now.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        self.body.insert("wall_time_s".into(), json!(wall));
        self.body.insert("finished_unix".into(), json!(stamp));
        let value = Value::Object(self.body);
        write_file(&dir.join("manifest.json"), &pretty(&value))?;
        Ok(value)
    }
}
