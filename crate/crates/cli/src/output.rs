//! Tables, config loading and all-or-nothing artifact writing.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use crate::CliError;

pub const SCHEMA: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            // 17 significant digits round-trip every double
            Cell::Num(x) => format!("{x:.16e}"),
            Cell::Text(s) if s.contains([',', '"', '\n']) => {
                format!("\"{}\"", s.replace('"', "\"\""))
            }
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(i) => json!(i),
            Cell::Num(x) if x.is_finite() => json!(x),
            Cell::Num(_) => Value::Null,
            Cell::Text(s) => json!(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_owned())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(Cell::csv).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Array(r.iter().map(Cell::json).collect()))
            .collect();
        json!({ "columns": self.columns, "rows": rows })
    }
}

/// What a subcommand produced.
pub struct Outcome {
    pub table: Table,
    pub summary: Value,
    /// False when a verified property failed.
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Sibling file holding the JSON summary of a CSV artifact.
pub fn summary_path(out: &Path) -> PathBuf {
    out.with_extension("summary.json")
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)
        .and_then(|_| fs::rename(&tmp, path))
        .map_err(|e| {
            let _ = fs::remove_file(&tmp);
            CliError::Io(format!("{}: {e}", path.display()))
        })
}

pub fn write(
    outcome: &Outcome,
    header: Value,
    out: &Path,
    format: Format,
) -> Result<(), CliError> {
    let mut summary = header;
    summary["passed"] = json!(outcome.passed);
    summary["result"] = outcome.summary.clone();
    match format {
        Format::Csv => {
            let text = pretty(&summary)?;
            write_atomic(out, &outcome.table.to_csv())?;
            if let Err(e) = write_atomic(&summary_path(out), &text) {
                let _ = fs::remove_file(out);
                return Err(e);
            }
        }
        Format::Json => {
            summary["table"] = outcome.table.to_json();
            write_atomic(out, &pretty(&summary)?)?;
        }
    }
    Ok(())
}

fn pretty(v: &Value) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Reads a versioned config; an absent path yields the subcommand defaults.
pub fn load_config<T: DeserializeOwned>(path: Option<&Path>) -> Result<T, CliError> {
    let mut value = match path {
        None => json!({}),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            let mut v: Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            let obj = v
                .as_object_mut()
                .ok_or_else(|| CliError::Usage("config must be a JSON object".into()))?;
            match obj.remove("schema") {
                Some(Value::Number(n)) if n.as_u64() == Some(SCHEMA) => {}
                Some(other) => {
                    return Err(CliError::Usage(format!(
                        "config field `schema`: expected {SCHEMA}, got {other}"
                    )))
                }
                None => return Err(CliError::Usage("config field `schema`: missing".into())),
            }
            v
        }
    };
    if let Some(obj) = value.as_object_mut() {
        obj.retain(|_, v| !v.is_null());
    }
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            CliError::Usage(format!("config: {}", e.inner()))
        } else {
            CliError::Usage(format!("config field `{path}`: {}", e.inner()))
        }
    })
}

/// Usage error naming a config field.
pub fn field_error(field: impl std::fmt::Display, msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("config field `{field}`: {msg}"))
}
