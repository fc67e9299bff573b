//! Tables and reports in CSV or JSON.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::{Map, Value};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// One cell; `Empty` marks a value that does not apply to the row.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

/// Shortest decimal that round-trips to the same `f64`.
pub fn format_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if x == 0.0 || (1e-4..1e16).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => format_num(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    pub fn json(&self) -> Value {
        match self {
            Cell::Num(x) => num(*x),
            Cell::Int(i) => Value::from(*i),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Empty => Value::Null,
        }
    }
}

/// JSON number, `null` when not finite.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn opt_num(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::csv).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    /// Array of row objects keyed by column name.
    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> = self.columns.iter().cloned().zip(row.iter().map(Cell::json)).collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }
}

/// Everything a subcommand produces.
#[derive(Debug, Clone)]
pub struct Report {
    pub command: String,
    pub params: Value,
    /// Scalar results that are not part of any table.
    pub summary: Map<String, Value>,
    pub tables: Vec<Table>,
    pub diagnostics: Map<String, Value>,
}

impl Report {
    pub fn to_json(&self) -> Value {
        let mut results = self.summary.clone();
        for t in &self.tables {
            results.insert(t.name.clone(), t.to_json());
        }
        serde_json::json!({
            "params": self.params,
            "command": self.command,
            "results": results,
            "diagnostics": self.diagnostics,
        })
    }

    /// Scalar results and diagnostics as a two-column table.
    fn summary_table(&self) -> Table {
        let mut t = Table::new("summary", &["key", "value"]);
        let entries = self.summary.iter().chain(self.diagnostics.iter());
        for (k, v) in entries {
            let cell = match v {
                Value::Null => Cell::Empty,
                Value::Bool(b) => Cell::Bool(*b),
                Value::Number(n) if n.is_i64() => Cell::Int(n.as_i64().unwrap()),
                Value::Number(n) => Cell::Num(n.as_f64().unwrap()),
                Value::String(s) => Cell::Text(s.clone()),
                other => Cell::Text(other.to_string()),
            };
            t.push(vec![Cell::Text(k.clone()), cell]);
        }
        t
    }

    /// `(file name, contents)` pairs for `format`.
    pub fn render(&self, format: Format) -> Vec<(String, String)> {
        match format {
            Format::Json => {
                let mut text = serde_json::to_string_pretty(&self.to_json()).expect("report serialises");
                text.push('\n');
                vec![(format!("{}.json", self.command), text)]
            }
            Format::Csv => {
                let mut files: Vec<(String, String)> = self
                    .tables
                    .iter()
                    .map(|t| (format!("{}_{}.csv", self.command, t.name), t.to_csv()))
                    .collect();
                files.push((format!("{}_summary.csv", self.command), self.summary_table().to_csv()));
                files
            }
        }
    }

    /// Writes into `dir`, or to stdout (tables separated by blank lines) when
    /// no directory is given.
    pub fn emit(&self, format: Format, dir: Option<&Path>) -> Result<Vec<String>, CliError> {
        let files = self.render(format);
        match dir {
            Some(dir) => {
                std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
                    context: format!("creating {}", dir.display()),
                    source: e,
                })?;
                for (name, text) in &files {
                    let path = dir.join(name);
                    std::fs::write(&path, text).map_err(|e| CliError::Io {
                        context: format!("writing {}", path.display()),
                        source: e,
                    })?;
                }
            }
            None => {
                let joined: Vec<&str> = files.iter().map(|(_, t)| t.as_str()).collect();
                print!("{}", joined.join("\n"));
            }
        }
        Ok(files.into_iter().map(|(n, _)| n).collect())
    }
}
