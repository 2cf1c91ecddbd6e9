//! Byte-stable JSON and CSV emission.

use super::CliError;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// 17 significant digits, enough to round-trip any f64.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn write_value(out: &mut String, v: &Value, indent: Option<usize>, depth: usize) {
    let newline = |out: &mut String, d: usize| {
        if let Some(w) = indent {
            out.push('\n');
            out.extend(std::iter::repeat_n(' ', w * d));
        }
    };
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                write!(out, "{i}").unwrap();
            } else if let Some(u) = n.as_u64() {
                write!(out, "{u}").unwrap();
            } else {
                out.push_str(&format_float(n.as_f64().expect("json number")));
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serializes")),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (k, item) in items.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                newline(out, depth + 1);
                write_value(out, item, indent, depth + 1);
            }
            newline(out, depth);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (k, key) in keys.into_iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                newline(out, depth + 1);
                out.push_str(&serde_json::to_string(key).expect("string serializes"));
                out.push(':');
                if indent.is_some() {
                    out.push(' ');
                }
                write_value(out, &map[key], indent, depth + 1);
            }
            newline(out, depth);
            out.push('}');
        }
    }
}

/// Compact form with sorted keys, used for hashing.
pub fn canonical_json(v: &Value) -> String {
    let mut s = String::new();
    write_value(&mut s, v, None, 0);
    s
}

/// Indented form with sorted keys and a trailing newline, used for files.
pub fn pretty_json(v: &Value) -> String {
    let mut s = String::new();
    write_value(&mut s, v, Some(2), 0);
    s.push('\n');
    s
}

pub fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("output types serialize to JSON")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    std::fs::write(path, text).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn write_json(path: &Path, v: &Value) -> Result<(), CliError> {
    write_text(path, &pretty_json(v))
}

/// One CSV cell.
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => format_float(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

/// CSV text with a header row and LF line endings.
pub fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<Cell>>) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::Output(e.to_string());
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.write_record(row.iter().map(Cell::render)).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 input is utf-8"))
}

pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<Cell>>) -> Result<(), CliError> {
    write_text(path, &csv_string(header, rows)?)
}

/// gnuplot script plotting columns of a CSV file against its first column
/// (or against `x_col`).
pub fn gnuplot_script(csv_file: &str, title: &str, x_col: usize, series: &[(usize, &str)]) -> String {
    let mut s = String::new();
    writeln!(s, "set datafile separator ','").unwrap();
    writeln!(s, "set key autotitle columnhead").unwrap();
    writeln!(s, "set title {:?}", title).unwrap();
    writeln!(s, "set grid").unwrap();
    let plots: Vec<String> = series
        .iter()
        .map(|(col, name)| format!("{csv_file:?} using {x_col}:{col} with lines title {name:?}"))
        .collect();
    writeln!(s, "plot {}", plots.join(", \\\n     ")).unwrap();
    writeln!(s, "pause -1").unwrap();
    s
}

/// Record of one command invocation.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub scenario_hash: String,
    pub tool_version: String,
    pub constants_version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub outputs: Vec<PathBuf>,
    pub failed_runs: Vec<usize>,
}

impl RunManifest {
    pub fn new(command: &str, scenario_hash: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            scenario_hash: scenario_hash.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            constants_version: crate::constants::CONSTANTS_VERSION.to_string(),
            timestamp: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            outputs: Vec::new(),
            failed_runs: Vec::new(),
        }
    }
}
