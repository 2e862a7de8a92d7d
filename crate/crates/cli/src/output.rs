//! Result files: a header line carrying the resolved config, one record per
//! row, and a trailing summary.  CSV puts header and summary on `#` lines.

use std::io::{BufRead, Write};
use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{CliError, CliResult};

pub const TOOL: &str = "critkill";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn for_path(path: Option<&Path>) -> Format {
        match path.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
            Some("json" | "jsonl") => Format::Json,
            _ => Format::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: Value,
}

impl Header {
    pub fn new(command: &str, config: Value) -> Self {
        Header {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            config,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
    pub summary: Map<String, Value>,
    /// (x, y, err) triples for the plot-data file.
    pub plot: Vec<(f64, f64, f64)>,
}

impl Report {
    pub fn new(columns: &[&'static str]) -> Self {
        Report {
            columns: columns.to_vec(),
            ..Default::default()
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn set(&mut self, key: &str, v: impl Serialize) {
        self.summary.insert(key.into(), json!(v));
    }
}

/// Non-finite floats become null in JSON; keep them readable in CSV.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::String(format!("{x}"))
    }
}

pub fn point(x: &[f64]) -> Value {
    Value::Array(x.iter().map(|&v| num(v)).collect())
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(csv_cell).collect::<Vec<_>>().join(";"),
        other => other.to_string(),
    }
}

pub fn write_report<W: Write>(w: &mut W, format: Format, header: &Header, report: &Report) -> CliResult<()> {
    let head = serde_json::to_string(header)?;
    match format {
        Format::Json => {
            writeln!(w, "{}", json!({ "header": header }))?;
            for row in &report.rows {
                let obj: Map<String, Value> = report
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(k, v)| (k.to_string(), v.clone()))
                    .collect();
                writeln!(w, "{}", json!({ "row": obj }))?;
            }
            writeln!(w, "{}", json!({ "summary": report.summary }))?;
        }
        Format::Csv => {
            writeln!(w, "# {head}")?;
            let mut out = csv::Writer::from_writer(Vec::new());
            let fail = |e: csv::Error| CliError::Usage(format!("csv: {e}"));
            out.write_record(&report.columns).map_err(fail)?;
            for row in &report.rows {
                out.write_record(row.iter().map(csv_cell)).map_err(fail)?;
            }
            let bytes = out.into_inner().map_err(|e| CliError::Usage(format!("csv: {e}")))?;
            w.write_all(&bytes)?;
            writeln!(w, "# summary {}", Value::Object(report.summary.clone()))?;
        }
    }
    Ok(())
}

/// Whitespace-separated `x y err` lines.
pub fn write_plot<W: Write>(w: &mut W, header: &Header, plot: &[(f64, f64, f64)]) -> CliResult<()> {
    writeln!(w, "# {}", serde_json::to_string(header)?)?;
    for (x, y, e) in plot {
        writeln!(w, "{x:e} {y:e} {e:e}")?;
    }
    Ok(())
}

/// Reads the header line back from a result file of either format.
pub fn read_header<R: BufRead>(mut r: R) -> CliResult<Header> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let line = line.trim();
    let bad = || CliError::Usage("file does not start with a critkill header".into());
    let h: Header = if let Some(rest) = line.strip_prefix("# ") {
        serde_json::from_str(rest).map_err(|_| bad())?
    } else {
        let v: Value = serde_json::from_str(line).map_err(|_| bad())?;
        serde_json::from_value(v.get("header").cloned().ok_or_else(bad)?).map_err(|_| bad())?
    };
    if h.tool != TOOL {
        return Err(bad());
    }
    Ok(h)
}

/// The summary object of a result file.
pub fn read_summary(text: &str) -> CliResult<Map<String, Value>> {
    let missing = || CliError::Usage("result file has no summary".into());
    let line = text.lines().rev().find(|l| !l.trim().is_empty()).ok_or_else(missing)?;
    let v: Value = if let Some(rest) = line.strip_prefix("# summary ") {
        serde_json::from_str(rest)?
    } else {
        serde_json::from_str::<Value>(line)?.get("summary").cloned().ok_or_else(missing)?
    };
    match v {
        Value::Object(m) => Ok(m),
        _ => Err(missing()),
    }
}
