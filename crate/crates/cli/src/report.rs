//! report.json assembly and CSV tables.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Number, Value};

use crate::config::{Format, RunConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// One named verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub message: String,
}

/// A CSV table: header plus rows of already formatted fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file_name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file_name: &str, header: &[&str]) -> Self {
        Self {
            file_name: file_name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    /// CSV bytes with `\n` line endings.
    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

/// `x` with 17 significant digits; empty for `None`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Compact form for stdout: exponent notation for tiny magnitudes.
pub fn fmt_human(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-3 {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Outcome {
    pub results: Vec<(String, Value)>,
    pub verdicts: Vec<Verdict>,
    pub errors: Vec<ErrorRecord>,
    pub tables: Vec<Table>,
    /// Human-readable lines for stdout.
    pub lines: Vec<String>,
}

impl Outcome {
    pub fn result<T: Serialize>(&mut self, name: &str, value: &T) {
        let v = serde_json::to_value(value).unwrap_or_else(|e| Value::String(format!("unserializable: {e}")));
        self.results.push((name.into(), v));
    }

    pub fn verdict(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        let detail = detail.into();
        self.lines.push(format!("[{}] {name}: {detail}", if passed { "PASS" } else { "FAIL" }));
        self.verdicts.push(Verdict {
            name: name.into(),
            passed,
            detail,
        });
    }

    pub fn line(&mut self, s: impl Into<String>) {
        self.lines.push(s.into());
    }

    pub fn all_passed(&self) -> bool {
        self.errors.is_empty() && self.verdicts.iter().all(|v| v.passed)
    }
}

/// Re-encode every float with 17 significant digits.
pub fn with_precision(v: Value) -> Value {
    match v {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => match n.as_f64() {
            Some(x) if x.is_finite() => fmt_f64(x).parse::<Number>().map(Value::Number).unwrap_or(Value::Null),
            _ => Value::Null,
        },
        Value::Array(a) => Value::Array(a.into_iter().map(with_precision).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, with_precision(v))).collect()),
        other => other,
    }
}

pub fn report_json(config: Option<&RunConfig>, outcome: &Outcome) -> Value {
    let mut root = Map::new();
    root.insert("schema_version".into(), Value::from(SCHEMA_VERSION));
    root.insert(
        "config".into(),
        config.map(|c| serde_json::to_value(c).unwrap_or(Value::Null)).unwrap_or(Value::Null),
    );
    let results: Vec<Value> = outcome
        .results
        .iter()
        .map(|(name, v)| {
            let mut m = Map::new();
            m.insert("name".into(), Value::String(name.clone()));
            m.insert("data".into(), v.clone());
            Value::Object(m)
        })
        .collect();
    root.insert("results".into(), Value::Array(results));
    root.insert("verdicts".into(), serde_json::to_value(&outcome.verdicts).unwrap_or(Value::Null));
    root.insert("all_confirmed".into(), Value::Bool(outcome.all_passed()));
    root.insert("errors".into(), serde_json::to_value(&outcome.errors).unwrap_or(Value::Null));
    with_precision(Value::Object(root))
}

/// Writes report.json and the tables under `dir` according to `format`.
pub fn write_outputs(dir: &Path, format: Format, config: Option<&RunConfig>, outcome: &Outcome) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    if matches!(format, Format::Json | Format::Both) {
        let json = serde_json::to_string_pretty(&report_json(config, outcome)).expect("json encoding");
        fs::write(dir.join("report.json"), json + "\n")?;
    }
    if matches!(format, Format::Csv | Format::Both) {
        for t in &outcome.tables {
            fs::write(dir.join(&t.file_name), t.to_csv())?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_get_seventeen_digits() {
        let v = with_precision(serde_json::json!({"a": 0.1, "b": [1, 2.5], "c": "x"}));
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"{"a":1.0000000000000001e-1,"b":[1,2.5000000000000000e+0],"c":"x"}"#);
    }

    #[test]
    fn csv_uses_newlines_and_header() {
        let mut t = Table::new("t.csv", &["epsilon", "quotient"]);
        t.push(vec![fmt_f64(0.125), fmt_opt(None)]);
        assert_eq!(String::from_utf8(t.to_csv()).unwrap(), "epsilon,quotient\n1.2500000000000000e-1,\n");
    }
}
