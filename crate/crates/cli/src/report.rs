use std::io::Write;

use hardylab::LabError;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub core_version: String,
    pub seed: Option<u64>,
    pub timestamp: String,
}

impl Provenance {
    pub fn now(seed: Option<u64>) -> Self {
        Provenance {
            version: env!("CARGO_PKG_VERSION").to_string(),
            core_version: hardylab::VERSION.to_string(),
            seed,
            timestamp: chrono::Utc::now().to_rfc3339(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    /// Bad input; nothing was computed.
    Validation,
    /// The computation itself failed.
    Module,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportError {
    pub kind: ErrorKind,
    pub field: Option<String>,
    pub message: String,
}

impl ReportError {
    pub fn validation(field: Option<String>, message: impl Into<String>) -> Self {
        ReportError { kind: ErrorKind::Validation, field, message: message.into() }
    }
}

impl From<&LabError> for ReportError {
    fn from(e: &LabError) -> Self {
        match e {
            LabError::Validation { field, .. } => ReportError::validation(Some(field.clone()), e.to_string()),
            _ => ReportError { kind: ErrorKind::Module, field: None, message: e.to_string() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    /// Parameters after defaults were applied.
    pub params: Value,
    pub results: Value,
    pub provenance: Provenance,
    pub warnings: Vec<String>,
    pub passed: bool,
    pub error: Option<ReportError>,
}

impl Report {
    pub fn failed(command: &str, params: Value, seed: Option<u64>, err: ReportError) -> Self {
        Report {
            command: command.to_string(),
            params,
            results: Value::Null,
            provenance: Provenance::now(seed),
            warnings: Vec::new(),
            passed: false,
            error: Some(err),
        }
    }

    pub fn is_validation_error(&self) -> bool {
        matches!(&self.error, Some(e) if e.kind == ErrorKind::Validation)
    }
}

/// Process exit status for a set of reports: 2 for rejected input, 1 for a
/// failed check or computation, 0 otherwise.
pub fn exit_code(reports: &[Report], single: bool) -> i32 {
    if single && reports.iter().any(Report::is_validation_error) {
        2
    } else if reports.iter().all(|r| r.passed) {
        0
    } else {
        1
    }
}

pub fn fmt_number(v: &serde_json::Number) -> String {
    if let Some(i) = v.as_i64() {
        i.to_string()
    } else if let Some(u) = v.as_u64() {
        u.to_string()
    } else {
        format!("{:.16e}", v.as_f64().unwrap_or(f64::NAN))
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Number(x) => fmt_number(x),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Depth-first `(dotted.path, value)` pairs of every leaf.
pub fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                flatten(&join(k), x, out);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&join(&i.to_string()), x, out);
            }
        }
        leaf => out.push((prefix.to_string(), scalar(leaf))),
    }
}

/// Rows of `results.table` when it is a list of flat records.
fn table(results: &Value) -> Option<(Vec<String>, Vec<Vec<String>>)> {
    let rows = results.get("table")?.as_array()?;
    let first = rows.first()?.as_object()?;
    let cols: Vec<String> = first.keys().cloned().collect();
    let mut out = Vec::with_capacity(rows.len());
    for r in rows {
        let r = r.as_object()?;
        out.push(cols.iter().map(|c| r.get(c).map(scalar).unwrap_or_default()).collect());
    }
    Some((cols, out))
}

fn csv_err(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

/// A single report as CSV: the `table` of its results when it has one,
/// `key,value` rows of every leaf otherwise.
pub fn write_csv_single<W: Write>(r: &Report, w: W) -> std::io::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    if let Some((cols, rows)) = table(&r.results) {
        wr.write_record(&cols).map_err(csv_err)?;
        for row in rows {
            wr.write_record(&row).map_err(csv_err)?;
        }
    } else {
        wr.write_record(["key", "value"]).map_err(csv_err)?;
        for (k, v) in report_leaves(r) {
            wr.write_record([k, v]).map_err(csv_err)?;
        }
    }
    wr.flush()
}

/// All reports in long form: `entry,command,key,value`.
pub fn write_csv_many<W: Write>(reports: &[Report], w: W) -> std::io::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["entry", "command", "key", "value"]).map_err(csv_err)?;
    for (i, r) in reports.iter().enumerate() {
        for (k, v) in report_leaves(r) {
            wr.write_record([i.to_string(), r.command.clone(), k, v]).map_err(csv_err)?;
        }
    }
    wr.flush()
}

fn report_leaves(r: &Report) -> Vec<(String, String)> {
    let mut out = vec![("passed".to_string(), r.passed.to_string())];
    flatten("params", &r.params, &mut out);
    flatten("results", &r.results, &mut out);
    for (i, w) in r.warnings.iter().enumerate() {
        out.push((format!("warnings.{i}"), w.clone()));
    }
    if let Some(e) = &r.error {
        out.push(("error.kind".into(), scalar(&serde_json::to_value(e.kind).unwrap_or(Value::Null))));
        out.push(("error.message".into(), e.message.clone()));
    }
    out
}
