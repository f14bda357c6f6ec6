use std::path::Path;

use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{Map, Value};

use crate::config::{Command, RunConfig};
use crate::report::{Report, ReportError};
use crate::run::dispatch;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TomlBatch {
    #[serde(default)]
    run: Vec<toml::Value>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum JsonBatch {
    List(Vec<Value>),
    Table(JsonTable),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonTable {
    #[serde(default)]
    run: Vec<Value>,
}

/// A batch file that failed to parse as a whole.
#[derive(Debug)]
pub struct ParseError(pub String);

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Entries of a batch file as raw tables; JSON when the extension is `.json`,
/// TOML otherwise.
pub fn parse_entries(path: &Path, text: &str) -> Result<Vec<Value>, ParseError> {
    let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if json {
        match serde_json::from_str::<JsonBatch>(text) {
            Ok(JsonBatch::List(v)) => Ok(v),
            Ok(JsonBatch::Table(t)) => Ok(t.run),
            Err(e) => Err(ParseError(format!("{}: line {}, column {}: {e}", path.display(), e.line(), e.column()))),
        }
    } else {
        let b: TomlBatch = toml::from_str(text).map_err(|e| {
            let at = e
                .span()
                .map(|s| {
                    let (line, col) = line_col(text, s.start);
                    format!("line {line}, column {col}: ")
                })
                .unwrap_or_default();
            ParseError(format!("{}: {at}{}", path.display(), e.message()))
        })?;
        b.run.into_iter().map(|v| serde_json::to_value(v).map_err(|e| ParseError(e.to_string()))).collect()
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let head = &text[..offset.min(text.len())];
    let line = head.matches('\n').count() + 1;
    let col = head.len() - head.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

/// Split the entry into its run configuration; `seed` and `tol` are shared
/// keys, the rest must match the command's schema exactly.
pub fn entry_config(entry: &Value, index: usize) -> Result<RunConfig, ReportError> {
    let mut m: Map<String, Value> = entry
        .as_object()
        .cloned()
        .ok_or_else(|| ReportError::validation(None, format!("entry {index}: expected a table")))?;
    let seed = match m.remove("seed") {
        None => None,
        Some(v) => Some(v.as_u64().ok_or_else(|| {
            ReportError::validation(Some("seed".into()), format!("entry {index}: seed must be a nonnegative integer"))
        })?),
    };
    let tol = match m.remove("tol") {
        None => None,
        Some(v) => Some(v.as_f64().ok_or_else(|| {
            ReportError::validation(Some("tol".into()), format!("entry {index}: tol must be a number"))
        })?),
    };
    let command: Command = serde_json::from_value(Value::Object(m))
        .map_err(|e| ReportError::validation(None, format!("entry {index}: {e}")))?;
    Ok(RunConfig { command, seed, tol })
}

/// Run every entry, in parallel up to the current pool size, keeping input
/// order. Invalid entries become failed reports; the rest still run.
pub fn run_entries(entries: &[Value], default_seed: Option<u64>, default_tol: Option<f64>) -> Vec<Report> {
    entries
        .par_iter()
        .enumerate()
        .map(|(i, e)| match entry_config(e, i) {
            Ok(mut cfg) => {
                cfg.seed = cfg.seed.or(default_seed);
                cfg.tol = cfg.tol.or(default_tol);
                dispatch(&cfg)
            }
            Err(err) => {
                let name = e.get("command").and_then(Value::as_str).unwrap_or("unknown").to_string();
                Report::failed(&name, e.clone(), None, err)
            }
        })
        .collect()
}
