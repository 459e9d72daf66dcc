use std::path::Path;

use serde_json::Value;

use crate::analysis::{finish_csv, format_sig, round_sig};
use crate::error::Error;

use super::execute::{RunError, RunResult};

fn io_err(path: &Path, e: impl std::fmt::Display) -> RunError {
    RunError::Io { path: path.display().to_string(), message: e.to_string() }
}

fn csv_err(e: csv::Error) -> RunError {
    RunError::Runtime { context: "csv".into(), source: Error::Io { path: "<csv>".into(), message: e.to_string() } }
}

fn runtime(context: &str) -> impl FnOnce(Error) -> RunError + '_ {
    move |source| RunError::Runtime { context: context.into(), source }
}

/// Rounds every float to 12 significant digits. Object keys come out sorted
/// because `serde_json::Map` is a `BTreeMap` here.
fn round_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().unwrap_or(0.0), 12);
            serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_floats).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, round_floats(v))).collect()),
        other => other,
    }
}

/// Pretty JSON with sorted keys and 12-significant-digit floats.
pub fn to_json(r: &RunResult) -> Result<String, RunError> {
    let v = serde_json::to_value(r).map_err(|e| RunError::Runtime {
        context: "json".into(),
        source: Error::InvalidParameter(e.to_string()),
    })?;
    let mut s = serde_json::to_string_pretty(&round_floats(v)).map_err(|e| RunError::Runtime {
        context: "json".into(),
        source: Error::InvalidParameter(e.to_string()),
    })?;
    s.push('\n');
    Ok(s)
}

/// `outcome,probability,count`; header only when there is nothing to report.
pub fn tallies_csv(r: &RunResult) -> Result<String, RunError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["outcome", "probability", "count"]).map_err(csv_err)?;
    for (k, p) in &r.probabilities {
        let count = r.tallies.get(k).map(|c| c.to_string()).unwrap_or_default();
        w.write_record([k.as_str(), &format_sig(*p), &count]).map_err(csv_err)?;
    }
    finish_csv(w).map_err(runtime("csv"))
}

fn superpositions_csv(r: &RunResult) -> Result<Option<String>, RunError> {
    let Some(sup) = &r.superpositions else { return Ok(None) };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "label", "fidelity", "s1", "s2", "s3"]).map_err(csv_err)?;
    for s in sup {
        let st = |i: usize| s.stabilizers.map(|v| format_sig(v[i])).unwrap_or_default();
        w.write_record([s.index.to_string(), s.label.clone(), format_sig(s.fidelity), st(0), st(1), st(2)])
            .map_err(csv_err)?;
    }
    finish_csv(w).map(Some).map_err(runtime("csv"))
}

/// Every CSV artefact of a run as `(file name, contents)`.
pub fn csv_files(r: &RunResult) -> Result<Vec<(String, String)>, RunError> {
    let mut out = vec![("tallies.csv".to_string(), tallies_csv(r)?)];
    if let Some(f) = &r.fidelity {
        out.push(("zx.csv".into(), f.zx.to_csv().map_err(runtime("zx table"))?));
        out.push(("zx_matrix.csv".into(), f.zx.matrix_csv().map_err(runtime("zx table"))?));
        out.push(("xz.csv".into(), f.xz.to_csv().map_err(runtime("xz table"))?));
        out.push(("xz_matrix.csv".into(), f.xz.matrix_csv().map_err(runtime("xz table"))?));
    }
    if let Some(s) = superpositions_csv(r)? {
        out.push(("superpositions.csv".into(), s));
    }
    if let Some((tr, stride)) = &r.lock_trace {
        out.push(("lock_trace.csv".into(), tr.to_csv(*stride, format_sig).map_err(runtime("lock trace"))?));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Writes `result.json` or the CSV files into `dir` (created if missing).
/// Returns the paths written.
pub fn emit(r: &RunResult, dir: &Path, format: OutputFormat) -> Result<Vec<std::path::PathBuf>, RunError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let files = match format {
        OutputFormat::Json => vec![("result.json".to_string(), to_json(r)?)],
        OutputFormat::Csv => csv_files(r)?,
    };
    let mut written = Vec::new();
    for (name, text) in files {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
