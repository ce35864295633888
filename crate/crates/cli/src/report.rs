//! Report assembly and comparison. A report is one JSON document whose
//! `body` is the deterministic region (the only timestamp lives outside
//! it), mirrored by a flat CSV with the same columns and rows. Writes go
//! through a temp file and rename so interrupted runs never leave a
//! partial file at the final path.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;

/// One named pass/fail check with the measured quantity behind it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured: Option<f64>,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: &str, pass: bool, measured: impl Into<Option<f64>>, detail: String) -> Self {
        Verdict { name: name.to_string(), pass, measured: measured.into(), detail }
    }
}

/// What an experiment produces: a rectangular table plus free-form
/// nested extras and the verdict list.
#[derive(Debug, Default)]
pub struct Outcome {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
    pub extra: Map<String, Value>,
    pub verdicts: Vec<Verdict>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Header {
    pub experiment: String,
    pub toolkit_version: String,
    pub config_hash: String,
    /// The fully resolved configuration this run used.
    pub config: ExperimentConfig,
    pub budget: u64,
    pub seed: u64,
    pub cache_dir: String,
}

/// The deterministic region: everything except the timestamp.
#[derive(Debug, Serialize, Deserialize)]
pub struct Body {
    pub header: Header,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub extra: Map<String, Value>,
    pub verdicts: Vec<Verdict>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Report {
    pub timestamp_unix: u64,
    pub body: Body,
}

impl Report {
    pub fn assemble(header: Header, outcome: Outcome) -> Self {
        let timestamp_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Report {
            timestamp_unix,
            body: Body {
                header,
                columns: outcome.columns.iter().map(|c| c.to_string()).collect(),
                rows: outcome.rows,
                extra: outcome.extra,
                verdicts: outcome.verdicts,
            },
        }
    }
}

/// Write via a sibling temp file and an atomic rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create report directory {}", dir.display()))?;
    let nanos = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.subsec_nanos())
        .unwrap_or(0);
    let tmp = dir.join(format!(".tmp-{}-{}", std::process::id(), nanos));
    std::fs::write(&tmp, bytes).with_context(|| format!("cannot write {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| {
        let _ = std::fs::remove_file(&tmp);
        format!("cannot move report into place at {}", path.display())
    })?;
    Ok(())
}

/// Write `<experiment>-<hash>.json` and the matching CSV; returns both paths.
pub fn write_report(report: &Report, out_dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let stem = format!("{}-{}", report.body.header.experiment, report.body.header.config_hash);
    let json_path = out_dir.join(format!("{stem}.json"));
    let csv_path = out_dir.join(format!("{stem}.csv"));
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    write_atomic(&json_path, json.as_bytes())?;
    write_atomic(&csv_path, render_csv(&report.body).as_bytes())?;
    Ok((json_path, csv_path))
}

fn csv_cell(v: &Value) -> String {
    let plain = match v {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    };
    if plain.contains([',', '"', '\n']) {
        format!("\"{}\"", plain.replace('"', "\"\""))
    } else {
        plain
    }
}

pub fn render_csv(body: &Body) -> String {
    let mut out = body.columns.join(",");
    out.push('\n');
    for row in &body.rows {
        let cells: Vec<String> = row.iter().map(csv_cell).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

const DIFF_REL_TOL: f64 = 1e-9;

fn numbers_match(a: f64, b: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= DIFF_REL_TOL * a.abs().max(b.abs()).max(1.0)
}

fn diff_value(path: &str, a: &Value, b: &Value, out: &mut Vec<String>) {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap_or(f64::NAN), y.as_f64().unwrap_or(f64::NAN));
            if !numbers_match(x, y) {
                out.push(format!("{path}: {x} vs {y}"));
            }
        }
        (Value::Array(xs), Value::Array(ys)) => {
            if xs.len() != ys.len() {
                out.push(format!("{path}: length {} vs {}", xs.len(), ys.len()));
                return;
            }
            for (i, (x, y)) in xs.iter().zip(ys).enumerate() {
                diff_value(&format!("{path}[{i}]"), x, y, out);
            }
        }
        (Value::Object(xs), Value::Object(ys)) => {
            let keys: std::collections::BTreeSet<&String> =
                xs.keys().chain(ys.keys()).collect();
            for k in keys {
                match (xs.get(k), ys.get(k)) {
                    (Some(x), Some(y)) => diff_value(&format!("{path}.{k}"), x, y, out),
                    (Some(_), None) => out.push(format!("{path}.{k}: present vs absent")),
                    (None, Some(_)) => out.push(format!("{path}.{k}: absent vs present")),
                    (None, None) => unreachable!(),
                }
            }
        }
        _ => {
            if a != b {
                out.push(format!("{path}: {a} vs {b}"));
            }
        }
    }
}

/// Row-level comparison of two reports of the same experiment type.
/// Numeric cells compare with a small relative tolerance; verdicts are
/// matched by name. Returns the list of differences, empty if none.
pub fn diff_reports(a: &Report, b: &Report) -> Result<Vec<String>> {
    if a.body.header.experiment != b.body.header.experiment {
        bail!(
            "cannot diff a {} report against a {} report",
            a.body.header.experiment,
            b.body.header.experiment
        );
    }
    let mut out = Vec::new();
    if a.body.header.config_hash != b.body.header.config_hash {
        out.push(format!(
            "header.config_hash: {} vs {}",
            a.body.header.config_hash, b.body.header.config_hash
        ));
    }
    if a.body.columns != b.body.columns {
        out.push(format!("columns: {:?} vs {:?}", a.body.columns, b.body.columns));
        return Ok(out);
    }
    if a.body.rows.len() != b.body.rows.len() {
        out.push(format!("rows: {} vs {}", a.body.rows.len(), b.body.rows.len()));
    } else {
        for (i, (ra, rb)) in a.body.rows.iter().zip(&b.body.rows).enumerate() {
            diff_value(&format!("rows[{i}]"), &Value::Array(ra.clone()), &Value::Array(rb.clone()), &mut out);
        }
    }
    diff_value("extra", &Value::Object(a.body.extra.clone()), &Value::Object(b.body.extra.clone()), &mut out);

    let names: std::collections::BTreeSet<&String> = a
        .body
        .verdicts
        .iter()
        .map(|v| &v.name)
        .chain(b.body.verdicts.iter().map(|v| &v.name))
        .collect();
    for name in names {
        let va = a.body.verdicts.iter().find(|v| &v.name == name);
        let vb = b.body.verdicts.iter().find(|v| &v.name == name);
        match (va, vb) {
            (Some(x), Some(y)) => {
                if x.pass != y.pass {
                    out.push(format!("verdicts.{name}.pass: {} vs {}", x.pass, y.pass));
                }
                match (x.measured, y.measured) {
                    (Some(mx), Some(my)) if !numbers_match(mx, my) => {
                        out.push(format!("verdicts.{name}.measured: {mx} vs {my}"));
                    }
                    (Some(mx), None) => {
                        out.push(format!("verdicts.{name}.measured: {mx} vs absent"))
                    }
                    (None, Some(my)) => {
                        out.push(format!("verdicts.{name}.measured: absent vs {my}"))
                    }
                    _ => {}
                }
            }
            (Some(_), None) => out.push(format!("verdicts.{name}: present vs absent")),
            (None, Some(_)) => out.push(format!("verdicts.{name}: absent vs present")),
            (None, None) => unreachable!(),
        }
    }
    Ok(out)
}

pub fn load_report(path: &Path) -> Result<Report> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read report {}", path.display()))?;
    serde_json::from_str(&text)
        .with_context(|| format!("{} is not a report produced by this tool", path.display()))
}
