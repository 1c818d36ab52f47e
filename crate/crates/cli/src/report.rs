//! Summaries of a finished run: one row per check outcome, after verifying
//! that every artifact listed in the manifest is intact.

use std::fs;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::run::{sha256_hex, CheckOutcome, RunManifest, CHECKS_FILE, MANIFEST_FILE};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot read {path}: {detail}")]
    Missing { path: String, detail: String },
    #[error("artifact {path} does not match its manifest digest")]
    Digest { path: String },
    #[error("malformed {what}: {detail}")]
    Malformed { what: String, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    JsonLines,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json-lines" | "jsonl" => Ok(Format::JsonLines),
            other => Err(format!("unknown format '{other}' (csv | json-lines)")),
        }
    }
}

const HEADER: [&str; 7] = ["check", "anchor", "status", "measured", "bound", "tolerance", "detail"];

#[derive(Serialize)]
struct Row<'a> {
    check: &'a str,
    anchor: &'a str,
    status: &'a str,
    measured: f64,
    bound: f64,
    tolerance: f64,
    detail: &'a str,
}

fn row(o: &CheckOutcome) -> Row<'_> {
    Row {
        check: &o.check,
        anchor: &o.anchor,
        status: o.status.as_str(),
        measured: o.measured,
        bound: o.bound,
        tolerance: o.tolerance,
        detail: &o.detail,
    }
}

pub fn summary_csv(outcomes: &[CheckOutcome]) -> csv::Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(HEADER)?;
    for o in outcomes {
        w.serialize(row(o))?;
    }
    w.flush()?;
    Ok(w.into_inner().expect("in-memory writer"))
}

pub fn summary_json_lines(outcomes: &[CheckOutcome]) -> Vec<u8> {
    let mut out = Vec::new();
    for o in outcomes {
        out.extend(serde_json::to_vec(&row(o)).expect("plain row serializes"));
        out.push(b'\n');
    }
    out
}

pub fn load_manifest(dir: &Path) -> Result<RunManifest, ReportError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| ReportError::Missing {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| ReportError::Malformed {
        what: MANIFEST_FILE.into(),
        detail: e.to_string(),
    })
}

/// Checks every artifact against the manifest and returns the recorded
/// outcomes. A manifest without tasks yields no outcomes.
pub fn collect(dir: &Path, manifest: &RunManifest) -> Result<Vec<CheckOutcome>, ReportError> {
    let mut checks_bytes = None;
    for task in &manifest.tasks {
        for a in &task.artifacts {
            let path = dir.join(&a.path);
            let bytes = fs::read(&path).map_err(|e| ReportError::Missing {
                path: a.path.clone(),
                detail: e.to_string(),
            })?;
            if sha256_hex(&bytes) != a.sha256 {
                return Err(ReportError::Digest { path: a.path.clone() });
            }
            if a.path == CHECKS_FILE {
                checks_bytes = Some(bytes);
            }
        }
    }
    let Some(bytes) = checks_bytes else {
        return Ok(Vec::new());
    };
    let text = String::from_utf8(bytes).map_err(|e| ReportError::Malformed {
        what: CHECKS_FILE.into(),
        detail: e.to_string(),
    })?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l).map_err(|e| ReportError::Malformed {
                what: CHECKS_FILE.into(),
                detail: e.to_string(),
            })
        })
        .collect()
}

pub fn render(outcomes: &[CheckOutcome], format: Format) -> Vec<u8> {
    match format {
        Format::Csv => summary_csv(outcomes).expect("in-memory CSV"),
        Format::JsonLines => summary_json_lines(outcomes),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::run::Status;

    #[test]
    fn empty_summary_has_only_the_header() {
        let bytes = summary_csv(&[]).unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap(), "check,anchor,status,measured,bound,tolerance,detail\n");
        assert!(summary_json_lines(&[]).is_empty());
    }

    #[test]
    fn empty_manifest_collects_nothing() {
        let m = RunManifest {
            name: "x".into(),
            config_sha256: String::new(),
            tool_version: "0".into(),
            seed: 0,
            tasks: vec![],
        };
        let dir = tempfile::tempdir().unwrap();
        assert!(collect(dir.path(), &m).unwrap().is_empty());
    }

    #[test]
    fn rows_carry_status() {
        let o = CheckOutcome::at_most("a.b", "anchor", 2.0, 1.0, 0.0);
        let text = String::from_utf8(summary_csv(std::slice::from_ref(&o)).unwrap()).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("a.b,anchor,fail,2.0,1.0,0.0,"));
        assert_eq!(o.status, Status::Fail);
    }
}
