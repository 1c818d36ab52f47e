//! Task execution, artifact bookkeeping and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stoplab_core::vi::ValueField;

use crate::checks;
use crate::config::ExperimentConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Error,
    Skipped,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Error => "error",
            Status::Skipped => "skipped",
        }
    }
}

/// One verified statement: `measured` compared with `bound` up to
/// `tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub check: String,
    pub anchor: String,
    pub status: Status,
    pub measured: f64,
    pub bound: f64,
    pub tolerance: f64,
    #[serde(default)]
    pub detail: String,
}

impl CheckOutcome {
    pub fn new(check: &str, anchor: &str, pass: bool, measured: f64, bound: f64, tolerance: f64) -> Self {
        Self {
            check: check.to_string(),
            anchor: anchor.to_string(),
            status: if pass { Status::Pass } else { Status::Fail },
            measured,
            bound,
            tolerance,
            detail: String::new(),
        }
    }

    /// Passes when `measured ≤ bound + tolerance`.
    pub fn at_most(check: &str, anchor: &str, measured: f64, bound: f64, tolerance: f64) -> Self {
        Self::new(check, anchor, measured <= bound + tolerance, measured, bound, tolerance)
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub id: String,
    pub status: Status,
    pub artifacts: Vec<Artifact>,
    pub wall_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub name: String,
    pub config_sha256: String,
    pub tool_version: String,
    pub seed: u64,
    pub tasks: Vec<TaskRecord>,
}

impl RunManifest {
    pub fn passed(&self) -> bool {
        self.tasks.iter().all(|t| t.status == Status::Pass)
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHECKS_FILE: &str = "checks.jsonl";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Seed of a task, derived from the master seed and the task id only.
pub fn task_seed(master: u64, id: &str) -> u64 {
    let digest = Sha256::digest(format!("{master}/{id}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("32-byte digest"))
}

/// What a running task sees: the configuration, its output directory and
/// seed, and sinks for artifacts and outcomes.
pub struct TaskCtx<'a> {
    pub cfg: &'a ExperimentConfig,
    pub dir: &'a Path,
    pub seed: u64,
    artifacts: Vec<Artifact>,
    outcomes: Vec<CheckOutcome>,
}

impl<'a> TaskCtx<'a> {
    pub fn new(cfg: &'a ExperimentConfig, dir: &'a Path, id: &str) -> Self {
        Self {
            cfg,
            dir,
            seed: task_seed(cfg.seed, id),
            artifacts: Vec::new(),
            outcomes: Vec::new(),
        }
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.artifacts.push(Artifact {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    /// Writes a CSV artifact from `rows` of already formatted cells.
    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("csv buffer: {e}"))?;
        self.write(name, &bytes)
    }

    pub fn read_field(&self, name: &str) -> anyhow::Result<ValueField> {
        let file = fs::File::open(self.dir.join(name))
            .map_err(|e| anyhow::anyhow!("missing field artifact {name}: {e}"))?;
        Ok(ValueField::read_binary(std::io::BufReader::new(file))?)
    }

    pub fn push(&mut self, outcome: CheckOutcome) {
        self.outcomes.push(outcome);
    }

    pub fn outcomes(&self) -> &[CheckOutcome] {
        &self.outcomes
    }

    pub fn into_parts(self) -> (Vec<Artifact>, Vec<CheckOutcome>) {
        (self.artifacts, self.outcomes)
    }
}

/// Result of one task, as returned by [`run_task`].
pub struct TaskRun {
    pub record: TaskRecord,
    pub outcomes: Vec<CheckOutcome>,
}

/// Runs one task into `dir`. Errors are captured in the record.
pub fn run_task(cfg: &ExperimentConfig, dir: &Path, id: &str) -> TaskRun {
    let start = Instant::now();
    let mut ctx = TaskCtx::new(cfg, dir, id);
    let result = checks::dispatch(id, &mut ctx);
    let wall_seconds = start.elapsed().as_secs_f64();
    let (artifacts, outcomes) = ctx.into_parts();
    let (status, error) = match result {
        Err(e) => (Status::Error, Some(format!("{e:#}"))),
        Ok(()) if outcomes.iter().all(|o| o.status == Status::Pass) => (Status::Pass, None),
        Ok(()) => (Status::Fail, None),
    };
    TaskRun {
        record: TaskRecord {
            id: id.to_string(),
            status,
            artifacts,
            wall_seconds,
            error,
        },
        outcomes,
    }
}

/// Tasks needed for the enabled checks, in dependency order: the field
/// solve first, then everything that reads it.
pub fn plan(cfg: &ExperimentConfig, only: &[String]) -> Vec<String> {
    let enabled: Vec<&str> = cfg
        .checks
        .enabled()
        .into_iter()
        .filter(|id| only.is_empty() || only.iter().any(|o| o == id))
        .collect();
    let mut tasks = Vec::new();
    if enabled.iter().any(|id| checks::needs_field(id)) {
        tasks.push("field".to_string());
    }
    tasks.extend(enabled.iter().map(|s| s.to_string()));
    tasks
}

pub struct RunOutput {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub outcomes: Vec<CheckOutcome>,
}

/// Runs every planned task, then writes the resolved configuration, the
/// outcome list and the manifest. A failed dependency marks its dependents
/// as skipped; independent tasks still run.
pub fn run_experiment(cfg: &ExperimentConfig, only: &[String]) -> anyhow::Result<RunOutput> {
    cfg.validate()?;
    for id in only {
        if cfg.checks.get(id).is_none() {
            anyhow::bail!("unknown check id '{id}'");
        }
    }
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir)?;
    let mut records = Vec::new();
    let mut outcomes = Vec::new();
    let mut field_ok = true;
    for id in plan(cfg, only) {
        if id != "field" && checks::needs_field(&id) && !field_ok {
            records.push(TaskRecord {
                id: id.clone(),
                status: Status::Skipped,
                artifacts: Vec::new(),
                wall_seconds: 0.0,
                error: Some("field task did not complete".into()),
            });
            outcomes.push(
                CheckOutcome::new(&id, checks::anchor(&id), false, f64::NAN, f64::NAN, 0.0)
                    .with_detail("skipped: field task did not complete"),
            );
            if let Some(o) = outcomes.last_mut() {
                o.status = Status::Skipped;
            }
            continue;
        }
        let run = run_task(cfg, &dir, &id);
        if id == "field" {
            field_ok = run.record.status != Status::Error;
        }
        if run.record.status == Status::Error {
            outcomes.push(
                CheckOutcome::new(&id, checks::anchor(&id), false, f64::NAN, f64::NAN, 0.0)
                    .with_detail(run.record.error.clone().unwrap_or_default()),
            );
            if let Some(o) = outcomes.last_mut() {
                o.status = Status::Error;
            }
        }
        outcomes.extend(run.outcomes);
        records.push(run.record);
    }
    // bookkeeping artifacts, listed under their own task entry
    let config_text = cfg.to_toml();
    let mut ctx = TaskCtx::new(cfg, &dir, "summary");
    ctx.write("config.toml", config_text.as_bytes())?;
    let mut lines = Vec::new();
    for o in &outcomes {
        lines.extend_from_slice(serde_json::to_string(o)?.as_bytes());
        lines.push(b'\n');
    }
    ctx.write(CHECKS_FILE, &lines)?;
    let summary = crate::report::summary_csv(&outcomes)?;
    ctx.write("summary.csv", &summary)?;
    let (artifacts, _) = ctx.into_parts();
    records.push(TaskRecord {
        id: "summary".into(),
        status: Status::Pass,
        artifacts,
        wall_seconds: 0.0,
        error: None,
    });
    let manifest = RunManifest {
        name: cfg.name.clone(),
        config_sha256: sha256_hex(config_text.as_bytes()),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        tasks: records,
    };
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    fs::write(dir.join(MANIFEST_FILE), json)?;
    Ok(RunOutput {
        dir,
        manifest,
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_seeds_depend_only_on_id() {
        assert_eq!(task_seed(7, "lsmc"), task_seed(7, "lsmc"));
        assert_ne!(task_seed(7, "lsmc"), task_seed(7, "optimal_rule"));
        assert_ne!(task_seed(7, "lsmc"), task_seed(8, "lsmc"));
    }

    #[test]
    fn outcome_bounds() {
        assert_eq!(CheckOutcome::at_most("x", "a", 1.0, 1.0, 0.0).status, Status::Pass);
        assert_eq!(CheckOutcome::at_most("x", "a", 1.1, 1.0, 0.05).status, Status::Fail);
        assert_eq!(CheckOutcome::at_most("x", "a", f64::NAN, 1.0, 0.0).status, Status::Fail);
    }
}
