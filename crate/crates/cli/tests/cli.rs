use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use stoplab::config::ExperimentConfig;
use stoplab::report;
use stoplab::run::{run_experiment, run_task, Status, MANIFEST_FILE};
use stoplab_core::vi::ValueField;

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn load(name: &str, out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::load(&config_path(name)).unwrap();
    cfg.output_dir = out.to_path_buf();
    cfg
}

/// The canonical problem on a coarse grid, with only the obstacle check on.
fn coarse_obstacle(out: &Path) -> ExperimentConfig {
    let mut cfg = load("canonical_put_1d.toml", out);
    let solve = cfg.solve.as_mut().unwrap();
    solve.spacing = vec![0.05];
    solve.time_steps = 100;
    let lattice = cfg.lattice.as_mut().unwrap();
    lattice.spacing = 0.01;
    lattice.steps = 200;
    cfg.checks = Default::default();
    cfg.checks.obstacle = true;
    cfg
}

#[test]
fn shipped_configs_validate() {
    let dir = config_path("");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = ExperimentConfig::load(&path).unwrap();
            cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            // the serialized form parses back to the same configuration
            assert_eq!(ExperimentConfig::parse(&cfg.to_toml()).unwrap(), cfg);
            seen += 1;
        }
    }
    assert!(seen >= 5);
}

#[test]
fn trivial_suite_passes_and_reruns_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = load("trivial.toml", tmp.path());
    let first = run_experiment(&cfg, &[]).unwrap();
    assert!(first.manifest.passed());
    assert!(!first.outcomes.is_empty());
    assert!(first.outcomes.iter().all(|o| o.status == Status::Pass), "{:?}", first.outcomes);
    let second = run_experiment(&cfg, &[]).unwrap();
    let digests = |m: &stoplab::RunManifest| -> Vec<(String, String)> {
        m.tasks
            .iter()
            .flat_map(|t| t.artifacts.iter().map(|x| (x.path.clone(), x.sha256.clone())))
            .collect()
    };
    assert_eq!(digests(&first.manifest), digests(&second.manifest));
}

#[test]
fn corrupted_field_fails_complementarity() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = coarse_obstacle(tmp.path());
    let clean = run_experiment(&cfg, &[]).unwrap();
    let complementarity = |outcomes: &[stoplab::CheckOutcome]| {
        outcomes
            .iter()
            .find(|o| o.check == "obstacle.complementarity")
            .expect("complementarity outcome")
            .status
    };
    assert_eq!(complementarity(&clean.outcomes), Status::Pass);

    let path = tmp.path().join("field_psor.bin");
    let mut field = ValueField::read_binary(fs::File::open(&path).unwrap()).unwrap();
    let k = field.steps() / 2;
    let mid = field.domain().len() / 2;
    field.u_level_mut(k)[mid] -= 0.01;
    field.write_binary(fs::File::create(&path).unwrap()).unwrap();

    let run = run_task(&cfg, tmp.path(), "obstacle");
    assert_eq!(run.record.status, Status::Fail);
    assert_eq!(complementarity(&run.outcomes), Status::Fail);
}

#[test]
fn report_rejects_tampered_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_experiment(&load("trivial.toml", tmp.path()), &[]).unwrap();
    let manifest = report::load_manifest(tmp.path()).unwrap();
    assert_eq!(manifest, out.manifest);
    assert_eq!(report::collect(tmp.path(), &manifest).unwrap(), out.outcomes);
    let csv = tmp.path().join("trivial.csv");
    let mut bytes = fs::read(&csv).unwrap();
    bytes.push(b'\n');
    fs::write(&csv, bytes).unwrap();
    assert!(matches!(
        report::collect(tmp.path(), &manifest),
        Err(report::ReportError::Digest { .. })
    ));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_stoplab");
    let tmp = tempfile::tempdir().unwrap();
    let ok = Command::new(bin)
        .args(["validate", "--config"])
        .arg(config_path("trivial.toml"))
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));

    let run = Command::new(bin)
        .args(["run", "--jobs", "1", "--config"])
        .arg(config_path("trivial.toml"))
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("check,anchor,status"));
    assert!(tmp.path().join(MANIFEST_FILE).exists());

    let report = Command::new(bin).args(["report", "--out"]).arg(tmp.path()).output().unwrap();
    assert_eq!(report.status.code(), Some(0));

    let missing = Command::new(bin)
        .args(["validate", "--config", "/nonexistent/config.toml"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));

    let bad_sweep = Command::new(bin)
        .args(["sweep", "--check", "trivial", "--config"])
        .arg(config_path("trivial.toml"))
        .output()
        .unwrap();
    assert_eq!(bad_sweep.status.code(), Some(2));
}
