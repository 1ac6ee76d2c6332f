use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pivgait::output::{FOOTPRINT_COLUMNS, LOG_COLUMNS};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_pivgait"));
    c.env_remove("PIVGAIT_OUT").env_remove("PIVGAIT_CORPUS");
    c
}

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn scenario(name: &str) -> PathBuf {
    corpus().join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn nominal_run_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ds");
    let o = bin().args(["run"]).arg(scenario("timing_ds.toml")).arg("--out").arg(&out).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("completed after 2 steps"));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["reason"], "completed");
    assert_eq!(summary["steps_completed"], 2);
    let log = fs::read_to_string(out.join("log.csv")).unwrap();
    assert_eq!(log.lines().next().unwrap(), LOG_COLUMNS.join(","));
    let feet = fs::read_to_string(out.join("footprints.csv")).unwrap();
    assert_eq!(feet.lines().next().unwrap(), FOOTPRINT_COLUMNS.join(","));
    assert!(out.join("config.toml").is_file() && out.join("selections.csv").is_file());
}

#[test]
fn failed_run_exits_nonzero_with_reason() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["run"])
        .arg(scenario("payload_1kg.toml"))
        .arg("--out")
        .arg(tmp.path())
        .args(["--override", "mpc.f_n_max=12"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stderr(&o).contains("run failed"));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["completed"], false);
    assert_ne!(summary["reason"], "completed");
}

#[test]
fn bad_input_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "steps = 2\n[object]\nmass = -1.0\n").unwrap();
    let broken = tmp.path().join("broken.toml");
    fs::write(&broken, "steps = [\n").unwrap();
    for (file, needle) in [(&bad, "object.mass"), (&broken, "line")] {
        let out = tmp.path().join("out");
        let o = bin().arg("run").arg(file).arg("--out").arg(&out).output().unwrap();
        assert_eq!(o.status.code(), Some(2));
        assert!(stderr(&o).contains(needle), "{}", stderr(&o));
        assert!(!out.exists());
    }
    let out = tmp.path().join("out");
    let o = bin()
        .arg("run")
        .arg(scenario("timing_ds.toml"))
        .arg("--out")
        .arg(&out)
        .args(["--override", "mpc.horizn=3"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn echoed_config_reproduces_the_log() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let o = bin()
        .arg("run")
        .arg(scenario("payload_500g.toml"))
        .arg("--out")
        .arg(&a)
        .args(["--seed", "9", "--override", "noise.force=0.4"])
        .output()
        .unwrap();
    assert!(o.status.success());
    let o = bin().arg("run").arg(a.join("config.toml")).arg("--out").arg(&b).output().unwrap();
    assert!(o.status.success());
    for f in ["config.toml", "log.csv", "footprints.csv", "selections.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let cfg = fs::read_to_string(a.join("config.toml")).unwrap();
    assert!(cfg.contains("seed = 9"));
}

#[test]
fn override_touches_only_its_field() {
    let plain = bin().arg("validate").arg(scenario("timing_ds.toml")).output().unwrap();
    let over = bin().arg("validate").arg(scenario("timing_ds.toml")).args(["--override", "mpc.n_p=5"]).output().unwrap();
    assert!(plain.status.success() && over.status.success());
    let (p, q) = (stdout(&plain), stdout(&over));
    let diff: Vec<(&str, &str)> = p.lines().zip(q.lines()).filter(|(x, y)| x != y).collect();
    assert_eq!(diff, vec![("horizon = 10", "horizon = 5")]);
}

#[test]
fn env_var_sets_the_output_base() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin()
        .env("PIVGAIT_OUT", tmp.path())
        .arg("run")
        .arg(scenario("timing_ds.toml"))
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(tmp.path().join("timing_ds").join("log.csv").is_file());
}

#[test]
fn repro_rejects_an_invalid_corpus_before_running() {
    let tmp = tempfile::tempdir().unwrap();
    for entry in fs::read_dir(corpus()).unwrap() {
        let p = entry.unwrap().path();
        fs::copy(&p, tmp.path().join(p.file_name().unwrap())).unwrap();
    }
    let qs = tmp.path().join("timing_qs.toml");
    let text = fs::read_to_string(&qs).unwrap() + "\n[weights]\ndelta_ds = 2.0\ndelta_qs = 2.0\n";
    fs::write(&qs, text).unwrap();
    let out = tmp.path().join("runs");
    let o = bin().arg("repro").arg("--corpus").arg(tmp.path()).arg("--out").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("delta_ds"), "{}", stderr(&o));
    assert!(stdout(&o).is_empty() && !out.exists());
}
