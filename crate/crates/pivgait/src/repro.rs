//! Reproduction table: runs the scenarios listed in a corpus manifest and
//! checks each outcome against the row's expectation.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use pivgait_core::gait::GaitMode;
use pivgait_core::sim::{run, DisturbanceEvent, Scenario, SimLog};
use serde::Deserialize;

use crate::config::{load_scenario, ConfigError, Override};

pub const MANIFEST_FILE: &str = "repro.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expect {
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Row {
    pub label: String,
    /// Relative to the manifest.
    pub scenario: PathBuf,
    pub expect: Expect,
    /// Whether a DS to QS switch must happen; unchecked when unset.
    pub switch: Option<bool>,
    /// Simulated time to finish (s), checked to two control periods.
    pub duration: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    row: Vec<Row>,
}

/// Reads the manifest in `dir` and every scenario it lists. Nothing runs
/// unless all of them parse and validate.
pub fn load_corpus(dir: &Path, overrides: &[Override]) -> Result<Vec<(Row, Scenario)>, ConfigError> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let manifest: Manifest = toml::from_str(&text).map_err(|e| ConfigError::Parse {
        origin: path.display().to_string(),
        message: e.to_string(),
    })?;
    manifest
        .row
        .into_iter()
        .map(|row| {
            let s = load_scenario(&dir.join(&row.scenario), overrides)?;
            Ok((row, s))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowReport {
    pub label: String,
    pub scenario: String,
    pub pass: bool,
    /// What was observed, in a few words.
    pub observed: String,
    /// Reasons for a failed check; empty on pass.
    pub mismatches: Vec<String>,
}

/// Latest time after the first disturbance event at which the switch still
/// counts as a reaction to it: one edge of the DS cycle, the interval after
/// which the graph would reselect at the next node anyway.
pub fn switch_deadline(scenario: &Scenario) -> Option<f64> {
    scenario.events.first().map(|e| e.time() + scenario.gait.edge_time_ds)
}

pub fn check(row: &Row, scenario: &Scenario, log: &SimLog) -> RowReport {
    let s = &log.summary;
    let period = scenario.mpc.period;
    let mut mismatches = Vec::new();
    let completed = s.outcome.is_completed();
    match (row.expect, completed) {
        (Expect::Completed, false) => mismatches.push(format!("expected completion, got {}", s.outcome.reason())),
        (Expect::Failed, true) => mismatches.push("expected a failure, run completed".to_owned()),
        _ => {}
    }
    if row.expect == Expect::Completed && completed && s.steps_completed != scenario.steps {
        mismatches.push(format!("{} of {} steps", s.steps_completed, scenario.steps));
    }
    let ds_to_qs = s.switches.iter().find(|w| w.from == GaitMode::Ds && w.to == GaitMode::Qs);
    match (row.switch, ds_to_qs) {
        (Some(true), None) => mismatches.push("no DS to QS switch".to_owned()),
        (Some(true), Some(w)) => {
            if !s.detections.contains(&w.time) {
                mismatches.push(format!("switch at {:.3} s without a detection", w.time));
            }
            if let Some(deadline) = switch_deadline(scenario) {
                if w.time > deadline + 1e-9 {
                    mismatches.push(format!("switch at {:.3} s, after {deadline:.3} s", w.time));
                }
            }
        }
        (Some(false), _) if !s.switches.is_empty() => mismatches.push(format!("{} unexpected switches", s.switches.len())),
        _ => {}
    }
    if let Some(d) = row.duration {
        if (s.end_time - d).abs() > 2.0 * period + 1e-9 {
            mismatches.push(format!("took {:.3} s, expected {d} ± {:.3} s", s.end_time, 2.0 * period));
        }
    }
    let mut observed = format!("{} after {} steps at {:.2} s", s.outcome.reason(), s.steps_completed, s.end_time);
    for w in &s.switches {
        let _ = write!(observed, ", {}→{} at {:.2} s", w.from.name(), w.to.name(), w.time);
    }
    RowReport {
        label: row.label.clone(),
        scenario: scenario.name.clone(),
        pass: mismatches.is_empty(),
        observed,
        mismatches,
    }
}

/// Runs every scenario, one thread each; results keep the input order.
pub fn run_all(corpus: &[(Row, Scenario)]) -> Vec<Result<SimLog, pivgait_core::Error>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = corpus.iter().map(|(_, s)| scope.spawn(move || run(s))).collect();
        handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
    })
}

pub fn format_table(reports: &[RowReport]) -> String {
    let w = reports.iter().map(|r| r.label.len()).max().unwrap_or(0);
    let mut out = String::new();
    for r in reports {
        let _ = writeln!(out, "{:<w$}  {}  {}", r.label, if r.pass { "PASS" } else { "FAIL" }, r.observed);
        for m in &r.mismatches {
            let _ = writeln!(out, "{:<w$}        {m}", "");
        }
    }
    let passed = reports.iter().filter(|r| r.pass).count();
    let _ = writeln!(out, "{passed}/{} rows pass", reports.len());
    out
}

/// First payload event, for reporting.
pub fn payload_mass(scenario: &Scenario) -> Option<f64> {
    scenario.events.iter().find_map(|e| match e {
        DisturbanceEvent::Payload { mass, .. } => Some(*mass),
        _ => None,
    })
}
