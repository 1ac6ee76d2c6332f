//! Run artifacts: per-period log, footprints, mode selections, summary and
//! the effective configuration.
//!
//! Numbers are written in Rust's shortest round-trip form, so equal logs
//! give equal bytes. Column orders are fixed by the `*_COLUMNS` constants.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use pivgait_core::qp::QpStatus;
use pivgait_core::sim::{Outcome, Scenario, SimLog};
use serde::Serialize;

use crate::config::effective_config;

pub const CONFIG_FILE: &str = "config.toml";
pub const LOG_FILE: &str = "log.csv";
pub const FOOTPRINT_FILE: &str = "footprints.csv";
pub const SELECTION_FILE: &str = "selections.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// One row per control period.
pub const LOG_COLUMNS: [&str; 48] = [
    "k", "time", "step", "from_node", "to_node", "phase", "mode",
    "roll", "pitch", "yaw", "omega_x", "omega_y", "omega_z",
    "pos_x", "pos_y", "pos_z",
    "sensed_roll", "sensed_pitch", "sensed_yaw",
    "ref_roll", "ref_pitch", "ref_yaw", "ref_omega_x", "ref_omega_y", "ref_omega_z",
    "f1_x", "f1_y", "f1_z", "f2_x", "f2_y", "f2_z",
    "f1_ref_x", "f1_ref_y", "f1_ref_z", "f2_ref_x", "f2_ref_y", "f2_ref_z",
    "qp_status", "qp_iterations", "kkt_residual", "mpc_cost", "path_cost",
    "detected", "flag", "tracking_error", "cone_violation", "pivot_drift", "load_estimate",
];

pub const FOOTPRINT_COLUMNS: [&str; 4] = ["step", "vertex", "x", "y"];

pub const SELECTION_COLUMNS: [&str; 6] = ["time", "node", "path", "mode", "cost", "flag"];

fn num(v: f64) -> String {
    format!("{v}")
}

fn status_name(s: Option<QpStatus>) -> &'static str {
    match s {
        None => "",
        Some(QpStatus::Optimal) => "optimal",
        Some(QpStatus::MaxIterations) => "max_iterations",
        Some(QpStatus::Infeasible) => "infeasible",
        Some(QpStatus::Inaccurate) => "inaccurate",
    }
}

pub fn write_log<W: Write>(out: W, log: &SimLog) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LOG_COLUMNS)?;
    for (k, r) in log.records.iter().enumerate() {
        let mut row: Vec<String> = vec![
            k.to_string(),
            num(r.time),
            r.step.to_string(),
            r.from_node.to_string(),
            r.to_node.to_string(),
            r.phase.name().to_owned(),
            r.mode.name().to_owned(),
        ];
        let vectors = [&r.angles, &r.omega, &r.position, &r.sensed_angles];
        row.extend(vectors.iter().flat_map(|v| v.iter().map(|x| num(*x))));
        row.extend(r.reference.iter().map(|x| num(*x)));
        row.extend(r.applied.iter().chain(&r.f_ref).flat_map(|f| f.iter().map(|x| num(*x))));
        row.extend([
            status_name(r.qp_status).to_owned(),
            r.qp_iterations.to_string(),
            num(r.kkt_residual),
            num(r.mpc_cost),
            num(r.path_cost.total),
            (r.detected as u8).to_string(),
            (r.flag as u8).to_string(),
            num(r.tracking_error),
            num(r.cone_violation),
            num(r.pivot_drift),
            num(r.load_estimate),
        ]);
        debug_assert_eq!(row.len(), LOG_COLUMNS.len());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_footprints<W: Write>(out: W, log: &SimLog) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FOOTPRINT_COLUMNS)?;
    for f in &log.footprints {
        w.write_record([
            f.step.to_string(),
            f.vertex.short_name().to_owned(),
            num(f.position.x),
            num(f.position.y),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_selections<W: Write>(out: W, log: &SimLog) -> csv::Result<()> {
    let names = pivgait_core::gait::GaitGraph::node_names();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SELECTION_COLUMNS)?;
    for s in &log.selections {
        let path: Vec<&str> = s.nodes.iter().map(|&n| names[n]).collect();
        w.write_record([
            num(s.time),
            names[s.node].to_owned(),
            path.join("-"),
            s.mode.name().to_owned(),
            num(s.cost.total),
            (s.flag as u8).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwitchEntry {
    pub time: f64,
    pub from: String,
    pub to: String,
}

/// Run summary as written to `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub seed: u64,
    pub completed: bool,
    /// `completed` or the failure kind.
    pub reason: String,
    /// Failure details (vertex, height, hand); empty on success.
    pub detail: String,
    pub steps_completed: usize,
    pub end_time: f64,
    pub control_steps: usize,
    pub period: f64,
    pub switches: Vec<SwitchEntry>,
    pub detections: Vec<f64>,
    pub max_tracking_error: f64,
    pub max_tracking_error_ss: f64,
    pub max_cone_violation: f64,
    pub max_pivot_drift: f64,
    pub failed_solves: usize,
}

impl Summary {
    pub fn new(scenario: &Scenario, log: &SimLog) -> Self {
        let s = &log.summary;
        Self {
            scenario: scenario.name.clone(),
            seed: scenario.seed,
            completed: s.outcome.is_completed(),
            reason: s.outcome.reason().to_owned(),
            detail: match &s.outcome {
                Outcome::Completed => String::new(),
                Outcome::Failed(f) => format!("{f:?}"),
            },
            steps_completed: s.steps_completed,
            end_time: s.end_time,
            control_steps: s.control_steps,
            period: scenario.mpc.period,
            switches: s
                .switches
                .iter()
                .map(|w| SwitchEntry {
                    time: w.time,
                    from: w.from.name().to_owned(),
                    to: w.to.name().to_owned(),
                })
                .collect(),
            detections: s.detections.clone(),
            max_tracking_error: s.max_tracking_error,
            max_tracking_error_ss: s.max_tracking_error_ss,
            max_cone_violation: s.max_cone_violation,
            max_pivot_drift: s.max_pivot_drift,
            failed_solves: s.failed_solves,
        }
    }
}

/// Paths of the files written for one run.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub config: PathBuf,
    pub log: PathBuf,
    pub footprints: PathBuf,
    pub selections: PathBuf,
    pub summary: PathBuf,
}

fn csv_err(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

/// Writes every artifact of a finished run into `dir`, creating it.
pub fn write_artifacts(dir: &Path, scenario: &Scenario, log: &SimLog) -> io::Result<Artifacts> {
    std::fs::create_dir_all(dir)?;
    let a = Artifacts {
        config: dir.join(CONFIG_FILE),
        log: dir.join(LOG_FILE),
        footprints: dir.join(FOOTPRINT_FILE),
        selections: dir.join(SELECTION_FILE),
        summary: dir.join(SUMMARY_FILE),
    };
    std::fs::write(&a.config, effective_config(scenario))?;
    let file = |p: &Path| std::fs::File::create(p).map(io::BufWriter::new);
    write_log(file(&a.log)?, log).map_err(csv_err)?;
    write_footprints(file(&a.footprints)?, log).map_err(csv_err)?;
    write_selections(file(&a.selections)?, log).map_err(csv_err)?;
    let mut json = serde_json::to_string_pretty(&Summary::new(scenario, log)).map_err(io::Error::other)?;
    json.push('\n');
    std::fs::write(&a.summary, json)?;
    Ok(a)
}
