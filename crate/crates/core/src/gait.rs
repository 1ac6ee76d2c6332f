//! Gait-mode graph: support-state nodes with key poses, timed edges, path
//! costs, disturbance detection and the reference trajectory fed to the MPC.
//!
//! Node layout (walking along `+x`, steps turn the box about a rear vertex):
//!
//! ```text
//!           QS mode (inner)            DS mode (outer)
//!   QS0 -> SSRq -> QS1 -> SSLq -> QS0  DS0 -> SSRd -> DS1 -> SSLd -> DS0
//! ```
//!
//! Every ground node also links to the SS node of the other mode, and every
//! SS node to the next ground node of the other mode (switching edges).

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use nalgebra::{Vector3, Vector6};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::geom::{euler_rate_matrix_inverse, EulerAngles, DEFAULT_SINGULARITY_BAND};
use crate::model::Phase;

/// Number of edges in a candidate path.
pub const PATH_EDGES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum GaitMode {
    Qs,
    Ds,
}

impl GaitMode {
    pub fn name(self) -> &'static str {
        match self {
            GaitMode::Qs => "QS",
            GaitMode::Ds => "DS",
        }
    }
}

/// Gait geometry and timing.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct GaitParams {
    /// Forward advance of the swinging rear vertex per step (m).
    pub step_length: f64,
    /// Distance between the two rear vertices (m).
    pub pivot_spacing: f64,
    pub roll_peak_qs: f64,
    pub roll_peak_ds: f64,
    /// Pitch of the SS poses in QS mode (negative lifts the front).
    pub pitch_qs: f64,
    /// Pitch of the DS poses and of the SS poses in DS mode.
    pub pitch_ds: f64,
    /// Edge time inside the DS cycle (s).
    pub edge_time_ds: f64,
    /// Edge time inside the QS cycle (s).
    pub edge_time_qs: f64,
    /// Edge time of switching edges; the QS edge time when unset.
    pub edge_time_switch: Option<f64>,
}

impl Default for GaitParams {
    fn default() -> Self {
        Self {
            step_length: 0.085,
            pivot_spacing: 0.4,
            roll_peak_qs: 0.35,
            roll_peak_ds: 0.2,
            pitch_qs: -0.15,
            pitch_ds: -0.15,
            edge_time_ds: 0.55,
            edge_time_qs: 1.4,
            edge_time_switch: None,
        }
    }
}

impl GaitParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            (self.step_length, "step_length"),
            (self.pivot_spacing, "pivot_spacing"),
            (self.roll_peak_qs, "roll_peak_qs"),
            (self.roll_peak_ds, "roll_peak_ds"),
            (self.edge_time_ds, "edge_time_ds"),
            (self.edge_time_qs, "edge_time_qs"),
            (self.edge_time_switch.unwrap_or(1.0), "edge_time_switch"),
        ];
        for (v, name) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(alloc::format!("{name} must be positive")));
            }
        }
        if self.step_length >= self.pivot_spacing {
            return Err(Error::InvalidParams("step_length must be below pivot_spacing".into()));
        }
        if !(self.pitch_qs < 0.0 && self.pitch_ds < 0.0) {
            return Err(Error::InvalidParams("SS pitch must be negative".into()));
        }
        for a in [self.roll_peak_qs, self.roll_peak_ds, self.pitch_qs, self.pitch_ds] {
            if a.abs() >= core::f64::consts::FRAC_PI_2 - DEFAULT_SINGULARITY_BAND {
                return Err(Error::InvalidParams("key pose angle too large".into()));
            }
        }
        Ok(())
    }

    /// Yaw turned per step so the swinging rear vertex advances
    /// `step_length`.
    pub fn step_yaw(&self) -> f64 {
        (self.step_length / self.pivot_spacing).asin()
    }

    pub fn edge_time_switch(&self) -> f64 {
        self.edge_time_switch.unwrap_or(self.edge_time_qs)
    }
}

/// Weights of the path cost.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PathWeights {
    pub alpha_g: f64,
    pub beta_g: f64,
    pub gamma_g: f64,
    pub delta_ds: f64,
    pub delta_qs: f64,
}

impl Default for PathWeights {
    fn default() -> Self {
        Self {
            alpha_g: 1.0,
            beta_g: 1.0,
            gamma_g: 1.0,
            delta_ds: 10.0,
            delta_qs: 1.0,
        }
    }
}

impl PathWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.alpha_g, self.beta_g, self.gamma_g, self.delta_ds, self.delta_qs];
        if w.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidParams("path weights must be non-negative".into()));
        }
        if !(self.delta_qs > 0.0 && self.delta_ds > self.delta_qs) {
            return Err(Error::InvalidParams("need delta_ds > delta_qs > 0".into()));
        }
        Ok(())
    }

    pub fn delta(&self, mode: GaitMode) -> f64 {
        match mode {
            GaitMode::Ds => self.delta_ds,
            GaitMode::Qs => self.delta_qs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaitNode {
    pub id: usize,
    pub name: &'static str,
    pub phase: Phase,
    /// Mode family the node belongs to.
    pub mode: GaitMode,
    pub key_pose: EulerAngles,
}

impl GaitNode {
    /// Key state `[Ψ; ω]` with zero rate.
    pub fn key_state(&self) -> Vector6<f64> {
        let a = self.key_pose.to_vector();
        Vector6::new(a.x, a.y, a.z, 0.0, 0.0, 0.0)
    }

    pub fn is_ground(&self) -> bool {
        !self.phase.is_single()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaitEdge {
    pub from: usize,
    pub to: usize,
    /// Transit time (s).
    pub duration: f64,
    /// Static part of the edge cost, `α_g ‖x_from − x_to‖² + β_g t`.
    pub base_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaitGraph {
    pub params: GaitParams,
    pub weights: PathWeights,
    pub nodes: Vec<GaitNode>,
    pub edges: Vec<GaitEdge>,
}

pub const QS0: usize = 0;
pub const SS_R_Q: usize = 1;
pub const QS1: usize = 2;
pub const SS_L_Q: usize = 3;
pub const DS0: usize = 4;
pub const SS_R_D: usize = 5;
pub const DS1: usize = 6;
pub const SS_L_D: usize = 7;

pub fn build_graph(params: &GaitParams, weights: &PathWeights) -> Result<GaitGraph> {
    params.validate()?;
    weights.validate()?;
    let a = params.step_yaw();
    let (rq, rd) = (params.roll_peak_qs, params.roll_peak_ds);
    let (pq, pd) = (params.pitch_qs, params.pitch_ds);
    let node = |id, name, phase, mode, roll, pitch, yaw| GaitNode {
        id,
        name,
        phase,
        mode,
        key_pose: EulerAngles::new(roll, pitch, yaw),
    };
    let nodes = vec![
        node(QS0, "QS0", Phase::Qs, GaitMode::Qs, 0.0, 0.0, 0.0),
        node(SS_R_Q, "SSRq", Phase::SsRight, GaitMode::Qs, rq, pq, -0.5 * a),
        node(QS1, "QS1", Phase::Qs, GaitMode::Qs, 0.0, 0.0, -a),
        node(SS_L_Q, "SSLq", Phase::SsLeft, GaitMode::Qs, -rq, pq, -0.5 * a),
        node(DS0, "DS0", Phase::Ds, GaitMode::Ds, 0.0, pd, 0.0),
        node(SS_R_D, "SSRd", Phase::SsRight, GaitMode::Ds, rd, pd, -0.5 * a),
        node(DS1, "DS1", Phase::Ds, GaitMode::Ds, 0.0, pd, -a),
        node(SS_L_D, "SSLd", Phase::SsLeft, GaitMode::Ds, -rd, pd, -0.5 * a),
    ];
    let pairs = [
        (QS0, SS_R_Q),
        (QS0, SS_R_D),
        (DS0, SS_R_D),
        (DS0, SS_R_Q),
        (SS_R_Q, QS1),
        (SS_R_Q, DS1),
        (SS_R_D, DS1),
        (SS_R_D, QS1),
        (QS1, SS_L_Q),
        (QS1, SS_L_D),
        (DS1, SS_L_D),
        (DS1, SS_L_Q),
        (SS_L_Q, QS0),
        (SS_L_Q, DS0),
        (SS_L_D, DS0),
        (SS_L_D, QS0),
    ];
    let edges = pairs
        .iter()
        .map(|&(from, to)| {
            let duration = match (nodes[from].mode, nodes[to].mode) {
                (GaitMode::Ds, GaitMode::Ds) => params.edge_time_ds,
                (GaitMode::Qs, GaitMode::Qs) => params.edge_time_qs,
                _ => params.edge_time_switch(),
            };
            let ds = (nodes[from].key_state() - nodes[to].key_state()).norm_squared();
            GaitEdge {
                from,
                to,
                duration,
                base_weight: weights.alpha_g * ds + weights.beta_g * duration,
            }
        })
        .collect();
    Ok(GaitGraph {
        params: params.clone(),
        weights: *weights,
        nodes,
        edges,
    })
}

impl GaitGraph {
    pub fn edge(&self, from: usize, to: usize) -> Option<&GaitEdge> {
        self.edges.iter().find(|e| e.from == from && e.to == to)
    }

    pub fn successors(&self, from: usize) -> impl Iterator<Item = &GaitEdge> {
        self.edges.iter().filter(move |e| e.from == from)
    }

    /// Node names in id order.
    pub fn node_names() -> [&'static str; 8] {
        ["QS0", "SSRq", "QS1", "SSLq", "DS0", "SSRd", "DS1", "SSLd"]
    }

    pub fn node_by_name(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    /// Ground node of `mode` that starts a cycle.
    pub fn cycle_start(mode: GaitMode) -> usize {
        match mode {
            GaitMode::Qs => QS0,
            GaitMode::Ds => DS0,
        }
    }

    /// Mode of a path: DS when it lands on any DS ground node, QS otherwise.
    pub fn path_mode(&self, nodes: &[usize]) -> GaitMode {
        let lands_ds = nodes
            .iter()
            .skip(1)
            .any(|&n| self.nodes[n].is_ground() && self.nodes[n].mode == GaitMode::Ds);
        if lands_ds {
            GaitMode::Ds
        } else {
            GaitMode::Qs
        }
    }

    /// Every path of `PATH_EDGES` edges starting at `start`; with
    /// `restrict` set, only edges inside that mode's cycle.
    pub fn enumerate_paths(&self, start: usize, restrict: Option<GaitMode>) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut stack = vec![vec![start]];
        while let Some(path) = stack.pop() {
            if path.len() == PATH_EDGES + 1 {
                out.push(path);
                continue;
            }
            let last = *path.last().expect("non-empty path");
            for e in self.successors(last) {
                if let Some(m) = restrict {
                    if self.nodes[e.to].mode != m || self.nodes[e.from].mode != m {
                        continue;
                    }
                }
                let mut next = path.clone();
                next.push(e.to);
                stack.push(next);
            }
        }
        out.sort();
        out
    }
}

/// Cost breakdown of one candidate path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathCost {
    pub j_s: f64,
    pub j_t: f64,
    pub j_dst: f64,
    pub total: f64,
}

/// Cost of a path given as its node sequence (`PATH_EDGES + 1` nodes).
pub fn path_cost(graph: &GaitGraph, nodes: &[usize], disturbed: bool) -> Result<PathCost> {
    if nodes.len() != PATH_EDGES + 1 {
        return Err(Error::WrongPathLength {
            expected: PATH_EDGES,
            found: nodes.len().saturating_sub(1),
        });
    }
    let mut j_s = 0.0;
    let mut j_t = 0.0;
    for w in nodes.windows(2) {
        let e = graph
            .edge(w[0], w[1])
            .ok_or_else(|| Error::InvalidParams(alloc::format!("no edge {} -> {}", w[0], w[1])))?;
        j_s += (graph.nodes[w[0]].key_state() - graph.nodes[w[1]].key_state()).norm_squared();
        j_t += e.duration;
    }
    let w = &graph.weights;
    let j_dst = if disturbed {
        w.delta(graph.path_mode(nodes))
    } else {
        0.0
    };
    Ok(PathCost {
        j_s,
        j_t,
        j_dst,
        total: w.alpha_g * j_s + w.beta_g * j_t + w.gamma_g * j_dst,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub nodes: Vec<usize>,
    pub mode: GaitMode,
    pub cost: PathCost,
}

/// Picks the cheapest path from `start`. Ties go to QS, then to the
/// lexicographically smaller node sequence.
pub fn select_mode(
    graph: &GaitGraph,
    start: usize,
    disturbed: bool,
    restrict: Option<GaitMode>,
) -> Result<Selection> {
    if start >= graph.nodes.len() {
        return Err(Error::NoAdmissiblePath(start));
    }
    let mut best: Option<Selection> = None;
    for nodes in graph.enumerate_paths(start, restrict) {
        let cost = path_cost(graph, &nodes, disturbed)?;
        let cand = Selection {
            mode: graph.path_mode(&nodes),
            nodes,
            cost,
        };
        let better = match &best {
            None => true,
            Some(b) => match cand.cost.total.partial_cmp(&b.cost.total) {
                Some(Ordering::Less) => true,
                Some(Ordering::Equal) => (cand.mode, &cand.nodes) < (b.mode, &b.nodes),
                _ => false,
            },
        };
        if better {
            best = Some(cand);
        }
    }
    best.ok_or(Error::NoAdmissiblePath(start))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ThresholdMode {
    /// Any single axis (or force component) over its threshold.
    PerAxis,
    /// Threshold-normalized Euclidean norm of the change reaches one.
    Norm,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct DetectorConfig {
    /// Per-axis thresholds on the change of `[roll, pitch, yaw]` (rad).
    pub psi_thr: [f64; 3],
    /// Per-arm thresholds on the change of the hand force (N).
    pub f_thr: [f64; 2],
    pub mode: ThresholdMode,
    /// Node arrivals for which a raised flag stays set.
    pub latch_nodes: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            psi_thr: [0.05; 3],
            f_thr: [5.5; 2],
            mode: ThresholdMode::PerAxis,
            latch_nodes: PATH_EDGES,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.psi_thr.iter().chain(&self.f_thr).any(|t| !(*t > 0.0)) {
            return Err(Error::InvalidParams("detector thresholds must be positive".into()));
        }
        Ok(())
    }
}

/// Which sensor tripped the detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Detection {
    pub pose: bool,
    pub force: bool,
}

impl Detection {
    pub fn any(self) -> bool {
        self.pose || self.force
    }
}

/// Compares each sample with the previous one.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceDetector {
    pub config: DetectorConfig,
    previous: Option<(Vector3<f64>, [Vector3<f64>; 2])>,
}

impl DisturbanceDetector {
    pub fn new(config: DetectorConfig) -> Self {
        Self {
            config,
            previous: None,
        }
    }

    /// Forgets the previous sample; the next call only primes.
    pub fn blank(&mut self) {
        self.previous = None;
    }

    pub fn is_primed(&self) -> bool {
        self.previous.is_some()
    }

    pub fn detect(&mut self, psi: &Vector3<f64>, forces: &[Vector3<f64>; 2]) -> Detection {
        let out = match &self.previous {
            None => Detection::default(),
            Some((p, f)) => Detection {
                pose: self.pose_tripped(&(psi - p)),
                force: (0..2).any(|i| self.force_tripped(i, &(forces[i] - f[i]))),
            },
        };
        self.previous = Some((*psi, *forces));
        out
    }

    fn pose_tripped(&self, d: &Vector3<f64>) -> bool {
        let thr = &self.config.psi_thr;
        match self.config.mode {
            ThresholdMode::PerAxis => (0..3).any(|k| d[k].abs() >= thr[k]),
            ThresholdMode::Norm => {
                let s = Vector3::new(d.x / thr[0], d.y / thr[1], d.z / thr[2]);
                s.norm() >= 1.0
            }
        }
    }

    fn force_tripped(&self, arm: usize, d: &Vector3<f64>) -> bool {
        let thr = self.config.f_thr[arm];
        match self.config.mode {
            ThresholdMode::PerAxis => d.iter().any(|v| v.abs() >= thr),
            ThresholdMode::Norm => d.norm() >= thr,
        }
    }
}

/// `6s⁵ − 15s⁴ + 10s³`, zero slope and curvature at both ends.
pub fn smootherstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (s * (6.0 * s - 15.0) + 10.0)
}

pub fn smootherstep_rate(s: f64) -> f64 {
    if !(0.0..=1.0).contains(&s) {
        return 0.0;
    }
    30.0 * s * s * (1.0 - s) * (1.0 - s)
}

/// Whether a segment lifts off from the ground or sets the box down.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    Lift,
    Lower,
}

/// One edge laid out in time.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub from: usize,
    pub to: usize,
    pub start_time: f64,
    pub duration: f64,
    pub start: EulerAngles,
    pub end: EulerAngles,
    pub kind: SegmentKind,
    /// The SS phase of this edge, which fixes the pivot.
    pub swing_phase: Phase,
    /// Support phase at the far end of a lowering segment.
    pub landing_phase: Phase,
}

impl Segment {
    pub fn end_time(&self) -> f64 {
        self.start_time + self.duration
    }

    /// Reference `[Ψ; ω]` at absolute time `t` (clamped to the segment).
    pub fn eval(&self, t: f64) -> Result<Vector6<f64>> {
        let s = ((t - self.start_time) / self.duration).clamp(0.0, 1.0);
        let a = self.start.to_vector();
        let b = self.end.to_vector();
        let psi = a + (b - a) * smootherstep(s);
        let rate = (b - a) * (smootherstep_rate(s) / self.duration);
        let angles = EulerAngles::from_vector(&psi);
        let w_inv = euler_rate_matrix_inverse(angles, DEFAULT_SINGULARITY_BAND)?;
        let omega = w_inv * rate;
        Ok(Vector6::new(psi.x, psi.y, psi.z, omega.x, omega.y, omega.z))
    }
}

fn segment_for(graph: &GaitGraph, from: usize, to: usize, start_time: f64) -> Result<Segment> {
    let edge = graph
        .edge(from, to)
        .ok_or_else(|| Error::InvalidParams(alloc::format!("no edge {from} -> {to}")))?;
    let (a, b) = (&graph.nodes[from], &graph.nodes[to]);
    let (kind, swing_phase, landing_phase) = if a.is_ground() {
        (SegmentKind::Lift, b.phase, a.phase)
    } else {
        (SegmentKind::Lower, a.phase, b.phase)
    };
    Ok(Segment {
        from,
        to,
        start_time,
        duration: edge.duration,
        start: a.key_pose,
        end: b.key_pose,
        kind,
        swing_phase,
        landing_phase,
    })
}

/// Time-laid sequence of segments.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Schedule {
    pub segments: Vec<Segment>,
}

impl Schedule {
    /// Lays out the edges of `nodes` starting at `start_time`.
    pub fn from_path(graph: &GaitGraph, nodes: &[usize], start_time: f64) -> Result<Self> {
        let mut s = Self::default();
        let mut t = start_time;
        for w in nodes.windows(2) {
            let seg = segment_for(graph, w[0], w[1], t)?;
            t = seg.end_time();
            s.segments.push(seg);
        }
        Ok(s)
    }

    /// Appends the edge `from -> to` after the last segment.
    pub fn push(&mut self, graph: &GaitGraph, from: usize, to: usize) -> Result<()> {
        let t = self.end_time();
        self.segments.push(segment_for(graph, from, to, t)?);
        Ok(())
    }

    pub fn end_time(&self) -> f64 {
        self.segments.last().map_or(0.0, Segment::end_time)
    }

    /// Index of the segment active at `t`; the last one after the end.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        if self.segments.is_empty() {
            return None;
        }
        let i = self.segments.partition_point(|s| s.end_time() <= t);
        Some(i.min(self.segments.len() - 1))
    }

    pub fn eval(&self, t: f64) -> Result<Vector6<f64>> {
        match self.index_at(t) {
            Some(i) => self.segments[i].eval(t),
            None => Err(Error::InvalidParams("empty schedule".into())),
        }
    }

    /// Stacked reference `[x(t + T); …; x(t + n T)]`.
    pub fn horizon(&self, t: f64, period: f64, n: usize) -> Result<nalgebra::DVector<f64>> {
        let mut out = nalgebra::DVector::zeros(6 * n);
        for i in 0..n {
            let x = self.eval(t + period * (i + 1) as f64)?;
            out.fixed_rows_mut::<6>(6 * i).copy_from(&x);
        }
        Ok(out)
    }
}

/// A sampled reference state with its support annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSample {
    pub time: f64,
    pub x: Vector6<f64>,
    pub segment: usize,
    pub phase: Phase,
    /// Ground-contact node reached or left at this sample.
    pub waypoint: bool,
}

/// Samples the path at period `period`, both ends included.
pub fn reference_trajectory(graph: &GaitGraph, nodes: &[usize], period: f64) -> Result<Vec<ReferenceSample>> {
    if !(period > 0.0) {
        return Err(Error::NonPositiveInput("period"));
    }
    let schedule = Schedule::from_path(graph, nodes, 0.0)?;
    let total = schedule.end_time();
    let ratio = total / period;
    let n = if (ratio - ratio.round()).abs() < 1e-9 * ratio.max(1.0) {
        ratio.round() as usize
    } else {
        ratio.ceil() as usize
    };
    let mut out = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t = (k as f64 * period).min(total);
        let i = schedule.index_at(t).unwrap_or(0);
        let seg = &schedule.segments[i];
        let at_start = k == 0;
        let at_end = k == n;
        let (phase, waypoint) = if at_start {
            (graph.nodes[seg.from].phase, graph.nodes[seg.from].is_ground())
        } else if at_end {
            (graph.nodes[seg.to].phase, graph.nodes[seg.to].is_ground())
        } else {
            (seg.swing_phase, false)
        };
        out.push(ReferenceSample {
            time: t,
            x: schedule.eval(t)?,
            segment: i,
            phase,
            waypoint,
        });
    }
    Ok(out)
}
