//! Closed-loop simulation: gait graph, MPC, impedance-controlled hands and
//! the nonlinear plant, with scripted disturbances and noisy sensors.
//!
//! The controller runs every `T`; the plant, the hand impedance and the
//! contact springs run `substeps` times per period. Ground phases are
//! kinematically locked: the box stays put until a trial step about the
//! next pivot lifts every other vertex off the ground. A box coming down
//! onto its bottom face settles flat from whichever corner touches first;
//! coming down onto the rear edge, only the other rear corner may touch.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3, Vector6};
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{pivot, step_nonlinear_with, HandForces};
use crate::error::{Error, Result};
use crate::gait::{
    build_graph, select_mode, DetectorConfig, DisturbanceDetector, GaitGraph, GaitMode, GaitParams,
    PathCost, PathWeights, Schedule, Segment, SegmentKind, Selection,
};
use crate::geom::EulerAngles;
use crate::model::{
    add_payload, world_vertices, ObjectModel, ObjectState, Phase, SupportState, VertexLabel,
    CONTACT_TOLERANCE,
};
use crate::mpc::{contact_velocity_map, Controller, FrictionModel, HandGeometry, MpcConfig};
use crate::qp::QpStatus;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ObjectParams {
    pub dimensions: [f64; 3],
    pub mass: f64,
    /// CoG offset from the geometric center, body frame (m).
    pub com_offset: [f64; 3],
    /// Grasp points in the body frame; side-face centers when unset.
    pub grasp_points: Option<[[f64; 3]; 2]>,
    pub gravity: [f64; 3],
}

impl Default for ObjectParams {
    fn default() -> Self {
        Self {
            dimensions: [0.6, 0.4, 0.2],
            mass: 1.4,
            com_offset: [0.0; 3],
            grasp_points: None,
            gravity: [0.0, 0.0, -9.81],
        }
    }
}

impl ObjectParams {
    pub fn build(&self) -> Result<ObjectModel> {
        let mut m = ObjectModel::homogeneous_box(Vector3::from(self.dimensions), self.mass)?;
        m.com_body = Vector3::from(self.com_offset);
        if let Some(g) = self.grasp_points {
            m.grasp_points = g.map(Vector3::from);
        }
        m.gravity = Vector3::from(self.gravity);
        m.validate()?;
        Ok(m)
    }
}

/// Hand impedance and the contact spring between hand and box.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ContactParams {
    /// Contact stiffness (N/m).
    pub stiffness: f64,
    /// Diagonal of the impedance damping matrix (N·s/m).
    pub damping: [f64; 3],
    /// Hand retraction beyond the unloaded contact that counts as lost
    /// contact (m).
    pub separation_tol: f64,
    pub hand_radius: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self {
            stiffness: 3000.0,
            damping: [100.0; 3],
            separation_tol: 0.005,
            hand_radius: 0.05,
        }
    }
}

impl ContactParams {
    pub fn damping_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::from(self.damping))
    }
}

/// Half-widths of the uniform sensor noise.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct NoiseParams {
    /// rad
    pub angle: f64,
    /// rad/s
    pub rate: f64,
    /// m
    pub position: f64,
    /// N
    pub force: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            angle: 0.002,
            rate: 0.01,
            position: 0.001,
            force: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SimParams {
    /// Plant steps per control period.
    pub substeps: usize,
    /// Largest height (m) a landing vertex may still have when the box is
    /// set down.
    pub landing_height_tol: f64,
    /// Tracking error (rad) treated as a fall.
    pub fall_error: f64,
    /// Consecutive failed QP solves tolerated.
    pub max_failed_solves: usize,
    /// Time after a support transition during which the detector only
    /// re-primes (s).
    pub detector_holdoff: f64,
    /// Gain of the load estimate refined while the box is in the air;
    /// zero keeps the controller on the nominal mass.
    pub load_gain: f64,
    /// Upper bound of the load estimate (kg).
    pub max_load: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            substeps: 10,
            landing_height_tol: 0.02,
            fall_error: 0.5,
            max_failed_solves: 3,
            detector_holdoff: 0.06,
            load_gain: 0.2,
            max_load: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields))]
pub enum DisturbanceEvent {
    /// Point mass put on the box; top-face center when `position` is unset.
    Payload {
        time: f64,
        mass: f64,
        #[cfg_attr(feature = "serde", serde(default))]
        position: Option<[f64; 3]>,
    },
    /// Instant change of the body-frame angular velocity (rad/s).
    Impulse { time: f64, delta_omega: [f64; 3] },
    /// Constant world-frame force on a body point for `duration` seconds.
    Push {
        time: f64,
        force: [f64; 3],
        duration: f64,
        #[cfg_attr(feature = "serde", serde(default))]
        point: [f64; 3],
    },
}

impl DisturbanceEvent {
    pub fn time(&self) -> f64 {
        match self {
            DisturbanceEvent::Payload { time, .. }
            | DisturbanceEvent::Impulse { time, .. }
            | DisturbanceEvent::Push { time, .. } => *time,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            DisturbanceEvent::Payload { .. } => "payload",
            DisturbanceEvent::Impulse { .. } => "impulse",
            DisturbanceEvent::Push { .. } => "push",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    /// Steps (single-support phases) to complete.
    pub steps: usize,
    /// Optional walking target: stop once the rear feet pass this `x`.
    pub goal_x: Option<f64>,
    /// Ground node the box starts on.
    pub initial_node: String,
    /// Allow switching between the DS and QS cycles.
    pub switching: bool,
    pub object: ObjectParams,
    pub mpc: MpcConfig,
    pub gait: GaitParams,
    pub weights: PathWeights,
    pub detector: DetectorConfig,
    pub contact: ContactParams,
    pub noise: NoiseParams,
    pub sim: SimParams,
    pub events: Vec<DisturbanceEvent>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "unnamed".into(),
            seed: 0,
            steps: 2,
            goal_x: None,
            initial_node: "DS0".into(),
            switching: true,
            object: ObjectParams::default(),
            mpc: MpcConfig::default(),
            gait: GaitParams::default(),
            weights: PathWeights::default(),
            detector: DetectorConfig::default(),
            contact: ContactParams::default(),
            noise: NoiseParams::default(),
            sim: SimParams::default(),
            events: Vec::new(),
        }
    }
}

impl Scenario {
    /// Every violated invariant, one message each.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut push = |cond: bool, msg: &str| {
            if !cond {
                out.push(msg.to_string());
            }
        };
        push(self.steps >= 1, "steps must be at least 1");
        push(self.object.mass > 0.0, "object.mass must be positive");
        push(
            self.object.dimensions.iter().all(|d| *d > 0.0),
            "object.dimensions must be positive",
        );
        push(self.mpc.alpha > 0.0, "mpc.alpha must be positive");
        push(self.mpc.beta > 0.0, "mpc.beta must be positive");
        push(self.mpc.horizon >= 1, "mpc.horizon must be at least 1");
        push(self.mpc.period > 0.0, "mpc.period must be positive");
        push(self.mpc.f_n_max > 0.0, "mpc.f_n_max must be positive");
        push(self.mpc.mu > 0.0, "mpc.mu must be positive");
        push(
            self.mpc.rate_periods > 0.0,
            "mpc.rate_periods must be positive",
        );
        push(
            self.contact.stiffness > 0.0,
            "contact.stiffness must be positive",
        );
        push(
            self.contact.damping.iter().all(|d| *d > 0.0),
            "contact.damping must be positive definite",
        );
        push(
            self.contact.separation_tol > 0.0,
            "contact.separation_tol must be positive",
        );
        push(
            self.contact.hand_radius > 0.0,
            "contact.hand_radius must be positive",
        );
        push(
            [self.noise.angle, self.noise.rate, self.noise.position, self.noise.force]
                .iter()
                .all(|v| *v >= 0.0),
            "noise levels must be non-negative",
        );
        push(self.sim.substeps >= 1, "sim.substeps must be at least 1");
        push(
            self.sim.landing_height_tol > 0.0,
            "sim.landing_height_tol must be positive",
        );
        push(self.sim.fall_error > 0.0, "sim.fall_error must be positive");
        push(
            self.sim.max_failed_solves >= 1,
            "sim.max_failed_solves must be at least 1",
        );
        push(
            self.sim.detector_holdoff >= 0.0,
            "sim.detector_holdoff must be non-negative",
        );
        push(self.sim.load_gain >= 0.0, "sim.load_gain must be non-negative");
        push(self.sim.max_load >= 0.0, "sim.max_load must be non-negative");
        push(
            self.detector.latch_nodes >= 1,
            "detector.latch_nodes must be at least 1",
        );
        if let Err(e) = self.object.build() {
            if self.object.mass > 0.0 && self.object.dimensions.iter().all(|d| *d > 0.0) {
                out.push(alloc::format!("object: {e}"));
            }
        }
        if let Err(e) = self.gait.validate() {
            out.push(alloc::format!("gait: {e}"));
        }
        if let Err(e) = self.weights.validate() {
            out.push(alloc::format!("weights: {e}"));
        }
        if let Err(e) = self.detector.validate() {
            out.push(alloc::format!("detector: {e}"));
        }
        match GaitGraph::node_names().iter().position(|n| *n == self.initial_node) {
            Some(i) if GaitGraph::node_names()[i].contains('S') && i % 2 == 1 => {
                out.push("initial_node must be a ground node".into())
            }
            Some(_) => {}
            None => out.push(alloc::format!("unknown initial_node {:?}", self.initial_node)),
        }
        let mut last = f64::NEG_INFINITY;
        for (i, e) in self.events.iter().enumerate() {
            let t = e.time();
            if !(t >= 0.0 && t.is_finite()) {
                out.push(alloc::format!("events[{i}].time must be non-negative"));
            }
            if t < last {
                out.push(alloc::format!("events[{i}] is out of time order"));
            }
            last = t;
            match e {
                DisturbanceEvent::Payload { mass, .. } if !(*mass >= 0.0) => {
                    out.push(alloc::format!("events[{i}].mass must be non-negative"))
                }
                DisturbanceEvent::Push { duration, .. } if !(*duration > 0.0) => {
                    out.push(alloc::format!("events[{i}].duration must be positive"))
                }
                _ => {}
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidScenario(p.join("; ")))
        }
    }
}

/// Velocity-level impedance: the commanded hand velocity yields to the
/// force error, `v = v_ref + D⁻¹ (f_measured − f_ref)`.
pub fn impedance_update(
    v_ref: &Vector3<f64>,
    f_ref: &Vector3<f64>,
    f_measured: &Vector3<f64>,
    damping: &Matrix3<f64>,
) -> Result<Vector3<f64>> {
    if (damping - damping.transpose()).amax() > 1e-12 * damping.amax() {
        return Err(Error::SingularDamping);
    }
    let chol = damping.cholesky().ok_or(Error::SingularDamping)?;
    Ok(v_ref + chol.solve(&(f_measured - f_ref)))
}

/// Spring between each hand and its contact point: the realized force is
/// `f_ref + K e`, where `e` integrates the hand velocity relative to the
/// contact point, clipped into the friction pyramid. Clipped load slips.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactModel {
    pub stiffness: f64,
    pub separation_tol: f64,
    pub offset: [Vector3<f64>; 2],
}

impl ContactModel {
    pub fn new(stiffness: f64, separation_tol: f64) -> Self {
        Self {
            stiffness,
            separation_tol,
            offset: [Vector3::zeros(); 2],
        }
    }

    pub fn update(
        &mut self,
        f_ref: &HandForces,
        v_hand: &[Vector3<f64>; 2],
        v_contact: &[Vector3<f64>; 2],
        fm: &FrictionModel,
        dt: f64,
    ) -> Result<HandForces> {
        let mut out = [Vector3::zeros(); 2];
        for i in 0..2 {
            self.offset[i] += (v_hand[i] - v_contact[i]) * dt;
            let raw = f_ref[i] + self.offset[i] * self.stiffness;
            let c_raw = fm.to_contact(i, &raw);
            if c_raw.x < -self.stiffness * self.separation_tol {
                return Err(Error::ContactLost { hand: i + 1 });
            }
            out[i] = fm.clip(i, &raw);
            // slip: the spring keeps only what the pyramid transmits, except
            // for separation, which keeps accumulating
            let mut c_out = fm.to_contact(i, &out[i]);
            if c_raw.x < 0.0 {
                c_out.x = c_raw.x;
            }
            let c_ref = fm.to_contact(i, &f_ref[i]);
            self.offset[i] = fm.frames[i] * (c_out - c_ref) / self.stiffness;
        }
        Ok(out)
    }
}

/// Ground-contact state implied by the vertex heights.
pub fn phase_transition(model: &ObjectModel, state: &ObjectState) -> Result<SupportState> {
    let verts = world_vertices(model, state);
    let mut active = [false; 4];
    for (label, p) in verts {
        if p.z < -CONTACT_TOLERANCE {
            return Err(Error::ScuffDetected {
                vertex: label,
                height: p.z,
            });
        }
        active[label.index()] = p.z <= CONTACT_TOLERANCE;
    }
    let count = active.iter().filter(|a| **a).count();
    let phase = match count {
        4 => Phase::Qs,
        2 => Phase::Ds,
        1 if active[VertexLabel::RearLeft.index()] => Phase::SsLeft,
        1 if active[VertexLabel::RearRight.index()] => Phase::SsRight,
        _ => return Err(Error::NoPivot),
    };
    let pivot = phase
        .pivot_label()
        .map(|l| verts[l.index()].1);
    Ok(SupportState {
        phase,
        active,
        pivot,
    })
}

fn ground_support(phase: Phase) -> SupportState {
    match phase {
        Phase::Ds => SupportState::double(),
        _ => SupportState::quadruple(),
    }
}

/// Vertices touching the ground in a ground phase, excluding the pivot.
fn landing_set(ground: Phase, pivot: VertexLabel) -> Vec<VertexLabel> {
    let s = ground_support(ground);
    VertexLabel::ALL
        .into_iter()
        .filter(|l| *l != pivot && s.is_active(*l))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub from_node: usize,
    pub to_node: usize,
    pub phase: Phase,
    pub mode: GaitMode,
    pub angles: Vector3<f64>,
    pub omega: Vector3<f64>,
    pub position: Vector3<f64>,
    pub sensed_angles: Vector3<f64>,
    pub reference: Vector6<f64>,
    /// Forces acting on the box at the end of the period.
    pub applied: HandForces,
    pub f_ref: HandForces,
    pub qp_status: Option<QpStatus>,
    pub qp_iterations: usize,
    pub kkt_residual: f64,
    pub mpc_cost: f64,
    pub path_cost: PathCost,
    pub detected: bool,
    pub flag: bool,
    pub tracking_error: f64,
    /// Worst friction-pyramid violation over the period's plant steps (N).
    pub cone_violation: f64,
    /// Pivot displacement since the start of the SS phase (m).
    pub pivot_drift: f64,
    /// Extra mass the controller assumes (kg).
    pub load_estimate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FootprintRecord {
    pub step: usize,
    pub vertex: VertexLabel,
    pub position: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRecord {
    pub time: f64,
    pub node: usize,
    pub nodes: Vec<usize>,
    pub mode: GaitMode,
    pub cost: PathCost,
    pub flag: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchRecord {
    pub time: f64,
    pub from: GaitMode,
    pub to: GaitMode,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Scuff { vertex: VertexLabel, height: f64 },
    Infeasible,
    Fall { error: f64 },
    ContactLost { hand: usize },
    /// The box never left the ground during a lift.
    Stall,
    /// The box was still in the air when the lowering ended.
    Landing { height: f64 },
    Numerical(String),
}

impl Failure {
    pub fn reason(&self) -> &'static str {
        match self {
            Failure::Scuff { .. } => "scuff",
            Failure::Infeasible => "infeasible",
            Failure::Fall { .. } => "fall",
            Failure::ContactLost { .. } => "contact_lost",
            Failure::Stall => "stall",
            Failure::Landing { .. } => "landing",
            Failure::Numerical(_) => "numerical",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Completed,
    Failed(Failure),
}

impl Outcome {
    pub fn is_completed(&self) -> bool {
        matches!(self, Outcome::Completed)
    }

    pub fn reason(&self) -> &'static str {
        match self {
            Outcome::Completed => "completed",
            Outcome::Failed(f) => f.reason(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub outcome: Outcome,
    pub steps_completed: usize,
    /// Simulated time at termination (s).
    pub end_time: f64,
    pub control_steps: usize,
    pub switches: Vec<SwitchRecord>,
    pub detections: Vec<f64>,
    pub max_tracking_error: f64,
    /// Largest tracking error while in single support.
    pub max_tracking_error_ss: f64,
    pub max_cone_violation: f64,
    pub max_pivot_drift: f64,
    pub failed_solves: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimLog {
    pub records: Vec<StepRecord>,
    pub footprints: Vec<FootprintRecord>,
    pub selections: Vec<SelectionRecord>,
    pub summary: RunSummary,
}

struct Simulation {
    scenario: Scenario,
    nominal: ObjectModel,
    plant: ObjectModel,
    graph: GaitGraph,
    controller: Controller,
    detector: DisturbanceDetector,
    contact: ContactModel,
    damping: Matrix3<f64>,
    rng: ChaCha8Rng,
    restrict: Option<GaitMode>,

    state: ObjectState,
    on_ground: bool,
    segment: Segment,
    lookahead: Option<Segment>,
    selection: Selection,
    latch: usize,
    steps_done: usize,
    applied: HandForces,
    f_ref: HandForces,
    v_ref: [Vector3<f64>; 2],
    failed_in_row: usize,
    pivot_origin: Option<Vector3<f64>>,
    holdoff_until: f64,
    /// Extra mass the controller assumes at the nominal CoG.
    load: f64,
    /// Airborne sensed state of the previous period, same pivot.
    last_airborne: Option<ObjectState>,
    mean_applied: HandForces,
    /// Landed yaw minus key-pose yaw; later references follow the box.
    yaw_offset: f64,
    next_event: usize,
    pushes: Vec<(f64, Vector3<f64>, Vector3<f64>)>,

    k: usize,
    records: Vec<StepRecord>,
    footprints: Vec<FootprintRecord>,
    selections: Vec<SelectionRecord>,
    switches: Vec<SwitchRecord>,
    detections: Vec<f64>,
    failed_solves: usize,
    outcome: Option<Outcome>,
}

/// Runs a scenario to completion or failure. Only an invalid scenario is an
/// error; run failures are recorded in the summary.
pub fn run(scenario: &Scenario) -> Result<SimLog> {
    let mut sim = Simulation::new(scenario)?;
    while sim.outcome.is_none() {
        if let Err(e) = sim.control_step() {
            sim.fail_with(e);
        }
    }
    Ok(sim.finish())
}

/// Initial pose for a ground node: its key orientation with the rear-right
/// vertex at `(−l/2, −w/2, 0)`.
pub fn initial_state(model: &ObjectModel, graph: &GaitGraph, node: usize) -> ObjectState {
    let n = &graph.nodes[node];
    let rr = model.vertex(VertexLabel::RearRight);
    let mut s = ObjectState {
        angles: n.key_pose,
        omega: Vector3::zeros(),
        position: Vector3::zeros(),
        support: ground_support(n.phase),
    };
    s.anchor(&rr, &Vector3::new(rr.x, rr.y, 0.0));
    s
}

impl Simulation {
    fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let nominal = scenario.object.build()?;
        let graph = build_graph(&scenario.gait, &scenario.weights)?;
        let start = graph
            .node_by_name(&scenario.initial_node)
            .ok_or_else(|| Error::InvalidScenario("unknown initial node".into()))?;
        let restrict = if scenario.switching {
            None
        } else {
            Some(graph.nodes[start].mode)
        };
        let state = initial_state(&nominal, &graph, start);
        let hands = HandGeometry::spherical(state.angles, scenario.contact.hand_radius);
        let controller = Controller::new(scenario.mpc.clone(), hands)?;
        let selection = select_mode(&graph, start, false, restrict)?;
        let segment = Schedule::from_path(&graph, &selection.nodes[..2], 0.0)?.segments.remove(0);
        let mut sim = Self {
            scenario: scenario.clone(),
            plant: nominal.clone(),
            nominal,
            controller,
            detector: DisturbanceDetector::new(scenario.detector.clone()),
            contact: ContactModel::new(scenario.contact.stiffness, scenario.contact.separation_tol),
            damping: scenario.contact.damping_matrix(),
            rng: ChaCha8Rng::seed_from_u64(scenario.seed),
            restrict,
            state,
            on_ground: true,
            segment,
            lookahead: None,
            selection: selection.clone(),
            latch: 0,
            steps_done: 0,
            applied: [Vector3::zeros(); 2],
            f_ref: [Vector3::zeros(); 2],
            v_ref: [Vector3::zeros(); 2],
            failed_in_row: 0,
            pivot_origin: None,
            holdoff_until: 0.0,
            load: 0.0,
            last_airborne: None,
            mean_applied: [Vector3::zeros(); 2],
            yaw_offset: 0.0,
            next_event: 0,
            pushes: Vec::new(),
            k: 0,
            records: Vec::new(),
            footprints: Vec::new(),
            selections: Vec::new(),
            switches: Vec::new(),
            detections: Vec::new(),
            failed_solves: 0,
            outcome: None,
            graph,
        };
        sim.record_selection(0.0, start, &selection, false);
        sim.record_footprints(0);
        sim.lookahead = sim.plan_lookahead()?;
        Ok(sim)
    }

    fn period(&self) -> f64 {
        self.scenario.mpc.period
    }

    fn time(&self) -> f64 {
        self.k as f64 * self.period()
    }

    fn fail(&mut self, f: Failure) {
        if self.outcome.is_none() {
            self.outcome = Some(Outcome::Failed(f));
        }
    }

    fn fail_with(&mut self, e: Error) {
        let f = match e {
            Error::ScuffDetected { vertex, height } => Failure::Scuff { vertex, height },
            Error::ContactLost { hand } => Failure::ContactLost { hand },
            Error::Infeasible => Failure::Infeasible,
            other => Failure::Numerical(alloc::format!("{other}")),
        };
        self.fail(f);
    }

    fn record_selection(&mut self, time: f64, node: usize, sel: &Selection, flag: bool) {
        if let Some(prev) = self.selections.last() {
            if prev.mode != sel.mode {
                self.switches.push(SwitchRecord {
                    time,
                    from: prev.mode,
                    to: sel.mode,
                });
            }
        }
        self.selections.push(SelectionRecord {
            time,
            node,
            nodes: sel.nodes.clone(),
            mode: sel.mode,
            cost: sel.cost,
            flag,
        });
    }

    fn record_footprints(&mut self, step: usize) {
        for (label, p) in world_vertices(&self.plant, &self.state) {
            if self.state.support.is_active(label) {
                self.footprints.push(FootprintRecord {
                    step,
                    vertex: label,
                    position: p,
                });
            }
        }
    }

    /// Whether arriving at the end of the current segment completes the
    /// goal.
    fn segment_completes_goal(&self) -> bool {
        self.segment.kind == SegmentKind::Lower && self.steps_done + 1 >= self.scenario.steps
    }

    fn shifted(&self, mut seg: Segment) -> Segment {
        seg.start.yaw += self.yaw_offset;
        seg.end.yaw += self.yaw_offset;
        seg
    }

    fn plan_lookahead(&self) -> Result<Option<Segment>> {
        if self.segment_completes_goal() {
            return Ok(None);
        }
        let nodes = &self.selection.nodes;
        if nodes.len() < 3 || nodes[1] != self.segment.to {
            return Ok(None);
        }
        let s = Schedule::from_path(&self.graph, &nodes[1..3], self.segment.end_time())?;
        Ok(s.segments.into_iter().next().map(|seg| self.shifted(seg)))
    }

    fn reference_at(&self, t: f64) -> Result<Vector6<f64>> {
        match &self.lookahead {
            Some(next) if t >= self.segment.end_time() => next.eval(t),
            _ => self.segment.eval(t),
        }
    }

    fn reference_horizon(&self, t: f64) -> Result<nalgebra::DVector<f64>> {
        let n = self.scenario.mpc.horizon;
        let mut out = nalgebra::DVector::zeros(6 * n);
        for i in 0..n {
            let x = self.reference_at(t + self.period() * (i + 1) as f64)?;
            out.fixed_rows_mut::<6>(6 * i).copy_from(&x);
        }
        Ok(out)
    }

    fn noise(&mut self, amp: f64) -> Vector3<f64> {
        let mut v = Vector3::zeros();
        for k in 0..3 {
            let u: f64 = self.rng.random();
            v[k] = amp * (2.0 * u - 1.0);
        }
        v
    }

    /// SS phase the controller models: the current one, or the next swing.
    fn controller_model(&self) -> Result<ObjectModel> {
        if self.load > 0.0 {
            add_payload(&self.nominal, self.load, &self.nominal.com_body)
        } else {
            Ok(self.nominal.clone())
        }
    }

    /// Normalized-gradient step on the assumed load from the one-period
    /// prediction error of the angular velocity.
    fn update_load(&mut self, prev: &ObjectState, now: &ObjectState) -> Result<()> {
        let gain = self.scenario.sim.load_gain;
        if gain <= 0.0 {
            return Ok(());
        }
        const PROBE: f64 = 0.1;
        let dt = self.period();
        let f = self.mean_applied;
        let zero = Vector3::zeros();
        let base = self.controller_model()?;
        let probe = add_payload(&base, PROBE, &self.nominal.com_body)?;
        let w0 = step_nonlinear_with(&base, prev, &f, &zero, dt)?.omega;
        let w1 = step_nonlinear_with(&probe, prev, &f, &zero, dt)?.omega;
        let g = (w1 - w0) / PROBE;
        let gg = g.norm_squared();
        if gg > 1e-12 {
            let step = gain * g.dot(&(now.omega - w0)) / gg;
            self.load = (self.load + step).clamp(0.0, self.scenario.sim.max_load);
        }
        Ok(())
    }

    fn model_phase(&self) -> Phase {
        if !self.on_ground {
            return self.state.support.phase;
        }
        match (&self.segment.kind, &self.lookahead) {
            (SegmentKind::Lift, _) => self.segment.swing_phase,
            (SegmentKind::Lower, Some(next)) => next.swing_phase,
            (SegmentKind::Lower, None) => self.segment.swing_phase,
        }
    }

    fn vertex_world(&self, label: VertexLabel) -> Vector3<f64> {
        self.state.pose().transform_point(&self.plant.vertex(label))
    }

    fn tracking_error(&self, reference: &Vector6<f64>) -> f64 {
        let a = self.state.angles.to_vector();
        (a - reference.fixed_rows::<3>(0)).amax()
    }

    fn arrive(&mut self, t: f64) -> Result<()> {
        let seg = self.segment.clone();
        match seg.kind {
            SegmentKind::Lower => {
                if !self.on_ground {
                    let pivot_label = seg.swing_phase.pivot_label().ok_or(Error::NoPivot)?;
                    let height = landing_set(seg.landing_phase, pivot_label)
                        .into_iter()
                        .map(|l| self.vertex_world(l).z)
                        .fold(f64::NEG_INFINITY, f64::max);
                    if height > self.scenario.sim.landing_height_tol {
                        self.fail(Failure::Landing { height });
                        return Ok(());
                    }
                    self.touchdown(seg.landing_phase, true)?;
                }
                self.steps_done += 1;
                let reached_x = self.scenario.goal_x.is_some_and(|gx| {
                    let mid = (self.vertex_world(VertexLabel::RearLeft)
                        + self.vertex_world(VertexLabel::RearRight))
                        * 0.5;
                    mid.x >= gx
                });
                if self.steps_done >= self.scenario.steps || reached_x {
                    self.outcome = Some(Outcome::Completed);
                    return Ok(());
                }
            }
            SegmentKind::Lift => {
                if self.on_ground {
                    self.fail(Failure::Stall);
                    return Ok(());
                }
            }
        }
        let flag = self.latch > 0;
        let sel = select_mode(&self.graph, seg.to, flag, self.restrict)?;
        self.latch = self.latch.saturating_sub(1);
        self.record_selection(t, seg.to, &sel, flag);
        self.selection = sel;
        self.segment = match self.lookahead.take() {
            Some(next) if next.to == self.selection.nodes[1] => next,
            _ => {
                let next = Schedule::from_path(&self.graph, &self.selection.nodes[..2], seg.end_time())?
                    .segments
                    .remove(0);
                self.shifted(next)
            }
        };
        self.lookahead = self.plan_lookahead()?;
        Ok(())
    }

    /// Drops the rest of a lift: lowers from the current pose straight to
    /// the ground node the new path continues with.
    fn abort_lift(&mut self, t: f64, from_pose: EulerAngles) -> Result<()> {
        let ss = self.segment.to;
        let target = self.selection.nodes[1];
        let mut seg = Schedule::from_path(&self.graph, &[ss, target], t)?
            .segments
            .remove(0);
        seg.start = from_pose;
        seg.end.yaw += self.yaw_offset;
        self.segment = seg;
        Ok(())
    }

    /// Sets the box down into `ground`; records footprints for a step.
    fn touchdown(&mut self, ground: Phase, step: bool) -> Result<()> {
        let p0 = pivot(&self.state)?;
        let label = self.state.support.phase.pivot_label().ok_or(Error::NoPivot)?;
        let mut a = self.state.angles;
        a.roll = 0.0;
        if ground == Phase::Qs {
            a.pitch = 0.0;
        }
        self.state.angles = a;
        self.state.omega = Vector3::zeros();
        self.state.anchor(&self.plant.vertex(label), &p0);
        self.state.support = ground_support(ground);
        self.state.support = phase_transition(&self.plant, &self.state)?;
        self.on_ground = true;
        self.pivot_origin = None;
        self.last_airborne = None;
        self.yaw_offset = a.yaw - self.graph.nodes[self.segment.to].key_pose.yaw;
        self.holdoff_until = self.time() + self.period() + self.scenario.sim.detector_holdoff;
        if step {
            self.record_footprints(self.steps_done + 1);
        }
        Ok(())
    }

    fn apply_events(&mut self, tau: f64) -> Result<()> {
        while let Some(ev) = self.scenario.events.get(self.next_event) {
            if ev.time() > tau + 1e-12 {
                break;
            }
            match ev.clone() {
                DisturbanceEvent::Payload { mass, position, .. } => {
                    let pos = position.map(Vector3::from).unwrap_or_else(|| {
                        Vector3::new(0.0, 0.0, 0.5 * self.scenario.object.dimensions[2])
                    });
                    self.plant = add_payload(&self.plant, mass, &pos)?;
                }
                DisturbanceEvent::Impulse { delta_omega, .. } => {
                    if !self.on_ground {
                        self.state.omega += Vector3::from(delta_omega);
                    }
                }
                DisturbanceEvent::Push {
                    time,
                    force,
                    duration,
                    point,
                } => self
                    .pushes
                    .push((time + duration, Vector3::from(force), Vector3::from(point))),
            }
            self.next_event += 1;
        }
        self.pushes.retain(|(end, _, _)| *end > tau);
        Ok(())
    }

    fn push_torque(&self, state: &ObjectState, p0: &Vector3<f64>) -> Vector3<f64> {
        let pose = state.pose();
        self.pushes
            .iter()
            .map(|(_, f, point)| (pose.transform_point(point) - p0).cross(f))
            .sum()
    }

    fn control_step(&mut self) -> Result<()> {
        let t = self.time();
        let eps = 1e-9 * self.period();
        while t >= self.segment.end_time() - eps && self.outcome.is_none() {
            self.arrive(t)?;
        }
        if self.outcome.is_some() {
            return Ok(());
        }

        // sense
        let na = self.scenario.noise.angle;
        let nr = self.scenario.noise.rate;
        let np = self.scenario.noise.position;
        let nf = self.scenario.noise.force;
        let sensed_angles = self.state.angles.to_vector() + self.noise(na);
        let sensed_omega = self.state.omega + self.noise(nr);
        let sensed_position = self.state.position + self.noise(np);
        let sensed_forces = [
            self.applied[0] + self.noise(nf),
            self.applied[1] + self.noise(nf),
        ];

        if t < self.holdoff_until - 1e-9 {
            self.detector.blank();
        }
        let detected = self.detector.detect(&sensed_angles, &sensed_forces).any();
        if detected {
            self.detections.push(t);
            self.latch = self.scenario.detector.latch_nodes;
            let sel = select_mode(&self.graph, self.segment.to, true, self.restrict)?;
            self.record_selection(t, self.segment.to, &sel, true);
            let switched = sel.mode != self.selection.mode;
            self.selection = sel;
            if switched && !self.on_ground && self.segment.kind == SegmentKind::Lift {
                self.abort_lift(t, EulerAngles::from_vector(&sensed_angles))?;
            }
            self.lookahead = self.plan_lookahead()?;
        }

        let reference = self.reference_at(t)?;
        let err = self.tracking_error(&reference);
        if err > self.scenario.sim.fall_error {
            self.fail(Failure::Fall { error: err });
        }

        // control
        let phase = self.model_phase();
        let label = phase.pivot_label().ok_or(Error::NoPivot)?;
        let sensed = ObjectState {
            angles: EulerAngles::from_vector(&sensed_angles),
            omega: sensed_omega,
            position: sensed_position,
            support: SupportState::single(phase, self.vertex_world(label)),
        };
        if let Some(prev) = self.last_airborne.take() {
            if !self.on_ground {
                self.update_load(&prev, &sensed)?;
            }
        }
        if !self.on_ground {
            self.last_airborne = Some(sensed);
        }
        let x_ref = self.reference_horizon(t)?;
        let mut qp_status = None;
        let (mut iters, mut kkt, mut cost) = (0, 0.0, 0.0);
        let model = self.controller_model()?;
        match self.controller.step(&model, &sensed, &x_ref) {
            Ok(out) => {
                self.failed_in_row = 0;
                self.f_ref = out.f_ref;
                self.v_ref = out.contact_velocity_ref;
                qp_status = Some(out.qp_status);
                iters = out.qp_iterations;
                kkt = out.kkt_residual;
                cost = out.cost;
            }
            Err(Error::Infeasible | Error::MaxIterations) => {
                self.failed_in_row += 1;
                self.failed_solves += 1;
                self.v_ref = [Vector3::zeros(); 2];
                if self.failed_in_row >= self.scenario.sim.max_failed_solves {
                    self.fail(Failure::Infeasible);
                }
            }
            Err(e) => return Err(e),
        }

        // plant
        let n_sub = self.scenario.sim.substeps;
        let dt = self.period() / n_sub as f64;
        let mut cone_violation: f64 = 0.0;
        let mut drift: f64 = 0.0;
        self.mean_applied = [Vector3::zeros(); 2];
        for j in 0..n_sub {
            if self.outcome.is_some() {
                break;
            }
            let tau = t + j as f64 * dt;
            self.apply_events(tau)?;
            let fm = FrictionModel::for_pose(
                self.state.angles,
                self.scenario.mpc.mu,
                self.scenario.mpc.f_n_max,
            );
            let v_contact = if self.on_ground {
                [Vector3::zeros(); 2]
            } else {
                let w = self.state.omega;
                [
                    contact_velocity_map(&self.state, &self.plant.grasp_points[0])? * w,
                    contact_velocity_map(&self.state, &self.plant.grasp_points[1])? * w,
                ]
            };
            // hand-side signs: the sensor reads the reaction; a grounded box
            // holds its grasp points still
            let v_ref = if self.on_ground { [Vector3::zeros(); 2] } else { self.v_ref };
            let mut v_hand = [Vector3::zeros(); 2];
            for i in 0..2 {
                v_hand[i] = impedance_update(&v_ref[i], &-self.f_ref[i], &-self.applied[i], &self.damping)?;
            }
            self.applied = self.contact.update(&self.f_ref, &v_hand, &v_contact, &fm, dt)?;
            for i in 0..2 {
                cone_violation = cone_violation.max(fm.violation(i, &self.applied[i]));
                self.mean_applied[i] += self.applied[i] / n_sub as f64;
            }
            if self.on_ground {
                if self.segment.kind == SegmentKind::Lift {
                    self.try_lift(dt)?;
                }
            } else {
                self.integrate(dt)?;
            }
            if let (Some(origin), false) = (self.pivot_origin, self.on_ground) {
                let label = self.state.support.phase.pivot_label().ok_or(Error::NoPivot)?;
                drift = drift.max((self.vertex_world(label) - origin).norm());
            }
        }

        let phase_now = self.state.support.phase;
        self.records.push(StepRecord {
            step: self.k,
            time: t,
            from_node: self.segment.from,
            to_node: self.segment.to,
            phase: phase_now,
            mode: self.selection.mode,
            angles: self.state.angles.to_vector(),
            omega: self.state.omega,
            position: self.state.position,
            sensed_angles,
            reference,
            applied: self.applied,
            f_ref: self.f_ref,
            qp_status,
            qp_iterations: iters,
            kkt_residual: kkt,
            mpc_cost: cost,
            path_cost: self.selection.cost,
            detected,
            flag: self.latch > 0,
            tracking_error: err,
            cone_violation,
            pivot_drift: drift,
            load_estimate: self.load,
        });
        self.k += 1;
        Ok(())
    }

    /// Trial step about the next pivot; accepted once it lifts every other
    /// vertex.
    fn try_lift(&mut self, dt: f64) -> Result<()> {
        let phase = self.segment.swing_phase;
        let label = phase.pivot_label().ok_or(Error::NoPivot)?;
        let p0 = self.vertex_world(label);
        let mut trial = self.state;
        trial.support = SupportState::single(phase, p0);
        let torque = self.push_torque(&trial, &p0);
        let next = step_nonlinear_with(&self.plant, &trial, &self.applied, &torque, dt)?;
        let lifted = world_vertices(&self.plant, &next)
            .iter()
            .filter(|(l, _)| *l != label)
            .all(|(_, p)| p.z >= 0.0);
        if lifted {
            self.state = next;
            self.on_ground = false;
            self.pivot_origin = Some(p0);
            self.last_airborne = None;
            self.holdoff_until = self.time() + self.period() + self.scenario.sim.detector_holdoff;
        }
        Ok(())
    }

    fn integrate(&mut self, dt: f64) -> Result<()> {
        let p0 = pivot(&self.state)?;
        let torque = self.push_torque(&self.state, &p0);
        let next = step_nonlinear_with(&self.plant, &self.state, &self.applied, &torque, dt)?;
        self.state = next;
        let label = self.state.support.phase.pivot_label().ok_or(Error::NoPivot)?;
        let seg = &self.segment;
        let landing = landing_set(seg.landing_phase, label);
        let verts = world_vertices(&self.plant, &self.state);
        let tol = self.scenario.sim.landing_height_tol;
        for (l, p) in verts.iter() {
            if *l == label || landing.contains(l) {
                continue;
            }
            if p.z < -CONTACT_TOLERANCE {
                return Err(Error::ScuffDetected {
                    vertex: *l,
                    height: p.z,
                });
            }
        }
        let touching = landing
            .iter()
            .find(|l| verts[l.index()].1.z <= 0.0);
        if let Some(l) = touching {
            let highest = landing
                .iter()
                .map(|l| verts[l.index()].1.z)
                .fold(f64::NEG_INFINITY, f64::max);
            // a face landing settles from any corner: the box rolls about
            // the touching edge onto the full face
            if highest <= tol || seg.landing_phase == Phase::Qs {
                let step = seg.kind == SegmentKind::Lower;
                let ground = seg.landing_phase;
                return self.touchdown(ground, step);
            }
            let h = verts[l.index()].1.z;
            if h < -CONTACT_TOLERANCE {
                return Err(Error::ScuffDetected {
                    vertex: *l,
                    height: h,
                });
            }
        }
        Ok(())
    }

    fn finish(self) -> SimLog {
        let ss = |r: &&StepRecord| r.phase.is_single();
        let max = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0, f64::max);
        let summary = RunSummary {
            outcome: self.outcome.clone().unwrap_or(Outcome::Failed(Failure::Stall)),
            steps_completed: self.steps_done,
            end_time: self.time(),
            control_steps: self.records.len(),
            switches: self.switches,
            detections: self.detections,
            max_tracking_error: max(&mut self.records.iter().map(|r| r.tracking_error)),
            max_tracking_error_ss: max(&mut self.records.iter().filter(ss).map(|r| r.tracking_error)),
            max_cone_violation: max(&mut self.records.iter().map(|r| r.cone_violation)),
            max_pivot_drift: max(&mut self.records.iter().map(|r| r.pivot_drift)),
            failed_solves: self.failed_solves,
        };
        SimLog {
            records: self.records,
            footprints: self.footprints,
            selections: self.selections,
            summary,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> ObjectModel {
        ObjectModel::homogeneous_box(Vector3::new(0.6, 0.4, 0.2), 1.4).unwrap()
    }

    #[test]
    fn impedance_zero_error_passes_reference() {
        let d = Matrix3::from_diagonal(&Vector3::new(50.0, 80.0, 120.0));
        let v = Vector3::new(0.1, -0.2, 0.3);
        let f = Vector3::new(3.0, 4.0, 5.0);
        assert_eq!(impedance_update(&v, &f, &f, &d).unwrap(), v);
        let e = Vector3::new(5.0, -8.0, 12.0);
        let out = impedance_update(&Vector3::zeros(), &Vector3::zeros(), &e, &d).unwrap();
        assert!((out - Vector3::new(0.1, -0.1, 0.1)).norm() < 1e-15);
    }

    #[test]
    fn impedance_rejects_bad_damping() {
        let d = Matrix3::from_diagonal(&Vector3::new(1.0, 0.0, 1.0));
        let z = Vector3::zeros();
        assert_eq!(impedance_update(&z, &z, &z, &d), Err(Error::SingularDamping));
    }

    #[test]
    fn contact_force_settles_on_reference() {
        // hand tracking the contact point exactly, spring pre-loaded
        let fm = FrictionModel::for_pose(EulerAngles::default(), 0.5, 50.0);
        let f_ref = [fm.frames[0] * Vector3::new(20.0, 3.0, 0.0), fm.frames[1] * Vector3::new(20.0, 3.0, 0.0)];
        let mut cm = ContactModel::new(3000.0, 0.005);
        cm.offset = [Vector3::new(0.0, 0.001, 0.0); 2];
        let d = Matrix3::identity() * 100.0;
        let mut applied = f_ref;
        let dt = 0.002;
        for _ in 0..200 {
            let mut vh = [Vector3::zeros(); 2];
            for i in 0..2 {
                vh[i] = impedance_update(&Vector3::zeros(), &-f_ref[i], &-applied[i], &d).unwrap();
            }
            applied = cm.update(&f_ref, &vh, &[Vector3::zeros(); 2], &fm, dt).unwrap();
        }
        for i in 0..2 {
            assert!((applied[i] - f_ref[i]).norm() <= 0.02 * f_ref[i].norm());
        }
    }

    #[test]
    fn retracted_hand_loses_contact() {
        let fm = FrictionModel::for_pose(EulerAngles::default(), 0.5, 50.0);
        let f_ref = [fm.frames[0] * Vector3::new(10.0, 0.0, 0.0), fm.frames[1] * Vector3::new(10.0, 0.0, 0.0)];
        let mut cm = ContactModel::new(3000.0, 0.005);
        // hand 1 moves away from the box along -n
        let away = [-fm.frames[0].column(0).into_owned() * 1.0, Vector3::zeros()];
        let mut res = Ok(f_ref);
        for _ in 0..20 {
            res = cm.update(&f_ref, &away, &[Vector3::zeros(); 2], &fm, 0.002);
            if res.is_err() {
                break;
            }
        }
        assert_eq!(res, Err(Error::ContactLost { hand: 1 }));
    }

    #[test]
    fn phase_from_geometry() {
        let m = model();
        let flat = ObjectState::resting(&m, [0.0, 0.0], 0.3);
        let s = phase_transition(&m, &flat).unwrap();
        assert_eq!(s.phase, Phase::Qs);
        assert_eq!(s.active_count(), 4);

        // pitch +0.1 puts the front edge down
        let mut tilted = flat;
        tilted.angles = EulerAngles::new(0.0, 0.1, 0.0);
        let fl = m.vertex(VertexLabel::FrontLeft);
        tilted.anchor(&fl, &Vector3::new(0.3, 0.2, 0.0));
        let s = phase_transition(&m, &tilted).unwrap();
        assert_eq!(s.phase, Phase::Ds);
        assert!(s.is_active(VertexLabel::FrontLeft) && s.is_active(VertexLabel::FrontRight));
    }

    #[test]
    fn swing_vertex_below_ground_is_scuff() {
        let m = model();
        let mut s = ObjectState::resting(&m, [0.0, 0.0], 0.0);
        s.angles = EulerAngles::new(0.2, -0.1, 0.0);
        let rr = m.vertex(VertexLabel::RearRight);
        s.anchor(&rr, &Vector3::new(-0.3, -0.2, 0.0));
        assert_eq!(phase_transition(&m, &s).unwrap().phase, Phase::SsRight);
        // sink the box 2 mm below the ground plane
        s.position.z -= 0.002;
        assert!(matches!(phase_transition(&m, &s), Err(Error::ScuffDetected { .. })));
    }

    #[test]
    fn invalid_scenario_lists_every_problem() {
        let sc = Scenario {
            steps: 0,
            object: ObjectParams {
                mass: -1.0,
                ..ObjectParams::default()
            },
            ..Scenario::default()
        };
        let p = sc.problems();
        assert!(p.iter().any(|m| m.contains("steps")));
        assert!(p.iter().any(|m| m.contains("object.mass")));
        assert!(run(&sc).is_err());
    }

    fn payload(mass: f64, switching: bool) -> Scenario {
        Scenario {
            steps: 4,
            switching,
            events: alloc::vec![DisturbanceEvent::Payload { time: 1.2, mass, position: None }],
            ..Scenario::default()
        }
    }

    #[test]
    fn nominal_ds_walk_timing() {
        let sc = Scenario::default();
        let log = run(&sc).unwrap();
        let s = &log.summary;
        assert_eq!(s.outcome, Outcome::Completed);
        assert_eq!(s.steps_completed, 2);
        assert!((s.end_time - 2.2).abs() <= 2.0 * sc.mpc.period, "{}", s.end_time);
        assert!(s.detections.is_empty());
        assert!(s.max_cone_violation <= 1e-6 && s.max_pivot_drift <= 1e-6);
        let drift = log.records.iter().map(|r| r.load_estimate).fold(0.0, f64::max);
        assert!(drift < 0.1, "{drift}");
    }

    #[test]
    fn same_seed_same_log() {
        let sc = payload(0.5, true);
        assert_eq!(run(&sc).unwrap(), run(&sc).unwrap());
        let other = Scenario { seed: sc.seed + 1, ..sc.clone() };
        assert_ne!(run(&sc).unwrap().records, run(&other).unwrap().records);
    }

    #[test]
    fn heavy_payload_switches_to_qs() {
        let sc = payload(2.0, true);
        let log = run(&sc).unwrap();
        let s = &log.summary;
        assert_eq!(s.outcome, Outcome::Completed, "{:?}", s.outcome);
        assert_eq!(s.switches.len(), 1);
        let sw = &s.switches[0];
        assert_eq!((sw.from, sw.to), (GaitMode::Ds, GaitMode::Qs));
        assert!(sw.time >= 1.2 && sw.time <= 1.2 + 3.0 * sc.mpc.period);
        assert!(log.records.last().unwrap().load_estimate > 0.5);
    }

    #[test]
    fn impulse_on_the_table_is_absorbed() {
        let quiet = Scenario::default();
        let kicked = Scenario {
            events: alloc::vec![DisturbanceEvent::Impulse { time: 0.0, delta_omega: [1.0, 0.0, 0.0] }],
            ..quiet.clone()
        };
        assert_eq!(run(&quiet).unwrap().records, run(&kicked).unwrap().records);
    }
}
