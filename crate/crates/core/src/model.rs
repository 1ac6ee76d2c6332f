//! The manipulated box: geometry, mass properties, support states.

use nalgebra::{Matrix3, Vector3, Vector6};

use crate::error::{Error, Result};
use crate::geom::{EulerAngles, Pose};

/// Height tolerance (m) for a vertex to count as touching the ground.
pub const CONTACT_TOLERANCE: f64 = 1e-4;

/// Bottom vertices of the box. Front is `+x`, left is `+y` in the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum VertexLabel {
    FrontLeft,
    FrontRight,
    RearLeft,
    RearRight,
}

impl VertexLabel {
    pub const ALL: [VertexLabel; 4] = [
        VertexLabel::FrontLeft,
        VertexLabel::FrontRight,
        VertexLabel::RearLeft,
        VertexLabel::RearRight,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn short_name(self) -> &'static str {
        match self {
            VertexLabel::FrontLeft => "FL",
            VertexLabel::FrontRight => "FR",
            VertexLabel::RearLeft => "RL",
            VertexLabel::RearRight => "RR",
        }
    }
}

/// Rigid box model. All vectors in the body frame unless noted.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectModel {
    pub dimensions: Vector3<f64>,
    pub mass: f64,
    /// Inertia about the CoG, body axes.
    pub inertia: Matrix3<f64>,
    pub com_body: Vector3<f64>,
    /// Indexed by [`VertexLabel::index`].
    pub bottom_vertices: [Vector3<f64>; 4],
    /// Hand 1 (right side, `-y` face) and hand 2 (left side, `+y` face).
    pub grasp_points: [Vector3<f64>; 2],
    pub gravity: Vector3<f64>,
}

impl ObjectModel {
    /// Homogeneous box with its body origin at the geometric center,
    /// grasped at the centers of the two long side faces.
    pub fn homogeneous_box(dimensions: Vector3<f64>, mass: f64) -> Result<Self> {
        let inertia = box_inertia(mass, &dimensions)?;
        let h = dimensions / 2.0;
        let bottom_vertices = [
            Vector3::new(h.x, h.y, -h.z),
            Vector3::new(h.x, -h.y, -h.z),
            Vector3::new(-h.x, h.y, -h.z),
            Vector3::new(-h.x, -h.y, -h.z),
        ];
        Ok(Self {
            dimensions,
            mass,
            inertia,
            com_body: Vector3::zeros(),
            bottom_vertices,
            grasp_points: [Vector3::new(0.0, -h.y, 0.0), Vector3::new(0.0, h.y, 0.0)],
            gravity: Vector3::new(0.0, 0.0, -9.81),
        })
    }

    pub fn vertex(&self, label: VertexLabel) -> Vector3<f64> {
        self.bottom_vertices[label.index()]
    }

    /// Checks the model invariants: positive mass, SPD inertia, coplanar
    /// bottom vertices, grasp points on the surface.
    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) {
            return Err(Error::NonPositiveInput("mass"));
        }
        if self.dimensions.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::NonPositiveInput("dimensions"));
        }
        if (self.inertia - self.inertia.transpose()).abs().max() > 1e-12 {
            return Err(Error::InvalidParams("inertia is not symmetric".into()));
        }
        if self.inertia.cholesky().is_none() {
            return Err(Error::InvalidParams("inertia is not positive definite".into()));
        }
        let [a, b, c, d] = self.bottom_vertices;
        let normal = (b - a).cross(&(c - a));
        if normal.norm() == 0.0 || (d - a).dot(&normal).abs() > 1e-9 * normal.norm() {
            return Err(Error::InvalidParams("bottom vertices are not coplanar".into()));
        }
        let h = self.dimensions / 2.0;
        for g in &self.grasp_points {
            let inside = (0..3).all(|k| g[k].abs() <= h[k] + 1e-12);
            let on_face = (0..3).any(|k| (g[k].abs() - h[k]).abs() <= 1e-9);
            if !(inside && on_face) {
                return Err(Error::InvalidParams("grasp point is not on the surface".into()));
            }
        }
        Ok(())
    }
}

/// Support phases of the pivoting gait.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Phase {
    /// Single support on the rear-left vertex.
    SsLeft,
    /// Single support on the rear-right vertex.
    SsRight,
    /// Double support on the rear edge.
    Ds,
    /// Quadruple support on the bottom face.
    Qs,
}

impl Phase {
    pub fn is_single(self) -> bool {
        matches!(self, Phase::SsLeft | Phase::SsRight)
    }

    pub fn pivot_label(self) -> Option<VertexLabel> {
        match self {
            Phase::SsLeft => Some(VertexLabel::RearLeft),
            Phase::SsRight => Some(VertexLabel::RearRight),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Phase::SsLeft => "SS_L",
            Phase::SsRight => "SS_R",
            Phase::Ds => "DS",
            Phase::Qs => "QS",
        }
    }
}

/// Which vertices touch the ground, and the rotation center in SS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportState {
    pub phase: Phase,
    pub active: [bool; 4],
    /// World position of the pivot vertex (SS only).
    pub pivot: Option<Vector3<f64>>,
}

impl SupportState {
    pub fn single(phase: Phase, pivot_world: Vector3<f64>) -> Self {
        let label = phase.pivot_label().expect("single support phase");
        let mut active = [false; 4];
        active[label.index()] = true;
        Self {
            phase,
            active,
            pivot: Some(pivot_world),
        }
    }

    pub fn double() -> Self {
        let mut active = [false; 4];
        active[VertexLabel::RearLeft.index()] = true;
        active[VertexLabel::RearRight.index()] = true;
        Self {
            phase: Phase::Ds,
            active,
            pivot: None,
        }
    }

    pub fn quadruple() -> Self {
        Self {
            phase: Phase::Qs,
            active: [true; 4],
            pivot: None,
        }
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }

    pub fn is_active(&self, label: VertexLabel) -> bool {
        self.active[label.index()]
    }

    /// Checks the vertex-count and pivot-membership invariants.
    pub fn is_consistent(&self) -> bool {
        let count_ok = match self.phase {
            Phase::SsLeft | Phase::SsRight => self.active_count() == 1 && self.pivot.is_some(),
            Phase::Ds => self.active_count() == 2,
            Phase::Qs => self.active_count() == 4,
        };
        let pivot_ok = self
            .phase
            .pivot_label()
            .map_or(true, |l| self.is_active(l));
        count_ok && pivot_ok
    }
}

/// Object configuration: the MPC state `x = [Ψ; ω]` plus translation and
/// support. `omega` is the body-frame angular velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectState {
    pub angles: EulerAngles,
    pub omega: Vector3<f64>,
    pub position: Vector3<f64>,
    pub support: SupportState,
}

impl ObjectState {
    /// Box resting flat with its bottom face on `z = 0`.
    pub fn resting(model: &ObjectModel, position_xy: [f64; 2], yaw: f64) -> Self {
        let z = -model.bottom_vertices[0].z;
        Self {
            angles: EulerAngles::new(0.0, 0.0, yaw),
            omega: Vector3::zeros(),
            position: Vector3::new(position_xy[0], position_xy[1], z),
            support: SupportState::quadruple(),
        }
    }

    pub fn pose(&self) -> Pose {
        Pose::new(self.position, self.angles)
    }

    pub fn x(&self) -> Vector6<f64> {
        let a = self.angles.to_vector();
        Vector6::new(a.x, a.y, a.z, self.omega.x, self.omega.y, self.omega.z)
    }

    /// Places the box so that body point `anchor_body` sits at `anchor_world`
    /// under the current orientation.
    pub fn anchor(&mut self, anchor_body: &Vector3<f64>, anchor_world: &Vector3<f64>) {
        self.position = anchor_world - self.angles.rotation() * anchor_body;
    }
}

/// Inertia of a solid homogeneous cuboid about its center, body axes.
pub fn box_inertia(mass: f64, dimensions: &Vector3<f64>) -> Result<Matrix3<f64>> {
    if !(mass > 0.0) {
        return Err(Error::NonPositiveInput("mass"));
    }
    if dimensions.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::NonPositiveInput("dimensions"));
    }
    let sq = dimensions.component_mul(dimensions);
    Ok(Matrix3::from_diagonal(&Vector3::new(
        sq.y + sq.z,
        sq.x + sq.z,
        sq.x + sq.y,
    )) * (mass / 12.0))
}

/// World positions of the bottom vertices, indexed like
/// [`VertexLabel::ALL`].
pub fn world_vertices(model: &ObjectModel, state: &ObjectState) -> [(VertexLabel, Vector3<f64>); 4] {
    let pose = state.pose();
    VertexLabel::ALL.map(|l| (l, pose.transform_point(&model.vertex(l))))
}

/// Adds a point mass rigidly attached at `payload_pos_body`.
pub fn add_payload(
    model: &ObjectModel,
    payload_mass: f64,
    payload_pos_body: &Vector3<f64>,
) -> Result<ObjectModel> {
    if payload_mass < 0.0 || payload_mass.is_nan() {
        return Err(Error::NegativeMass(payload_mass));
    }
    if payload_mass == 0.0 {
        return Ok(model.clone());
    }
    let total = model.mass + payload_mass;
    let com = (model.com_body * model.mass + payload_pos_body * payload_mass) / total;
    let shift = |m: f64, d: Vector3<f64>| (Matrix3::identity() * d.norm_squared() - d * d.transpose()) * m;
    let inertia = model.inertia
        + shift(model.mass, model.com_body - com)
        + shift(payload_mass, payload_pos_body - com);
    let mut out = model.clone();
    out.mass = total;
    out.com_body = com;
    out.inertia = (inertia + inertia.transpose()) * 0.5;
    Ok(out)
}
