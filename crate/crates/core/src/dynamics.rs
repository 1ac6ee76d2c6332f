//! Rotational dynamics about the pivot vertex: the nonlinear plant step and
//! the discrete linear prediction model stacked over the horizon.
//!
//! In single support the object rotates about a fixed ground vertex `p_0`.
//! With world-frame inertia about the pivot `I_w = R I_o Rᵀ + m (|c|² I - c cᵀ)`
//! (`c = p_com - p_0`), Euler's equation reads
//!
//! ```text
//! r_1 × f_1 + r_2 × f_2 + r_com × m g = I_w ω̇_w + ω_w × I_w ω_w
//! ```
//!
//! The state carries the body-frame angular velocity `ω = Rᵀ ω_w`, for which
//! `ω̇ = Rᵀ ω̇_w` holds exactly.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix6, Vector3, Vector6};

use crate::error::{Error, Result};
use crate::geom::{euler_rate_matrix, skew, EulerAngles, DEFAULT_SINGULARITY_BAND};
use crate::model::{ObjectModel, ObjectState};

/// Hand forces `[f_1, f_2]` in the world frame (N).
pub type HandForces = [Vector3<f64>; 2];

/// One-step model `x_{k+1} = A x_k + B u_k + D`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepMatrices {
    pub a: Matrix6<f64>,
    pub b: Matrix6<f64>,
    pub d: Vector6<f64>,
    pub period: f64,
}

impl StepMatrices {
    pub fn apply(&self, x: &Vector6<f64>, u: &Vector6<f64>) -> Vector6<f64> {
        self.a * x + self.b * u + self.d
    }
}

/// Condensed prediction `X = A' x_k + B' U + D'` with
/// `X = [x_{k+1}; …; x_{k+n_p}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionBundle {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub d: DVector<f64>,
    pub horizon: usize,
    pub period: f64,
}

impl PredictionBundle {
    pub fn predict(&self, x0: &Vector6<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x0 + &self.b * u + &self.d
    }

    /// `A' x_k + D'`, the free response of the horizon.
    pub fn free_response(&self, x0: &Vector6<f64>) -> DVector<f64> {
        &self.a * x0 + &self.d
    }
}

/// World position of the pivot vertex.
pub fn pivot(state: &ObjectState) -> Result<Vector3<f64>> {
    match state.support.pivot {
        Some(p) if state.support.phase.is_single() => Ok(p),
        _ => Err(Error::NoPivot),
    }
}

pub fn com_world(model: &ObjectModel, state: &ObjectState) -> Vector3<f64> {
    state.pose().transform_point(&model.com_body)
}

pub fn grasp_world(model: &ObjectModel, state: &ObjectState) -> [Vector3<f64>; 2] {
    let pose = state.pose();
    model.grasp_points.map(|g| pose.transform_point(&g))
}

/// World-frame inertia about a point at `-r_com` from the CoG.
pub fn pivot_inertia(model: &ObjectModel, rot: &Matrix3<f64>, r_com: &Vector3<f64>) -> Matrix3<f64> {
    rot * model.inertia * rot.transpose()
        + (Matrix3::identity() * r_com.norm_squared() - r_com * r_com.transpose()) * model.mass
}

/// Torque of gravity about the pivot, world frame.
pub fn gravity_torque(model: &ObjectModel, state: &ObjectState) -> Result<Vector3<f64>> {
    let p0 = pivot(state)?;
    let r_com = com_world(model, state) - p0;
    Ok(r_com.cross(&(model.gravity * model.mass)))
}

/// Body-frame angular acceleration under the given hand forces.
pub fn angular_acceleration(
    model: &ObjectModel,
    state: &ObjectState,
    forces: &HandForces,
) -> Result<Vector3<f64>> {
    angular_acceleration_with(model, state, forces, &Vector3::zeros())
}

/// As [`angular_acceleration`], plus an extra world-frame torque about the
/// pivot.
pub fn angular_acceleration_with(
    model: &ObjectModel,
    state: &ObjectState,
    forces: &HandForces,
    extra_torque: &Vector3<f64>,
) -> Result<Vector3<f64>> {
    let p0 = pivot(state)?;
    let rot = state.angles.rotation();
    let r_com = com_world(model, state) - p0;
    let grasps = grasp_world(model, state);
    let mut torque = r_com.cross(&(model.gravity * model.mass)) + extra_torque;
    for (p, f) in grasps.iter().zip(forces) {
        torque += (p - p0).cross(f);
    }
    let inertia = pivot_inertia(model, &rot, &r_com);
    let omega_w = rot * state.omega;
    let rhs = torque - omega_w.cross(&(inertia * omega_w));
    let omega_dot_w = inertia
        .cholesky()
        .ok_or(Error::InvalidParams("pivot inertia is not positive definite".into()))?
        .solve(&rhs);
    Ok(rot.transpose() * omega_dot_w)
}

/// Advances the plant by `dt` with semi-implicit Euler (ω first, then Ψ),
/// keeping the pivot vertex fixed in the world.
pub fn step_nonlinear(
    model: &ObjectModel,
    state: &ObjectState,
    forces: &HandForces,
    dt: f64,
) -> Result<ObjectState> {
    step_nonlinear_with(model, state, forces, &Vector3::zeros(), dt)
}

/// As [`step_nonlinear`], with an extra world-frame torque about the pivot.
pub fn step_nonlinear_with(
    model: &ObjectModel,
    state: &ObjectState,
    forces: &HandForces,
    extra_torque: &Vector3<f64>,
    dt: f64,
) -> Result<ObjectState> {
    if !(dt > 0.0) {
        return Err(Error::NonPositiveInput("dt"));
    }
    let p0 = pivot(state)?;
    let label = state.support.phase.pivot_label().ok_or(Error::NoPivot)?;
    let omega_dot = angular_acceleration_with(model, state, forces, extra_torque)?;
    let mut next = *state;
    next.omega = state.omega + omega_dot * dt;
    let w = euler_rate_matrix(state.angles, DEFAULT_SINGULARITY_BAND)?;
    let psi = state.angles.to_vector() + w * next.omega * dt;
    next.angles = EulerAngles::from_vector(&psi);
    next.anchor(&model.vertex(label), &p0);
    Ok(next)
}

/// Linear one-step model frozen at `state`.
///
/// ```text
/// A = [I  T·W; 0  I]
/// B = [½T² W M [r_1×]  ½T² W M [r_2×];  T M [r_1×]  T M [r_2×]]
/// D = [½T² W M τ_0;  T M τ_0]
/// ```
///
/// with `M = Rᵀ I_w⁻¹` and `τ_0 = r_com × m g − ω_w × I_w ω_w` (the
/// gyroscopic term frozen at the linearization state).
pub fn linearize(
    model: &ObjectModel,
    state: &ObjectState,
    grasps: &[Vector3<f64>; 2],
    period: f64,
) -> Result<StepMatrices> {
    if !(period > 0.0) {
        return Err(Error::NonPositiveInput("period"));
    }
    let p0 = pivot(state)?;
    let w = euler_rate_matrix(state.angles, DEFAULT_SINGULARITY_BAND)?;
    let rot = state.angles.rotation();
    let r_com = com_world(model, state) - p0;
    let inertia = pivot_inertia(model, &rot, &r_com);
    let inv = inertia
        .try_inverse()
        .ok_or(Error::InvalidParams("pivot inertia is singular".into()))?;
    let m = rot.transpose() * inv;
    let omega_w = rot * state.omega;
    let tau0 = r_com.cross(&(model.gravity * model.mass)) - omega_w.cross(&(inertia * omega_w));

    let t = period;
    let half_t2 = 0.5 * t * t;
    let mut a = Matrix6::identity();
    a.fixed_view_mut::<3, 3>(0, 3).copy_from(&(w * t));

    let mut b = Matrix6::zeros();
    for (i, g) in grasps.iter().enumerate() {
        let lever = m * skew(&(g - p0));
        b.fixed_view_mut::<3, 3>(0, 3 * i)
            .copy_from(&(w * lever * half_t2));
        b.fixed_view_mut::<3, 3>(3, 3 * i).copy_from(&(lever * t));
    }
    let acc = m * tau0;
    let top = w * acc * half_t2;
    let bottom = acc * t;
    let d = Vector6::new(top.x, top.y, top.z, bottom.x, bottom.y, bottom.z);
    Ok(StepMatrices { a, b, d, period })
}

/// Stacks the one-step model over `horizon` steps.
pub fn stack_prediction(step: &StepMatrices, horizon: usize) -> Result<PredictionBundle> {
    if horizon == 0 {
        return Err(Error::NonPositiveInput("horizon"));
    }
    let n = 6 * horizon;
    // powers[j] = A^j
    let mut powers = alloc::vec::Vec::with_capacity(horizon + 1);
    powers.push(Matrix6::<f64>::identity());
    for j in 1..=horizon {
        let next = powers[j - 1] * step.a;
        powers.push(next);
    }
    let mut a = DMatrix::zeros(n, 6);
    let mut b = DMatrix::zeros(n, n);
    let mut d = DVector::zeros(n);
    let mut acc = Vector6::zeros();
    for i in 0..horizon {
        a.fixed_view_mut::<6, 6>(6 * i, 0).copy_from(&powers[i + 1]);
        for j in 0..=i {
            b.fixed_view_mut::<6, 6>(6 * i, 6 * j)
                .copy_from(&(powers[i - j] * step.b));
        }
        acc += powers[i] * step.d;
        d.fixed_rows_mut::<6>(6 * i).copy_from(&acc);
    }
    Ok(PredictionBundle {
        a,
        b,
        d,
        horizon,
        period: step.period,
    })
}
