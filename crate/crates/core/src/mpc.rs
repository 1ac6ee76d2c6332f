//! Tracking MPC: builds the condensed QP from the prediction model, the
//! reference and the friction pyramids, and turns its solution into force
//! and end-effector velocity references.
//!
//! Decision variables are the world-frame hand forces over the horizon,
//! `U = [f_1; f_2; f_1; f_2; …]`. With `c = A' x_k + D' − X_ref`,
//!
//! ```text
//! J = α/2 ‖B'U + c‖²_W + β/2 ‖U‖² = ½ Uᵀ Q U + rᵀ U + s
//! Q = α B'ᵀW B' + β I,   r = α B'ᵀW c,   s = α/2 cᵀW c
//! ```
//!
//! `W` is diagonal: 1 on the angle rows and `(κT)²` on the rate rows, so a
//! rate error counts as the angle it would build up over κ periods
//! (`rate_periods`).

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Matrix3, Matrix3x6, Matrix6, Vector3, Vector6};

use crate::dynamics::{grasp_world, linearize, pivot, stack_prediction, HandForces, PredictionBundle};
use crate::error::{Error, Result};
use crate::geom::{skew, velocity_transform, EulerAngles};
use crate::model::{ObjectModel, ObjectState};
use crate::qp::{QpProblem, QpSolution, QpSolver, QpStatus};

/// Rows per hand in the friction pyramid: four facet rows plus the normal
/// bound.
pub const ROWS_PER_HAND: usize = 5;

/// Relative cut-off below which singular values count as zero.
pub const PINV_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct MpcConfig {
    /// Weight on the state error.
    pub alpha: f64,
    /// Weight on the input.
    pub beta: f64,
    pub horizon: usize,
    /// Sampling time (s).
    pub period: f64,
    /// Null-space preference for the hand twist.
    pub k_v: [f64; 6],
    /// Upper bound on each normal force (N).
    pub f_n_max: f64,
    pub mu: f64,
    /// Periods over which a rate error is weighed as the angle error it
    /// accumulates.
    pub rate_periods: f64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0e4,
            beta: 0.1,
            horizon: 10,
            period: 0.02,
            k_v: [0.0; 6],
            f_n_max: 50.0,
            mu: 0.5,
            rate_periods: 5.0,
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.alpha > 0.0, "alpha"),
            (self.beta > 0.0, "beta"),
            (self.horizon >= 1, "horizon"),
            (self.period > 0.0, "period"),
            (self.f_n_max > 0.0, "f_n_max"),
            (self.mu > 0.0, "mu"),
            (self.rate_periods > 0.0, "rate_periods"),
        ];
        for (ok, name) in checks {
            if !ok {
                return Err(Error::NonPositiveInput(name));
            }
        }
        if self.k_v.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("k_v must be finite".into()));
        }
        Ok(())
    }

    /// Weight of the rate rows, `(κT)²`.
    pub fn rate_weight(&self) -> f64 {
        let kt = self.rate_periods * self.period;
        kt * kt
    }

    pub fn k_v(&self) -> Vector6<f64> {
        Vector6::from_column_slice(&self.k_v)
    }
}

/// Linearized friction pyramids of the two hand contacts.
#[derive(Debug, Clone, PartialEq)]
pub struct FrictionModel {
    /// Contact frames; columns are the `n`, `t`, `o` axes in the world.
    pub frames: [Matrix3<f64>; 2],
    pub mu: f64,
    pub f_n_max: f64,
}

impl FrictionModel {
    /// Frames for hands on the two long side faces: `n` points into the box,
    /// `t` along the body `z` axis.
    pub fn for_pose(angles: EulerAngles, mu: f64, f_n_max: f64) -> Self {
        let rot = angles.rotation();
        let t = rot.column(2).into_owned();
        let n1 = rot.column(1).into_owned();
        let frame = |n: Vector3<f64>| Matrix3::from_columns(&[n, t, n.cross(&t)]);
        Self {
            frames: [frame(n1), frame(-n1)],
            mu,
            f_n_max,
        }
    }

    /// `(f^n, f^t, f^o)` of hand `i`.
    pub fn to_contact(&self, hand: usize, f: &Vector3<f64>) -> Vector3<f64> {
        self.frames[hand].transpose() * f
    }

    /// Worst violation (N) of the three friction inequalities, evaluated
    /// directly in contact coordinates. Zero inside the pyramid.
    pub fn violation(&self, hand: usize, f: &Vector3<f64>) -> f64 {
        let c = self.to_contact(hand, f);
        let (n, t, o) = (c.x, c.y, c.z);
        [
            t.abs() - self.mu * n,
            o.abs() - self.mu * n,
            -n,
            n - self.f_n_max,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn contains(&self, hand: usize, f: &Vector3<f64>, tol: f64) -> bool {
        self.violation(hand, f) <= tol
    }

    /// Clips a force into the pyramid: the normal part into `[0, f_n_max]`,
    /// then each tangential part into `±μ f^n`.
    pub fn clip(&self, hand: usize, f: &Vector3<f64>) -> Vector3<f64> {
        let c = self.to_contact(hand, f);
        let n = c.x.clamp(0.0, self.f_n_max);
        let lim = self.mu * n;
        let clipped = Vector3::new(n, c.y.clamp(-lim, lim), c.z.clamp(-lim, lim));
        self.frames[hand] * clipped
    }
}

/// Stacked two-sided friction rows `lower ≤ G U ≤ upper` over the horizon.
pub fn friction_constraints(fm: &FrictionModel, horizon: usize) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
    let rows = 2 * ROWS_PER_HAND;
    let mut g = DMatrix::zeros(rows * horizon, 6 * horizon);
    let lower = DVector::zeros(rows * horizon);
    let mut upper = DVector::zeros(rows * horizon);
    let mu = fm.mu;
    // pyramid rows in contact coordinates (n, t, o)
    let facets = Matrix3::new(mu, -1.0, 0.0, mu, 1.0, 0.0, mu, 0.0, -1.0);
    let last = Vector3::new(mu, 0.0, 1.0);
    let mut block = nalgebra::SMatrix::<f64, 5, 3>::zeros();
    block.fixed_view_mut::<3, 3>(0, 0).copy_from(&facets);
    block.fixed_view_mut::<1, 3>(3, 0).copy_from(&last.transpose());
    block[(4, 0)] = 1.0;
    let mut hi = [2.0 * mu * fm.f_n_max; 5];
    hi[4] = fm.f_n_max;
    for hand in 0..2 {
        let h = block * fm.frames[hand].transpose();
        for k in 0..horizon {
            let r0 = k * rows + hand * ROWS_PER_HAND;
            g.fixed_view_mut::<5, 3>(r0, 6 * k + 3 * hand).copy_from(&h);
            for j in 0..ROWS_PER_HAND {
                upper[r0 + j] = hi[j];
            }
        }
    }
    (g, lower, upper)
}

/// Rigid map `M_i` with `ṗ_i = M_i ω`, `ω` in the body frame, for a point at
/// body offset `point_body` while the pivot stays fixed.
pub fn contact_velocity_map(state: &ObjectState, point_body: &Vector3<f64>) -> Result<Matrix3<f64>> {
    let p0 = pivot(state)?;
    let rot = state.angles.rotation();
    let pivot_body = rot.transpose() * (p0 - state.position);
    let d_b = velocity_transform(&rot, point_body);
    let mut lift = nalgebra::SMatrix::<f64, 6, 3>::zeros();
    lift.fixed_view_mut::<3, 3>(0, 0).copy_from(&skew(&(rot * pivot_body)));
    lift.fixed_view_mut::<3, 3>(3, 0).copy_from(&Matrix3::identity());
    let s_d = d_b.fixed_view::<3, 6>(0, 0).into_owned();
    Ok(s_d * lift * rot)
}

/// Contact point velocity of grasp `hand` and its map from body `ω`.
pub fn contact_point_velocity(
    model: &ObjectModel,
    state: &ObjectState,
    hand: usize,
) -> Result<(Vector3<f64>, Matrix3<f64>)> {
    let m = contact_velocity_map(state, &model.grasp_points[hand])?;
    Ok((m * state.omega, m))
}

/// Minimum-norm hand twist `[ṗ_H; ω_H]` whose contact point moves with
/// `p_dot`, plus the projection of `k_v` onto the null space of `S D_H`.
pub fn eef_velocity(p_dot: &Vector3<f64>, d_h: &Matrix6<f64>, k_v: &Vector6<f64>) -> Result<Vector6<f64>> {
    let sd: Matrix3x6<f64> = d_h.fixed_view::<3, 6>(0, 0).into_owned();
    let pinv = pseudo_inverse(&sd)?;
    let null = Matrix6::identity() - pinv * sd;
    Ok(pinv * p_dot + null * k_v)
}

fn pseudo_inverse(sd: &Matrix3x6<f64>) -> Result<nalgebra::Matrix6x3<f64>> {
    let svd = sd.svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) || svd.singular_values.min() <= PINV_TOLERANCE * smax {
        return Err(Error::RankDeficient);
    }
    svd.pseudo_inverse(PINV_TOLERANCE * smax)
        .map_err(|_| Error::RankDeficient)
}

/// Constant output blocks frozen at the linearization state: contact maps
/// from body `ω` and the hand velocity transforms.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputMap {
    pub contact: [Matrix3<f64>; 2],
    pub hand: [Matrix6<f64>; 2],
}

/// Spherical hands touching the box: constant hand orientation and the
/// offset from the hand frame to its contact point.
#[derive(Debug, Clone, PartialEq)]
pub struct HandGeometry {
    pub rotation: [Matrix3<f64>; 2],
    pub contact_offset: [Vector3<f64>; 2],
}

impl HandGeometry {
    /// Hands of radius `radius` pressing on the side faces of a box in
    /// pose `angles`; hand frames aligned with the world.
    pub fn spherical(angles: EulerAngles, radius: f64) -> Self {
        let n1 = angles.rotation().column(1).into_owned();
        Self {
            rotation: [Matrix3::identity(); 2],
            contact_offset: [n1 * radius, -n1 * radius],
        }
    }

    pub fn transforms(&self) -> [Matrix6<f64>; 2] {
        [0, 1].map(|i| velocity_transform(&self.rotation[i], &self.contact_offset[i]))
    }
}

impl OutputMap {
    pub fn new(model: &ObjectModel, state: &ObjectState, hands: &HandGeometry) -> Result<Self> {
        Ok(Self {
            contact: [
                contact_velocity_map(state, &model.grasp_points[0])?,
                contact_velocity_map(state, &model.grasp_points[1])?,
            ],
            hand: hands.transforms(),
        })
    }
}

/// Result of one MPC step. Only the first input block is meant to be
/// applied.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    pub f_ref: HandForces,
    /// Contact point velocity references of the two hands.
    pub contact_velocity_ref: [Vector3<f64>; 2],
    /// Hand twists `[ṗ_H; ω_H]` reproducing those contact velocities.
    pub eef_velocity_ref: [Vector6<f64>; 2],
    pub predicted_states: Vec<Vector6<f64>>,
    /// `½ U*ᵀ Q U* + rᵀ U* + s`.
    pub cost: f64,
    pub qp_status: QpStatus,
    pub qp_iterations: usize,
    pub kkt_residual: f64,
    pub inputs: DVector<f64>,
}

/// Builds the tracking QP. `x_ref` stacks `n_p` reference states.
pub fn assemble(
    x_k: &Vector6<f64>,
    x_ref: &DVector<f64>,
    bundle: &PredictionBundle,
    config: &MpcConfig,
    fm: &FrictionModel,
) -> Result<QpProblem> {
    let n = 6 * bundle.horizon;
    if x_ref.len() != n {
        return Err(Error::InvalidProblem(alloc::format!(
            "reference has {} entries, expected {}",
            x_ref.len(),
            n
        )));
    }
    let c = bundle.free_response(x_k) - x_ref;
    let w = DVector::from_fn(n, |i, _| if i % 6 < 3 { 1.0 } else { config.rate_weight() });
    let wb = DMatrix::from_fn(n, n, |i, j| w[i] * bundle.b[(i, j)]);
    let wc = c.component_mul(&w);
    let bt = bundle.b.transpose();
    let mut q = &bt * &wb * config.alpha;
    for i in 0..n {
        q[(i, i)] += config.beta;
    }
    // exact symmetry for the factorization
    let q = (&q + q.transpose()) * 0.5;
    let r = &bt * &wc * config.alpha;
    let s = 0.5 * config.alpha * c.dot(&wc);
    let (g, lower, upper) = friction_constraints(fm, bundle.horizon);
    Ok(QpProblem {
        q,
        r,
        s,
        g,
        lower,
        upper,
    })
}

/// Assembles and solves the QP, then extracts `u_k` and `y_k`.
pub fn assemble_and_solve(
    x_k: &Vector6<f64>,
    x_ref: &DVector<f64>,
    bundle: &PredictionBundle,
    output: &OutputMap,
    config: &MpcConfig,
    fm: &FrictionModel,
    solver: &mut QpSolver,
) -> Result<ControlOutput> {
    let problem = assemble(x_k, x_ref, bundle, config, fm)?;
    let sol = solver.solve_warm(&problem)?;
    match sol.status {
        QpStatus::Infeasible => return Err(Error::Infeasible),
        QpStatus::MaxIterations => return Err(Error::MaxIterations),
        _ => {}
    }
    extract(x_k, bundle, output, config, &problem, sol)
}

fn extract(
    x_k: &Vector6<f64>,
    bundle: &PredictionBundle,
    output: &OutputMap,
    config: &MpcConfig,
    problem: &QpProblem,
    sol: QpSolution,
) -> Result<ControlOutput> {
    let u = &sol.u_star;
    let f_ref = [
        Vector3::new(u[0], u[1], u[2]),
        Vector3::new(u[3], u[4], u[5]),
    ];
    let xs = bundle.predict(x_k, u);
    let predicted_states: Vec<Vector6<f64>> = (0..bundle.horizon)
        .map(|i| xs.fixed_rows::<6>(6 * i).into_owned())
        .collect();
    let omega_next = predicted_states[0].fixed_rows::<3>(3).into_owned();
    let k_v = config.k_v();
    let contact_velocity_ref = [0, 1].map(|i| output.contact[i] * omega_next);
    let eef_velocity_ref = [
        eef_velocity(&contact_velocity_ref[0], &output.hand[0], &k_v)?,
        eef_velocity(&contact_velocity_ref[1], &output.hand[1], &k_v)?,
    ];
    Ok(ControlOutput {
        f_ref,
        contact_velocity_ref,
        eef_velocity_ref,
        predicted_states,
        cost: sol.objective + problem.s,
        qp_status: sol.status,
        qp_iterations: sol.iterations,
        kkt_residual: sol.kkt_residual,
        inputs: sol.u_star,
    })
}

/// Receding-horizon controller: linearizes at the current state, solves,
/// and keeps the QP working set for the next call.
#[derive(Debug, Clone)]
pub struct Controller {
    pub config: MpcConfig,
    pub hands: HandGeometry,
    solver: QpSolver,
}

impl Controller {
    pub fn new(config: MpcConfig, hands: HandGeometry) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            hands,
            solver: QpSolver::default(),
        })
    }

    pub fn reset(&mut self) {
        self.solver.reset();
    }

    /// One control step. `state` must be in single support (its pivot is
    /// the rotation center of the prediction model).
    pub fn step(
        &mut self,
        model: &ObjectModel,
        state: &ObjectState,
        x_ref: &DVector<f64>,
    ) -> Result<ControlOutput> {
        let grasps = grasp_world(model, state);
        let step = linearize(model, state, &grasps, self.config.period)?;
        let bundle = stack_prediction(&step, self.config.horizon)?;
        let fm = FrictionModel::for_pose(state.angles, self.config.mu, self.config.f_n_max);
        let output = OutputMap::new(model, state, &self.hands)?;
        assemble_and_solve(&state.x(), x_ref, &bundle, &output, &self.config, &fm, &mut self.solver)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::linearize;
    use crate::model::{Phase, SupportState, VertexLabel};

    fn model() -> ObjectModel {
        ObjectModel::homogeneous_box(Vector3::new(0.6, 0.4, 0.2), 1.4).unwrap()
    }

    fn lifted(m: &ObjectModel, angles: EulerAngles, omega: Vector3<f64>) -> ObjectState {
        let p0 = Vector3::new(0.0, -0.2, 0.0);
        let mut s = ObjectState {
            angles,
            omega,
            position: Vector3::zeros(),
            support: SupportState::single(Phase::SsRight, p0),
        };
        s.anchor(&m.vertex(VertexLabel::RearRight), &p0);
        s
    }

    fn fm() -> FrictionModel {
        FrictionModel::for_pose(EulerAngles::default(), 0.5, 50.0)
    }

    #[test]
    fn frames_are_rotations_with_inward_normals() {
        let a = EulerAngles::new(0.2, -0.1, 0.4);
        let f = FrictionModel::for_pose(a, 0.5, 50.0);
        for fr in &f.frames {
            assert!((fr.transpose() * fr - Matrix3::identity()).abs().max() < 1e-12);
            assert!((fr.determinant() - 1.0).abs() < 1e-12);
        }
        // hand 1 sits on the -y face and pushes towards +y
        let n1 = f.frames[0].column(0).into_owned();
        assert!((n1 - a.rotation().column(1)).norm() < 1e-15);
    }

    #[test]
    fn interior_force_satisfies_rows() {
        let f = fm();
        let force = f.frames[0] * Vector3::new(25.0, 0.0, 0.0);
        assert!(f.contains(0, &force, 0.0));
        let (g, lo, hi) = friction_constraints(&f, 1);
        let mut u = DVector::zeros(6);
        u.fixed_rows_mut::<3>(0).copy_from(&force);
        u.fixed_rows_mut::<3>(3).copy_from(&(f.frames[1] * Vector3::new(25.0, 0.0, 0.0)));
        let gu = &g * &u;
        for i in 0..gu.len() {
            assert!(gu[i] >= lo[i] && gu[i] <= hi[i]);
        }
    }

    #[test]
    fn tangential_overload_is_rejected() {
        let f = fm();
        let force = f.frames[0] * Vector3::new(10.0, 6.0, 0.0);
        assert!(!f.contains(0, &force, 1e-9));
        let (g, lo, hi) = friction_constraints(&f, 1);
        let mut u = DVector::zeros(6);
        u.fixed_rows_mut::<3>(0).copy_from(&force);
        let gu = &g * &u;
        assert!((0..5).any(|i| gu[i] < lo[i] - 1e-9 || gu[i] > hi[i] + 1e-9));
    }

    #[test]
    fn clip_lands_in_pyramid() {
        let f = fm();
        for v in [
            Vector3::new(1.0, 40.0, -3.0),
            Vector3::new(-5.0, 2.0, 2.0),
            Vector3::new(0.0, 80.0, 0.0),
        ] {
            for hand in 0..2 {
                let c = f.clip(hand, &v);
                assert!(f.violation(hand, &c) <= 1e-12);
            }
        }
    }

    #[test]
    fn contact_map_matches_cross_product() {
        let m = model();
        let s = lifted(&m, EulerAngles::new(0.2, -0.15, 0.3), Vector3::new(0.3, -0.7, 0.5));
        let (v, _) = contact_point_velocity(&m, &s, 0).unwrap();
        let p = grasp_world(&m, &s)[0];
        let w = s.angles.rotation() * s.omega;
        let expected = w.cross(&(p - s.support.pivot.unwrap()));
        assert!((v - expected).norm() < 1e-12);
    }

    #[test]
    fn zero_rate_gives_zero_contact_velocity() {
        let m = model();
        let s = lifted(&m, EulerAngles::new(0.2, -0.15, 0.3), Vector3::zeros());
        assert_eq!(contact_point_velocity(&m, &s, 1).unwrap().0, Vector3::zeros());
    }

    #[test]
    fn eef_velocity_reproduces_contact_velocity() {
        let hands = HandGeometry::spherical(EulerAngles::new(0.1, 0.0, 0.3), 0.05);
        let d = hands.transforms()[0];
        let pd = Vector3::new(0.1, -0.3, 0.2);
        let kv = Vector6::new(0.0, 0.2, 0.0, 1.0, -0.5, 0.3);
        let v = eef_velocity(&pd, &d, &kv).unwrap();
        let back = d.fixed_view::<3, 6>(0, 0) * v;
        assert!((back - pd).norm() < 1e-10);
        assert_eq!(eef_velocity(&Vector3::zeros(), &d, &Vector6::zeros()).unwrap(), Vector6::zeros());
    }

    #[test]
    fn zero_reference_error_gives_zero_input() {
        // With ω = 0 and a reference equal to the free response, U = 0 is
        // optimal.
        let m = model();
        let s = lifted(&m, EulerAngles::new(0.2, -0.15, 0.0), Vector3::zeros());
        let grasps = grasp_world(&m, &s);
        let step = linearize(&m, &s, &grasps, 0.02).unwrap();
        let bundle = stack_prediction(&step, 4).unwrap();
        let x_ref = bundle.free_response(&s.x());
        let cfg = MpcConfig {
            horizon: 4,
            ..MpcConfig::default()
        };
        let fm = FrictionModel::for_pose(s.angles, cfg.mu, cfg.f_n_max);
        let hands = HandGeometry::spherical(s.angles, 0.05);
        let out = OutputMap::new(&m, &s, &hands).unwrap();
        let mut solver = QpSolver::default();
        let c = assemble_and_solve(&s.x(), &x_ref, &bundle, &out, &cfg, &fm, &mut solver).unwrap();
        assert!(c.inputs.amax() < 1e-8);
        assert!(c.cost.abs() < 1e-10);
    }

    #[test]
    fn first_prediction_is_one_step_model() {
        let m = model();
        let s = lifted(&m, EulerAngles::new(0.25, -0.1, 0.1), Vector3::new(0.1, 0.2, 0.0));
        let cfg = MpcConfig::default();
        let mut ctl = Controller::new(cfg.clone(), HandGeometry::spherical(s.angles, 0.05)).unwrap();
        let x_ref = DVector::from_fn(6 * cfg.horizon, |i, _| if i % 6 == 0 { 0.3 } else { 0.0 });
        let out = ctl.step(&m, &s, &x_ref).unwrap();
        let step = linearize(&m, &s, &grasp_world(&m, &s), cfg.period).unwrap();
        let mut u0 = Vector6::zeros();
        u0.fixed_rows_mut::<3>(0).copy_from(&out.f_ref[0]);
        u0.fixed_rows_mut::<3>(3).copy_from(&out.f_ref[1]);
        let x1 = step.apply(&s.x(), &u0);
        assert!((x1 - out.predicted_states[0]).amax() < 1e-12);
        let fm = FrictionModel::for_pose(s.angles, cfg.mu, cfg.f_n_max);
        for i in 0..2 {
            assert!(fm.violation(i, &out.f_ref[i]) <= 1e-6);
        }
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = MpcConfig {
            beta: 0.0,
            ..MpcConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
