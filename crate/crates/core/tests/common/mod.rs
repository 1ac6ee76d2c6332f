//! Independent reference computations shared by the integration tests.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Matrix3, Vector3, Vector6};
use pivgait_core::dynamics::{grasp_world, linearize};
use pivgait_core::geom::EulerAngles;
use pivgait_core::model::{ObjectModel, ObjectState, Phase, SupportState};
use rand::Rng;

/// Rigid box rotating about a fixed bottom vertex, written in the body frame
/// where the inertia about the pivot is constant:
/// `J ω̇ = Rᵀτ − ω × Jω`, `Ṙ = R[ω×]`.
pub struct PivotBody {
    pub mass: f64,
    pub dims: Vector3<f64>,
    /// Pivot vertex, body frame.
    pub pivot: Vector3<f64>,
    /// Hand contact points, body frame.
    pub hands: [Vector3<f64>; 2],
    pub g: f64,
}

impl PivotBody {
    pub fn homogeneous(dims: Vector3<f64>, mass: f64, pivot: Vector3<f64>) -> Self {
        let h = dims / 2.0;
        Self {
            mass,
            dims,
            pivot,
            hands: [Vector3::new(0.0, -h.y, 0.0), Vector3::new(0.0, h.y, 0.0)],
            g: 9.81,
        }
    }

    /// Inertia about the pivot in body axes.
    pub fn inertia(&self) -> Matrix3<f64> {
        let [a, b, c] = [self.dims.x, self.dims.y, self.dims.z];
        let k = self.mass / 12.0;
        let centre = Matrix3::from_diagonal(&Vector3::new(k * (b * b + c * c), k * (a * a + c * c), k * (a * a + b * b)));
        let d = -self.pivot;
        centre + (Matrix3::identity() * d.norm_squared() - d * d.transpose()) * self.mass
    }

    fn omega_dot(&self, r: &Matrix3<f64>, w: &Vector3<f64>, forces: &[Vector3<f64>; 2]) -> Vector3<f64> {
        let j = self.inertia();
        let gravity = Vector3::new(0.0, 0.0, -self.g * self.mass);
        let mut tau = (-self.pivot).cross(&(r.transpose() * gravity));
        for (p, f) in self.hands.iter().zip(forces) {
            tau += (p - self.pivot).cross(&(r.transpose() * f));
        }
        j.lu().solve(&(tau - w.cross(&(j * w)))).unwrap()
    }

    /// Classical RK4 over `dt` in `n` substeps with world forces held fixed.
    pub fn integrate(&self, r: Matrix3<f64>, w: Vector3<f64>, forces: &[Vector3<f64>; 2], dt: f64, n: usize) -> (Matrix3<f64>, Vector3<f64>) {
        let h = dt / n as f64;
        let (mut r, mut w) = (r, w);
        let f = |r: &Matrix3<f64>, w: &Vector3<f64>| (r * hat(w), self.omega_dot(r, w, forces));
        for _ in 0..n {
            let (k1r, k1w) = f(&r, &w);
            let (k2r, k2w) = f(&(r + k1r * (h / 2.0)), &(w + k1w * (h / 2.0)));
            let (k3r, k3w) = f(&(r + k2r * (h / 2.0)), &(w + k2w * (h / 2.0)));
            let (k4r, k4w) = f(&(r + k3r * h), &(w + k3w * h));
            r += (k1r + k2r * 2.0 + k3r * 2.0 + k4r) * (h / 6.0);
            w += (k1w + k2w * 2.0 + k3w * 2.0 + k4w) * (h / 6.0);
            // re-orthonormalize
            let svd = r.svd(true, true);
            r = svd.u.unwrap() * svd.v_t.unwrap();
        }
        (r, w)
    }
}

pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// `Rz(yaw) Ry(pitch) Rx(roll)` from elementary rotations.
pub fn zyx(roll: f64, pitch: f64, yaw: f64) -> Matrix3<f64> {
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sy, cy) = yaw.sin_cos();
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cr, -sr, 0.0, sr, cr);
    let ry = Matrix3::new(cp, 0.0, sp, 0.0, 1.0, 0.0, -sp, 0.0, cp);
    let rz = Matrix3::new(cy, -sy, 0.0, sy, cy, 0.0, 0.0, 0.0, 1.0);
    rz * ry * rx
}

/// Inverse of [`zyx`] away from pitch = ±π/2.
pub fn zyx_angles(r: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(r[(2, 1)].atan2(r[(2, 2)]), (-r[(2, 0)]).asin(), r[(1, 0)].atan2(r[(0, 0)]))
}

pub struct Instance {
    pub q: DMatrix<f64>,
    pub r: DVector<f64>,
    pub g: DMatrix<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

/// Strictly convex instance, feasible by construction around a random point.
/// About a fifth of the rows are one-sided.
pub fn feasible_instance<R: Rng>(rng: &mut R, n: usize, m: usize) -> Instance {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let q = a.transpose() * &a + DMatrix::identity(n, n) * rng.random_range(0.05..1.0);
    let r = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
    let g = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
    let u0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let gu0 = &g * &u0;
    let mut lower = DVector::zeros(m);
    let mut upper = DVector::zeros(m);
    for i in 0..m {
        lower[i] = gu0[i] - rng.random_range(0.0..1.0);
        upper[i] = gu0[i] + rng.random_range(0.0..1.0);
        match rng.random_range(0..10) {
            0 => lower[i] = f64::NEG_INFINITY,
            1 => upper[i] = f64::INFINITY,
            _ => {}
        }
    }
    Instance { q, r, g, lower, upper }
}

pub struct DualResult {
    pub u: DVector<f64>,
    pub primal: f64,
    pub dual: f64,
    pub violation: f64,
    pub iterations: usize,
}

/// Accelerated projected gradient (FISTA with gradient restart) on the
/// dual, whose feasible set is the nonnegative orthant. Stops once the
/// primal point `u(λ)` is feasible to `tol` and the duality gap is below
/// `tol`.
pub fn dual_projected_gradient(p: &Instance, tol: f64, max_iter: usize) -> DualResult {
    let m = p.g.nrows();
    let qinv = p.q.clone().cholesky().unwrap().inverse();
    let gq = &p.g * &qinv;
    let lip = if m == 0 { 1.0 } else { 2.0 * (&gq * p.g.transpose()).symmetric_eigenvalues().max().max(1e-12) };
    let primal_of = |lu: &DVector<f64>, ll: &DVector<f64>| -> DVector<f64> {
        -(&qinv * (&p.r + p.g.transpose() * (lu - ll)))
    };
    let dual_of = |u: &DVector<f64>, lu: &DVector<f64>, ll: &DVector<f64>| -> f64 {
        let mut d = 0.5 * u.dot(&(&p.q * u)) + p.r.dot(u);
        let gu = &p.g * u;
        for i in 0..m {
            if lu[i] != 0.0 {
                d += lu[i] * (gu[i] - p.upper[i]);
            }
            if ll[i] != 0.0 {
                d += ll[i] * (p.lower[i] - gu[i]);
            }
        }
        d
    };
    let violation = |u: &DVector<f64>| {
        let gu = &p.g * u;
        (0..m).fold(0.0f64, |a, i| a.max(p.lower[i] - gu[i]).max(gu[i] - p.upper[i]))
    };
    let (mut lu, mut ll) = (DVector::zeros(m), DVector::zeros(m));
    let (mut yu, mut yl) = (lu.clone(), ll.clone());
    let mut t = 1.0f64;
    let mut it = 0;
    loop {
        let u = primal_of(&lu, &ll);
        let primal = 0.5 * u.dot(&(&p.q * &u)) + p.r.dot(&u);
        let dual = dual_of(&u, &lu, &ll);
        let viol = violation(&u);
        if (viol <= tol && (primal - dual).abs() <= tol) || it >= max_iter {
            return DualResult { u, primal, dual, violation: viol, iterations: it };
        }
        it += 1;
        let uy = primal_of(&yu, &yl);
        let guy = &p.g * &uy;
        let mut nu = DVector::zeros(m);
        let mut nl = DVector::zeros(m);
        for i in 0..m {
            if p.upper[i].is_finite() {
                nu[i] = (yu[i] + (guy[i] - p.upper[i]) / lip).max(0.0);
            }
            if p.lower[i].is_finite() {
                nl[i] = (yl[i] + (p.lower[i] - guy[i]) / lip).max(0.0);
            }
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        let (du, dl) = (&nu - &lu, &nl - &ll);
        // restart when the step runs against the ascent direction
        let ascent: f64 = (0..m).map(|i| (nu[i] - yu[i]) * du[i] + (nl[i] - yl[i]) * dl[i]).sum();
        if ascent < 0.0 {
            t = 1.0;
            yu = nu.clone();
            yl = nl.clone();
        } else {
            yu = &nu + du * beta;
            yl = &nl + dl * beta;
            t = t_next;
        }
        lu = nu;
        ll = nl;
    }
}

/// Single-support state with hand forces inside the friction cones.
pub struct PivotSample {
    pub state: ObjectState,
    pub forces: [Vector3<f64>; 2],
}

pub fn sample_pivot_state<R: Rng>(rng: &mut R, model: &ObjectModel) -> PivotSample {
    let phase = if rng.random_bool(0.5) { Phase::SsRight } else { Phase::SsLeft };
    let label = phase.pivot_label().unwrap();
    let angles = EulerAngles {
        roll: rng.random_range(-0.3..0.3),
        pitch: rng.random_range(-0.3..0.3),
        yaw: rng.random_range(-3.0..3.0),
    };
    let omega = Vector3::from_fn(|_, _| rng.random_range(-0.8..0.8));
    let p0 = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0);
    let mut state = ObjectState {
        angles,
        omega,
        position: Vector3::zeros(),
        support: SupportState::single(phase, p0),
    };
    state.anchor(&model.vertex(label), &p0);
    // inward normal pushes plus a tangential part inside the friction cone
    let rot = angles.rotation();
    let forces = [1.0, -1.0].map(|side: f64| {
        let fn_ = rng.random_range(2.0..25.0);
        let (t, o) = (rng.random_range(-0.5..0.5) * fn_, rng.random_range(-0.5..0.5) * fn_);
        rot * Vector3::new(t, side * fn_, o)
    });
    PivotSample { state, forces }
}

/// Norm of the linear one-step prediction error against the RK4 oracle.
pub fn one_step_error(model: &ObjectModel, s: &PivotSample, period: f64) -> f64 {
    let label = s.state.support.phase.pivot_label().unwrap();
    let oracle = PivotBody::homogeneous(model.dimensions, model.mass, model.vertex(label));
    let a = s.state.angles;
    let (r1, w1) = oracle.integrate(zyx(a.roll, a.pitch, a.yaw), s.state.omega, &s.forces, period, 200);
    let psi = zyx_angles(&r1);
    let truth = Vector6::new(psi.x, psi.y, psi.z, w1.x, w1.y, w1.z);

    let step = linearize(model, &s.state, &grasp_world(model, &s.state), period).unwrap();
    let u = Vector6::new(s.forces[0].x, s.forces[0].y, s.forces[0].z, s.forces[1].x, s.forces[1].y, s.forces[1].z);
    let mut diff = step.apply(&s.state.x(), &u) - truth;
    diff[2] = (diff[2] + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
    diff.norm()
}
