//! Dense strictly convex QP solver:
//!
//! ```text
//! minimize    ½ uᵀ Q u + rᵀ u
//! subject to  lower ≤ G u ≤ upper
//! ```
//!
//! Primal active-set method. A feasible start comes from the previous
//! working set when a warm start is requested, then from the unconstrained
//! minimizer or the origin when either is feasible, and otherwise from a
//! Phase-1 problem that minimizes the largest constraint violation. Each
//! iteration solves the equality-constrained subproblem on the working set through the Schur
//! complement `G_W Q⁻¹ G_Wᵀ = Y_Wᵀ Y_W` with `Y = L⁻¹ Gᵀ` and `Q = L Lᵀ`.
//! The factor of the Schur complement is updated as rows enter and leave.
//!
//! Rows are two-sided; infinite bounds are allowed. A row enters the working
//! set on one side only.

use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub q: DMatrix<f64>,
    pub r: DVector<f64>,
    /// Constant term. Not part of [`QpSolution::objective`].
    pub s: f64,
    pub g: DMatrix<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl QpProblem {
    /// Problem without constraints.
    pub fn unconstrained(q: DMatrix<f64>, r: DVector<f64>) -> Self {
        let n = r.len();
        Self {
            q,
            r,
            s: 0.0,
            g: DMatrix::zeros(0, n),
            lower: DVector::zeros(0),
            upper: DVector::zeros(0),
        }
    }

    pub fn dim(&self) -> usize {
        self.r.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.g.nrows()
    }

    /// `½ uᵀ Q u + rᵀ u`.
    pub fn objective(&self, u: &DVector<f64>) -> f64 {
        0.5 * u.dot(&(&self.q * u)) + self.r.dot(u)
    }

    /// Largest bound violation of `u`.
    pub fn violation(&self, u: &DVector<f64>) -> f64 {
        let gu = &self.g * u;
        (0..gu.len()).fold(0.0, |acc: f64, i| {
            acc.max(self.lower[i] - gu[i]).max(gu[i] - self.upper[i])
        })
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if self.q.nrows() != n || self.q.ncols() != n {
            return Err(Error::InvalidProblem("Q must be n×n".into()));
        }
        let m = self.g.nrows();
        if self.g.ncols() != n || self.lower.len() != m || self.upper.len() != m {
            return Err(Error::InvalidProblem("constraint dimensions disagree".into()));
        }
        let asym = (&self.q - self.q.transpose()).abs().max();
        if asym > 1e-10 * (1.0 + self.q.abs().max()) {
            return Err(Error::InvalidProblem("Q is not symmetric".into()));
        }
        for i in 0..m {
            if self.lower[i].is_nan() || self.upper[i].is_nan() || self.lower[i] > self.upper[i] {
                return Err(Error::InvalidProblem("lower bound exceeds upper bound".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    MaxIterations,
    Infeasible,
    /// The active set converged but the KKT certificate exceeds the
    /// tolerance (numerical trouble).
    Inaccurate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Side {
    Lower,
    Upper,
}

/// A row held at one of its bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ActiveBound {
    pub row: usize,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub u_star: DVector<f64>,
    /// `½ u*ᵀ Q u* + rᵀ u*` (without `s`).
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub status: QpStatus,
    pub lambda_lower: DVector<f64>,
    pub lambda_upper: DVector<f64>,
    pub working_set: Vec<ActiveBound>,
}

/// Solver with a reusable working set for warm starts. One solve at a time
/// per instance.
#[derive(Debug, Clone)]
pub struct QpSolver {
    pub tol: f64,
    /// `None` selects `50·(n+m)`.
    pub max_iter: Option<usize>,
    last_working_set: Vec<ActiveBound>,
}

impl Default for QpSolver {
    fn default() -> Self {
        Self::new(DEFAULT_TOLERANCE)
    }
}

impl QpSolver {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            max_iter: None,
            last_working_set: Vec::new(),
        }
    }

    pub fn reset(&mut self) {
        self.last_working_set.clear();
    }

    /// Solves from scratch.
    pub fn solve(&mut self, problem: &QpProblem) -> Result<QpSolution> {
        let sol = solve_inner(problem, self.tol, self.max_iter, None)?;
        self.last_working_set = sol.working_set.clone();
        Ok(sol)
    }

    /// Tries the working set of the previous solve as the starting active
    /// set; falls back to a cold start when that point is infeasible.
    pub fn solve_warm(&mut self, problem: &QpProblem) -> Result<QpSolution> {
        let hint = core::mem::take(&mut self.last_working_set);
        let sol = solve_inner(problem, self.tol, self.max_iter, Some(&hint))?;
        self.last_working_set = sol.working_set.clone();
        Ok(sol)
    }
}

/// One-shot solve.
pub fn solve(problem: &QpProblem, tol: f64, max_iter: usize) -> Result<QpSolution> {
    solve_inner(problem, tol, Some(max_iter), None)
}

fn solve_inner(
    problem: &QpProblem,
    tol: f64,
    max_iter: Option<usize>,
    hint: Option<&[ActiveBound]>,
) -> Result<QpSolution> {
    problem.validate()?;
    if !(tol > 0.0) {
        return Err(Error::NonPositiveInput("tol"));
    }
    let n = problem.dim();
    let m = problem.num_constraints();
    let max_iter = max_iter.unwrap_or(50 * (n + m)).max(1);
    let kernel = Kernel::new(&problem.q, &problem.g)
        .ok_or_else(|| Error::InvalidProblem("Q is not positive definite".into()))?;
    let rows = Rows::new(&problem.g, &problem.lower, &problem.upper);
    let feas_tol = tol * 1e-2;

    let mut iterations = 0;
    let mut start: Option<(DVector<f64>, Vec<ActiveBound>)> = None;

    if let Some(ws) = hint.filter(|ws| !ws.is_empty() && ws.iter().all(|b| b.row < m)) {
        if let Some(u) = equality_minimizer(&kernel, &problem.r, &rows, ws) {
            if rows.violation(&u) <= feas_tol {
                start = Some((u, ws.to_vec()));
            }
        }
    }
    if start.is_none() {
        let u = -kernel.chol.solve(&problem.r);
        let origin = DVector::zeros(n);
        if rows.violation(&u) <= feas_tol {
            start = Some((u, Vec::new()));
        } else if rows.violation(&origin) <= feas_tol {
            start = Some((origin, Vec::new()));
        } else {
            match phase_one(&rows, &u, tol, max_iter) {
                PhaseOne::Feasible(u, its) => {
                    iterations += its;
                    start = Some((u, Vec::new()));
                }
                PhaseOne::Infeasible(u, its) => {
                    return Ok(finish(problem, &rows, u, Vec::new(), None, iterations + its, QpStatus::Infeasible, tol));
                }
            }
        }
    }
    let (u0, ws0) = start.expect("start point");
    let run = active_set(&problem.q, &kernel, &problem.r, &rows, u0, ws0, max_iter);
    iterations += run.iterations;
    let status = if run.converged {
        QpStatus::Optimal
    } else {
        QpStatus::MaxIterations
    };
    Ok(finish(problem, &rows, run.u, run.working_set, run.nu, iterations, status, tol))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    problem: &QpProblem,
    rows: &Rows,
    u: DVector<f64>,
    working_set: Vec<ActiveBound>,
    nu: Option<DVector<f64>>,
    iterations: usize,
    status: QpStatus,
    tol: f64,
) -> QpSolution {
    let m = rows.len();
    let mut lambda_lower = DVector::zeros(m);
    let mut lambda_upper = DVector::zeros(m);
    if let Some(nu) = nu {
        for (k, b) in working_set.iter().enumerate() {
            match b.side {
                Side::Lower => lambda_lower[b.row] = (-nu[k]).max(0.0),
                Side::Upper => lambda_upper[b.row] = nu[k].max(0.0),
            }
        }
    }
    let kkt_residual = kkt_residual(problem, &u, &lambda_lower, &lambda_upper);
    let status = match status {
        QpStatus::Optimal if kkt_residual > tol => QpStatus::Inaccurate,
        s => s,
    };
    QpSolution {
        objective: problem.objective(&u),
        u_star: u,
        kkt_residual,
        iterations,
        status,
        lambda_lower,
        lambda_upper,
        working_set,
    }
}

/// Worst KKT violation at `(u, λ)`: stationarity (scaled by
/// `max(1, ‖Qu‖∞, ‖r‖∞)`), primal feasibility, dual sign and complementary
/// slackness.
pub fn kkt_residual(
    problem: &QpProblem,
    u: &DVector<f64>,
    lambda_lower: &DVector<f64>,
    lambda_upper: &DVector<f64>,
) -> f64 {
    let qu = &problem.q * u;
    let grad = &qu + &problem.r + problem.g.transpose() * (lambda_upper - lambda_lower);
    let scale = 1.0f64.max(qu.amax()).max(problem.r.amax());
    let stationarity = grad.amax() / scale;
    let gu = &problem.g * u;
    let mut worst = stationarity.max(problem.violation(u));
    for i in 0..gu.len() {
        worst = worst.max(-lambda_lower[i]).max(-lambda_upper[i]);
        if problem.lower[i].is_finite() {
            worst = worst.max((lambda_lower[i] * (gu[i] - problem.lower[i])).abs());
        } else if lambda_lower[i] != 0.0 {
            worst = f64::INFINITY;
        }
        if problem.upper[i].is_finite() {
            worst = worst.max((lambda_upper[i] * (problem.upper[i] - gu[i])).abs());
        } else if lambda_upper[i] != 0.0 {
            worst = f64::INFINITY;
        }
    }
    worst
}

struct Rows<'a> {
    g: &'a DMatrix<f64>,
    lower: &'a DVector<f64>,
    upper: &'a DVector<f64>,
}

impl<'a> Rows<'a> {
    fn new(g: &'a DMatrix<f64>, lower: &'a DVector<f64>, upper: &'a DVector<f64>) -> Self {
        Self { g, lower, upper }
    }

    fn len(&self) -> usize {
        self.g.nrows()
    }

    fn bound(&self, b: ActiveBound) -> f64 {
        match b.side {
            Side::Lower => self.lower[b.row],
            Side::Upper => self.upper[b.row],
        }
    }

    fn violation(&self, u: &DVector<f64>) -> f64 {
        let gu = self.g * u;
        (0..gu.len()).fold(0.0, |acc: f64, i| {
            acc.max(self.lower[i] - gu[i]).max(gu[i] - self.upper[i])
        })
    }
}

/// Cholesky factor of `Q` and the rows mapped through it.
struct Kernel {
    chol: Cholesky<f64, Dyn>,
    /// `L⁻¹ Gᵀ`, one column per row.
    y: DMatrix<f64>,
}

impl Kernel {
    fn new(q: &DMatrix<f64>, g: &DMatrix<f64>) -> Option<Self> {
        let chol = q.clone().cholesky()?;
        let y = chol.l_dirty().solve_lower_triangular(&g.transpose())?;
        Some(Self { chol, y })
    }

    /// `L⁻¹ v`.
    fn forward(&self, v: &DVector<f64>) -> DVector<f64> {
        self.chol
            .l_dirty()
            .solve_lower_triangular(v)
            .expect("nonzero diagonal")
    }

    /// `-L⁻ᵀ (h + Y_W ν)`.
    fn step(&self, h: &DVector<f64>, ws: &[ActiveBound], nu: &DVector<f64>) -> DVector<f64> {
        let mut v = h.clone();
        for (k, b) in ws.iter().enumerate() {
            v.axpy(nu[k], &self.y.column(b.row), 1.0);
        }
        -self
            .chol
            .l_dirty()
            .tr_solve_lower_triangular(&v)
            .expect("nonzero diagonal")
    }

    /// `-Y_Wᵀ h`.
    fn projected(&self, h: &DVector<f64>, ws: &[ActiveBound]) -> DVector<f64> {
        DVector::from_iterator(ws.len(), ws.iter().map(|b| -self.y.column(b.row).dot(h)))
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.y.column(i).dot(&self.y.column(j))
    }

    fn schur(&self, ws: &[ActiveBound]) -> DMatrix<f64> {
        DMatrix::from_fn(ws.len(), ws.len(), |a, b| self.entry(ws[a].row, ws[b].row))
    }
}

/// Factor of the working-set Schur complement. Updated in place while it
/// stays positive definite; otherwise rebuilt, with LU as the last resort.
struct WorkingFactor {
    chol: Option<Cholesky<f64, Dyn>>,
}

impl WorkingFactor {
    fn new(kernel: &Kernel, ws: &[ActiveBound]) -> Self {
        Self {
            chol: kernel.schur(ws).cholesky(),
        }
    }

    fn solve(&mut self, kernel: &Kernel, ws: &[ActiveBound], rhs: &DVector<f64>) -> Option<DVector<f64>> {
        if ws.is_empty() {
            return Some(DVector::zeros(0));
        }
        if self.chol.is_none() {
            *self = Self::new(kernel, ws);
        }
        match &self.chol {
            Some(c) => Some(c.solve(rhs)),
            None => kernel.schur(ws).lu().solve(rhs),
        }
    }

    /// `ws` already holds the new row at its end.
    fn push(&mut self, kernel: &Kernel, ws: &[ActiveBound]) {
        let Some(c) = self.chol.take() else { return };
        let k = ws.len() - 1;
        let new = ws[k].row;
        let col = DVector::from_fn(k + 1, |i, _| kernel.entry(ws[i].row, new));
        let grown = c.insert_column(k, col.clone());
        let d = grown.l_dirty()[(k, k)];
        // a nearly dependent row: rebuild from scratch instead
        if d.is_finite() && d * d > 1e-12 * col[k] {
            self.chol = Some(grown);
        }
    }

    fn remove(&mut self, k: usize) {
        self.chol = self.chol.take().map(|c| c.remove_column(k));
    }
}

/// Minimizer of the objective subject to the working-set rows held at their
/// bounds.
fn equality_minimizer(kernel: &Kernel, r: &DVector<f64>, rows: &Rows, ws: &[ActiveBound]) -> Option<DVector<f64>> {
    let h = kernel.forward(r);
    let mut rhs = kernel.projected(&h, ws);
    for (k, b) in ws.iter().enumerate() {
        rhs[k] -= rows.bound(*b);
    }
    let nu = WorkingFactor::new(kernel, ws).solve(kernel, ws, &rhs)?;
    let u = kernel.step(&h, ws, &nu);
    u.iter().all(|v| v.is_finite()).then_some(u)
}

struct ActiveSetRun {
    u: DVector<f64>,
    working_set: Vec<ActiveBound>,
    nu: Option<DVector<f64>>,
    iterations: usize,
    converged: bool,
}

/// Primal active-set iterations from a feasible `u` whose working-set rows
/// are at their bounds.
#[allow(clippy::too_many_arguments)]
fn active_set(
    q: &DMatrix<f64>,
    kernel: &Kernel,
    r: &DVector<f64>,
    rows: &Rows,
    mut u: DVector<f64>,
    mut ws: Vec<ActiveBound>,
    max_iter: usize,
) -> ActiveSetRun {
    let m = rows.len();
    let mut in_ws = alloc::vec![false; m];
    for b in &ws {
        in_ws[b.row] = true;
    }
    let mut degenerate = false;
    let mut at_subspace_min = false;
    let mut iterations = 0;
    let mut last_nu = None;
    let mut factor = WorkingFactor::new(kernel, &ws);
    let row_max: Vec<f64> = rows.g.row_iter().map(|g| g.amax()).collect();
    while iterations < max_iter {
        iterations += 1;
        let grad = q * &u + r;
        let h = kernel.forward(&grad);
        let nu = match factor.solve(kernel, &ws, &kernel.projected(&h, &ws)) {
            Some(nu) => nu,
            None => break,
        };
        let p = kernel.step(&h, &ws, &nu);
        let p_scale = 1.0 + u.amax() + kernel.chol.solve(&grad).amax();
        if at_subspace_min || p.amax() <= 1e-13 * p_scale {
            at_subspace_min = false;
            // stationary on the working set: check multiplier signs
            let mut leave: Option<(usize, f64)> = None;
            let mult_tol = 1e-12 * (1.0 + grad.amax());
            for (k, b) in ws.iter().enumerate() {
                let mu = match b.side {
                    Side::Lower => -nu[k],
                    Side::Upper => nu[k],
                };
                if mu < -mult_tol {
                    let better = match leave {
                        None => true,
                        // Bland after a degenerate step: smallest row index
                        Some((j, best)) => {
                            if degenerate {
                                b.row < ws[j].row
                            } else {
                                mu < best || (mu == best && b.row < ws[j].row)
                            }
                        }
                    };
                    if better {
                        leave = Some((k, mu));
                    }
                }
            }
            match leave {
                None => {
                    last_nu = Some(nu);
                    return ActiveSetRun {
                        u,
                        working_set: ws,
                        nu: last_nu,
                        iterations,
                        converged: true,
                    };
                }
                Some((k, _)) => {
                    in_ws[ws[k].row] = false;
                    ws.remove(k);
                    factor.remove(k);
                }
            }
            last_nu = None;
            continue;
        }

        // ratio test over rows outside the working set
        let mut step = 1.0;
        let mut blocking: Option<ActiveBound> = None;
        let p_norm = p.amax();
        let gps = rows.g * &p;
        let gus = rows.g * &u;
        for i in 0..m {
            if in_ws[i] {
                continue;
            }
            let gp = gps[i];
            let tiny = 1e-14 * row_max[i] * p_norm;
            let gu = gus[i];
            let candidate = if gp < -tiny && rows.lower[i].is_finite() {
                Some(((gu - rows.lower[i]).max(0.0) / -gp, Side::Lower))
            } else if gp > tiny && rows.upper[i].is_finite() {
                Some(((rows.upper[i] - gu).max(0.0) / gp, Side::Upper))
            } else {
                None
            };
            if let Some((a, side)) = candidate {
                // strict `<` keeps the smallest index on ties
                if a < step {
                    step = a;
                    blocking = Some(ActiveBound { row: i, side });
                }
            }
        }
        #[cfg(debug_assertions)]
        let before = 0.5 * u.dot(&(q * &u)) + r.dot(&u);
        u.axpy(step, &p, 1.0);
        #[cfg(debug_assertions)]
        {
            let after = 0.5 * u.dot(&(q * &u)) + r.dot(&u);
            debug_assert!(
                after <= before + 1e-9 * (1.0 + before.abs()),
                "objective increased: {before} -> {after}"
            );
        }
        degenerate = step == 0.0;
        at_subspace_min = blocking.is_none();
        if let Some(b) = blocking {
            in_ws[b.row] = true;
            ws.push(b);
            factor.push(kernel, &ws);
        }
    }
    ActiveSetRun {
        u,
        working_set: ws,
        nu: last_nu,
        iterations,
        converged: false,
    }
}

enum PhaseOne {
    Feasible(DVector<f64>, usize),
    Infeasible(DVector<f64>, usize),
}

/// Minimizes the largest violation `t` over `(u, t)` with rows normalized:
/// `ĝ u + t ≥ l̂`, `ĝ u − t ≤ û`, `t ≥ 0`, plus a proximal term
/// `½‖u − c‖² + ½t²` that keeps the subproblem strictly convex. Proximal-point
/// rounds move the center `c` to the last solution until `t` vanishes or
/// stops decreasing.
fn phase_one(rows: &Rows, u0: &DVector<f64>, tol: f64, max_iter: usize) -> PhaseOne {
    let n = u0.len();
    let m = rows.len();
    let mut g = DMatrix::zeros(2 * m + 1, n + 1);
    let mut lower = DVector::from_element(2 * m + 1, f64::NEG_INFINITY);
    let mut upper = DVector::from_element(2 * m + 1, f64::INFINITY);
    let mut reach = u0.amax();
    for i in 0..m {
        let norm = rows.g.row(i).norm();
        let scale = if norm > 0.0 { 1.0 / norm } else { 1.0 };
        for j in 0..n {
            g[(i, j)] = rows.g[(i, j)] * scale;
            g[(m + i, j)] = rows.g[(i, j)] * scale;
        }
        g[(i, n)] = 1.0;
        lower[i] = rows.lower[i] * scale;
        g[(m + i, n)] = -1.0;
        upper[m + i] = rows.upper[i] * scale;
        for b in [lower[i], upper[m + i]] {
            if b.is_finite() {
                reach = reach.max(b.abs());
            }
        }
    }
    g[(2 * m, n)] = 1.0;
    lower[2 * m] = 0.0;

    let q = DMatrix::identity(n + 1, n + 1);
    let kernel = Kernel::new(&q, &g).expect("identity");
    let ext = Rows::new(&g, &lower, &upper);
    let mut point = u0.clone().resize_vertically(n + 1, 0.0);
    point[n] = ext_violation(&ext, &point).max(0.0);
    let weight = 1.0 + reach;
    let mut total = 0;
    let mut last_t = f64::INFINITY;
    for _ in 0..100 {
        let mut r = DVector::zeros(n + 1);
        for j in 0..n {
            r[j] = -point[j];
        }
        r[n] = weight;
        let run = active_set(&q, &kernel, &r, &ext, point.clone(), Vec::new(), max_iter);
        total += run.iterations;
        let u = run.u.rows(0, n).into_owned();
        if rows.violation(&u) <= tol * 1e-2 {
            return PhaseOne::Feasible(u, total);
        }
        let t = run.u[n];
        point = run.u;
        if total >= max_iter || t >= last_t - 1e-12 * weight {
            break;
        }
        last_t = t;
    }
    PhaseOne::Infeasible(point.rows(0, n).into_owned(), total)
}

/// Violation of the normalized rows at `t = 0`.
fn ext_violation(rows: &Rows, v: &DVector<f64>) -> f64 {
    let mut w = v.clone();
    w[v.len() - 1] = 0.0;
    rows.violation(&w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_d(lo: f64, hi: f64) -> QpProblem {
        QpProblem {
            q: DMatrix::from_element(1, 1, 1.0),
            r: DVector::from_element(1, -2.0),
            s: 0.0,
            g: DMatrix::from_element(1, 1, 1.0),
            lower: DVector::from_element(1, lo),
            upper: DVector::from_element(1, hi),
        }
    }

    #[test]
    fn unconstrained_minimizer() {
        let q = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let r = DVector::from_row_slice(&[1.0, 2.0]);
        let p = QpProblem::unconstrained(q.clone(), r.clone());
        let sol = solve(&p, 1e-8, 100).unwrap();
        let expect = -q.lu().solve(&r).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.u_star - expect).amax() < 1e-12);
    }

    #[test]
    fn clamped_scalar() {
        let sol = solve(&one_d(0.0, 1.0), 1e-8, 100).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.u_star[0] - 1.0).abs() < 1e-12);
        assert!((sol.objective + 1.5).abs() < 1e-12);
        assert!((sol.lambda_upper[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_start_goes_through_phase_one() {
        // unconstrained optimum 2 lies outside [-3, -1]
        let sol = solve(&one_d(-3.0, -1.0), 1e-8, 100).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.u_star[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_feasible_set() {
        // u ≥ 1 and u ≤ 0
        let p = QpProblem {
            q: DMatrix::from_element(1, 1, 1.0),
            r: DVector::from_element(1, 0.0),
            s: 0.0,
            g: DMatrix::from_row_slice(2, 1, &[1.0, 1.0]),
            lower: DVector::from_row_slice(&[1.0, f64::NEG_INFINITY]),
            upper: DVector::from_row_slice(&[f64::INFINITY, 0.0]),
        };
        assert_eq!(solve(&p, 1e-8, 100).unwrap().status, QpStatus::Infeasible);
    }

    #[test]
    fn rejects_malformed_problems() {
        let mut p = one_d(1.0, 0.0);
        assert!(solve(&p, 1e-8, 10).is_err());
        p = one_d(0.0, 1.0);
        p.q[(0, 0)] = -1.0;
        assert!(solve(&p, 1e-8, 10).is_err());
    }

    #[test]
    fn warm_start_reuses_working_set() {
        let p = one_d(0.0, 1.0);
        let mut s = QpSolver::default();
        let a = s.solve(&p).unwrap();
        let b = s.solve_warm(&p).unwrap();
        assert!((a.u_star[0] - b.u_star[0]).abs() < 1e-14);
        assert!(b.iterations <= a.iterations);
    }

    #[test]
    fn equality_row() {
        // min ½|u|² s.t. u0 + u1 = 1
        let p = QpProblem {
            q: DMatrix::identity(2, 2),
            r: DVector::zeros(2),
            s: 0.0,
            g: DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            lower: DVector::from_element(1, 1.0),
            upper: DVector::from_element(1, 1.0),
        };
        let sol = solve(&p, 1e-8, 100).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.u_star[0] - 0.5).abs() < 1e-12 && (sol.u_star[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn grid_search_oracle_small_problems() {
        // deterministic pseudo-random 2-D instances checked against a grid
        let mut seed = 12345u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        for _ in 0..20 {
            let a = DMatrix::from_fn(2, 2, |_, _| next());
            let q = &a * a.transpose() + DMatrix::identity(2, 2) * 0.5;
            let r = DVector::from_fn(2, |_, _| 2.0 * next());
            let g = DMatrix::from_fn(3, 2, |_, _| next());
            let center = DVector::from_fn(2, |_, _| 0.3 * next());
            let gc = &g * &center;
            let lower = DVector::from_fn(3, |i, _| gc[i] - 0.2 - 0.3 * next().abs());
            let upper = DVector::from_fn(3, |i, _| gc[i] + 0.2 + 0.3 * next().abs());
            let p = QpProblem { q, r, s: 0.0, g, lower, upper };
            let sol = solve(&p, 1e-8, 200).unwrap();
            assert_eq!(sol.status, QpStatus::Optimal);
            let h = 0.002;
            let mut best = f64::INFINITY;
            for i in 0..=1500 {
                for j in 0..=1500 {
                    let u = DVector::from_row_slice(&[-1.5 + i as f64 * h, -1.5 + j as f64 * h]);
                    if p.violation(&u) <= 0.0 {
                        best = best.min(p.objective(&u));
                    }
                }
            }
            assert!(sol.objective <= best + 1e-12);
            assert!(best - sol.objective < 0.05, "grid {best} vs {}", sol.objective);
        }
    }

    #[test]
    fn updated_factor_matches_rebuilt() {
        let q = DMatrix::from_fn(4, 4, |i, j| if i == j { 3.0 } else { 0.5 });
        let g = DMatrix::from_row_slice(4, 4, &[
            1.0, 0.0, 2.0, 0.0, //
            0.0, 1.0, 0.0, -1.0, //
            1.0, 1.0, 2.0, -1.0, // sum of the first two
            0.5, -0.2, 0.1, 1.0,
        ]);
        let kernel = Kernel::new(&q, &g).unwrap();
        let at = |row| ActiveBound { row, side: Side::Lower };
        let rhs = DVector::from_vec(alloc::vec![1.0, -2.0]);

        let mut ws = alloc::vec![at(0)];
        let mut f = WorkingFactor::new(&kernel, &ws);
        for row in [3, 1] {
            ws.push(at(row));
            f.push(&kernel, &ws);
            assert!(f.chol.is_some());
        }
        ws.remove(1);
        f.remove(1);
        let fresh = kernel.schur(&ws).lu().solve(&rhs).unwrap();
        let updated = f.solve(&kernel, &ws, &rhs).unwrap();
        assert!((fresh - updated).amax() < 1e-12);

        // a dependent row drops the factor; the LU fallback still answers
        ws.push(at(2));
        f.push(&kernel, &ws);
        assert!(f.chol.is_none());
        let rhs3 = kernel.schur(&ws) * DVector::from_vec(alloc::vec![1.0, 1.0, 0.0]);
        assert!(f.solve(&kernel, &ws, &rhs3).is_none_or(|v| v.iter().all(|x| x.is_finite())));
    }
}
