//! Sign-constrained lasso by coordinate descent ("shooting"), and the scaled
//! lasso built on top of it.
//!
//! The problem is
//!
//! ```text
//! minimise ½‖y − XΔ‖² + λ‖Δ‖₁   subject to  TΔ ≤ 0 (elementwise)
//! ```
//!
//! Each coordinate update solves the one-dimensional problem exactly: the
//! soft-thresholded least-squares value is projected onto the interval of
//! values that keep every constraint satisfied.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop when no coordinate moves by more than this in a full sweep.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Allowed positive slack on `TΔ`.
    pub feas_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_sweeps: 10_000,
            feas_tol: 1e-9,
        }
    }
}

/// `½‖y − XΔ‖² + λ‖Δ‖₁` subject to `TΔ ≤ 0`. A `T` with zero rows means no
/// constraint.
#[derive(Debug, Clone, Copy)]
pub struct ConstrainedLassoProblem<'a> {
    pub x: &'a DMatrix<f64>,
    pub y: &'a DVector<f64>,
    pub t: &'a DMatrix<f64>,
    pub lambda: f64,
}

impl<'a> ConstrainedLassoProblem<'a> {
    pub fn new(
        x: &'a DMatrix<f64>,
        y: &'a DVector<f64>,
        t: &'a DMatrix<f64>,
        lambda: f64,
    ) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Dimension(format!(
                "design has {} rows but response has {}",
                x.nrows(),
                y.len()
            )));
        }
        if t.ncols() != x.ncols() {
            return Err(Error::Dimension(format!(
                "constraint matrix has {} columns, design has {}",
                t.ncols(),
                x.ncols()
            )));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("penalty must be >= 0, got {lambda}")));
        }
        Ok(Self { x, y, t, lambda })
    }

    pub fn n_coef(&self) -> usize {
        self.x.ncols()
    }

    pub fn objective(&self, delta: &DVector<f64>) -> f64 {
        0.5 * (self.y - self.x * delta).norm_squared() + self.lambda * delta.lp_norm(1)
    }

    /// Largest entry of `TΔ` (0 when unconstrained).
    pub fn max_violation(&self, delta: &DVector<f64>) -> f64 {
        if self.t.nrows() == 0 {
            return 0.0;
        }
        (self.t * delta).max()
    }

    /// `‖Xᵀy‖∞`, the smallest penalty for which `Δ = 0` is optimal.
    pub fn lambda_max(x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
        (x.transpose() * y).amax()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftFit {
    pub delta: DVector<f64>,
    pub objective: f64,
    /// Coordinate sweeps (summed over scale updates for the scaled lasso).
    pub iterations: usize,
    pub converged: bool,
    /// Noise scale, for scaled-lasso fits.
    pub sigma: Option<f64>,
    /// Penalty used in the final lasso solve.
    pub lambda: f64,
}

impl ShiftFit {
    /// Number of coordinates with `|Δ_j| > tol`.
    pub fn support_size(&self, tol: f64) -> usize {
        self.delta.iter().filter(|d| d.abs() > tol).count()
    }
}

/// Solution of the one-dimensional subproblem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Univariate {
    Value(f64),
    Infeasible,
}

/// Feasible interval `{θ : u + vθ ≤ slack}`, or `None` when empty.
pub fn feasible_interval(u: &[f64], v: &[f64], slack: f64) -> Option<(f64, f64)> {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (&ui, &vi) in u.iter().zip(v) {
        if vi > 0.0 {
            hi = hi.min(-ui / vi);
        } else if vi < 0.0 {
            lo = lo.max(-ui / vi);
        } else if ui > slack {
            return None;
        }
    }
    (lo <= hi).then_some((lo, hi))
}

fn soft_threshold(rho: f64, lambda: f64) -> f64 {
    if rho > lambda {
        rho - lambda
    } else if rho < -lambda {
        rho + lambda
    } else {
        0.0
    }
}

/// Minimises `½‖r − xθ‖² + λ|θ|` subject to `u + vθ ≤ 0`, where `r` is the
/// partial residual `y − z` with the coordinate removed.
pub fn solve_univariate(x: &[f64], residual: &[f64], u: &[f64], v: &[f64], lambda: f64) -> Univariate {
    let xx: f64 = x.iter().map(|a| a * a).sum();
    let Some((lo, hi)) = feasible_interval(u, v, 0.0) else {
        return Univariate::Infeasible;
    };
    if xx == 0.0 {
        // Objective is λ|θ|: closest feasible point to zero.
        return Univariate::Value(0.0f64.clamp(lo, hi));
    }
    let rho: f64 = x.iter().zip(residual).map(|(a, b)| a * b).sum();
    Univariate::Value((soft_threshold(rho, lambda) / xx).clamp(lo, hi))
}

fn column_rows(t: &DMatrix<f64>) -> Vec<Vec<usize>> {
    t.column_iter()
        .map(|c| (0..c.len()).filter(|&i| c[i] != 0.0).collect())
        .collect()
}

/// Incremental coordinate-descent state: residual `y − XΔ` and slack `TΔ`.
struct Shooter<'p, 'a> {
    problem: &'p ConstrainedLassoProblem<'a>,
    delta: DVector<f64>,
    residual: DVector<f64>,
    slack: DVector<f64>,
    col_sq: Vec<f64>,
    /// Nonzero rows of each column of `T`.
    t_rows: Vec<Vec<usize>>,
}

impl<'p, 'a> Shooter<'p, 'a> {
    fn new(problem: &'p ConstrainedLassoProblem<'a>, init: DVector<f64>) -> Self {
        let col_sq = problem
            .x
            .column_iter()
            .map(|c| c.norm_squared())
            .collect();
        let mut s = Self {
            problem,
            residual: DVector::zeros(problem.y.len()),
            slack: DVector::zeros(problem.t.nrows()),
            delta: init,
            col_sq,
            t_rows: column_rows(problem.t),
        };
        s.refresh();
        s
    }

    fn refresh(&mut self) {
        self.residual = self.problem.y - self.problem.x * &self.delta;
        if self.problem.t.nrows() > 0 {
            self.slack = self.problem.t * &self.delta;
        }
    }

    /// Exact minimisation along coordinate `j`. Returns the absolute change.
    fn update(&mut self, j: usize) -> f64 {
        let xx = self.col_sq[j];
        if xx == 0.0 {
            return 0.0;
        }
        let old = self.delta[j];
        let x = self.problem.x.column(j);
        let rho = x.dot(&self.residual) + xx * old;
        let target = soft_threshold(rho, self.problem.lambda) / xx;

        let t = self.problem.t.column(j);
        let rows = &self.t_rows[j];
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for &i in rows {
            let vi = t[i];
            let ui = self.slack[i] - vi * old;
            if vi > 0.0 {
                hi = hi.min(-ui / vi);
            } else {
                lo = lo.max(-ui / vi);
            }
        }
        if lo > hi {
            return 0.0;
        }
        let new = target.clamp(lo, hi);
        let d = new - old;
        if d != 0.0 {
            self.delta[j] = new;
            self.residual.axpy(-d, &x, 1.0);
            for &i in rows {
                self.slack[i] += d * t[i];
            }
        }
        d.abs()
    }

    /// Joint move of the current support towards the minimiser of the
    /// objective with signs fixed and the tight constraints held at zero,
    /// stopped where a coordinate reaches zero or another constraint
    /// becomes tight. Returns the largest coordinate change (0 if rejected).
    fn subspace_step(&mut self) -> f64 {
        let p = self.problem;
        let mut delta = self.delta.clone();
        for _ in 0..MAX_DROPS {
            let support: Vec<usize> = (0..p.n_coef())
                .filter(|&j| delta[j] != 0.0 && self.col_sq[j] > 0.0)
                .collect();
            if support.is_empty() {
                break;
            }
            let residual = p.y - p.x * &delta;
            let slack = p.t * &delta;
            let xs = p.x.select_columns(&support);
            let signs = DVector::from_iterator(support.len(), support.iter().map(|&j| delta[j].signum()));
            let grad = xs.transpose() * &residual - signs * p.lambda;
            let hess = xs.transpose() * &xs;
            let tight_tol = 1e-12 * (1.0 + delta.amax());
            let tight: Vec<usize> = (0..p.t.nrows()).filter(|&i| slack[i] >= -tight_tol).collect();
            let ts = p.t.select_columns(&support);
            let held = (!tight.is_empty()).then(|| ts.select_rows(&tight));
            let dir = newton_direction(&hess, &grad, held.as_ref(), p.x.nrows());

            let (sign_step, blocking) = sign_cut(&delta, &support, &dir);
            let tdir = &ts * &dir;
            let row_step = (0..p.t.nrows())
                .filter(|&i| tdir[i] > 0.0 && slack[i] < -tight_tol)
                .map(|i| -slack[i] / tdir[i])
                .fold(f64::INFINITY, f64::min);
            let step = sign_step.min(row_step);
            if !(step > 0.0) {
                break;
            }
            let sign_limited = sign_step <= row_step;
            if let Some(j) = blocking.filter(|_| sign_limited && step < NEGLIGIBLE_STEP) {
                // A vanishing coordinate wants to change sign: drop it and
                // solve again on the smaller support.
                delta[j] = 0.0;
                continue;
            }
            for (k, &j) in support.iter().enumerate() {
                delta[j] += step * dir[k];
            }
            if let Some(j) = blocking.filter(|_| sign_limited && step < 1.0) {
                delta[j] = 0.0;
            }
            break;
        }
        let slack = p.t * &delta;
        if (0..slack.len()).any(|i| slack[i] > self.slack[i].max(0.0) + 1e-13) {
            return 0.0;
        }
        let before = p.objective(&self.delta);
        if p.objective(&delta) >= before - MIN_GAIN * before.abs().max(1.0) {
            return 0.0;
        }
        let change = (&delta - &self.delta).amax();
        self.delta = delta;
        self.refresh();
        change
    }

    fn sweep(&mut self, coords: impl Iterator<Item = usize>) -> f64 {
        let mut max_change: f64 = 0.0;
        for j in coords {
            max_change = max_change.max(self.update(j));
        }
        max_change
    }
}

/// Sign-constrained lasso.
///
/// Runs the shooting algorithm (cyclic coordinate descent, each step the
/// projected one-dimensional minimiser, with active-set passes) from `init`,
/// which must be feasible; `None` starts from zero.
///
/// Coordinate moves alone can stall where two coordinates need to move
/// together along an active constraint. When the shooting solution does not
/// already satisfy the unconstrained optimality conditions, a
/// method-of-multipliers refinement is run from it, the result is made
/// feasible and polished by another shooting pass, and the better feasible
/// point is returned. Non-convergence within `max_sweeps` is reported through
/// `converged = false`.
pub fn constrained_lasso(
    problem: &ConstrainedLassoProblem<'_>,
    init: Option<&DVector<f64>>,
    opts: &SolverOptions,
) -> ShiftFit {
    constrained_lasso_warm(problem, init, None, opts).0
}

/// [`constrained_lasso`] that also takes and returns the constraint
/// multipliers, so a sequence of nearby problems can reuse them.
pub(crate) fn constrained_lasso_warm(
    problem: &ConstrainedLassoProblem<'_>,
    init: Option<&DVector<f64>>,
    multipliers: Option<&DVector<f64>>,
    opts: &SolverOptions,
) -> (ShiftFit, Option<DVector<f64>>) {
    let n = problem.n_coef();
    let init = init.cloned().unwrap_or_else(|| DVector::zeros(n));
    if problem.t.nrows() == 0 {
        return (shoot(problem, init, opts), multipliers.cloned());
    }
    // Shooting crawls along active constraints; the refinement takes over.
    let first_opts = SolverOptions {
        max_sweeps: opts.max_sweeps.min(FIRST_PASS_SWEEPS),
        ..*opts
    };
    let first = shoot(problem, init, &first_opts);
    if satisfies_lasso_kkt(problem, &first.delta, KKT_TOL) {
        return (first, multipliers.cloned());
    }
    let Some((refined, nu, sweeps)) =
        multiplier_refinement(problem, &first.delta, multipliers, opts)
    else {
        return (first, multipliers.cloned());
    };
    let mut polished = shoot(problem, refined, opts);
    polished.iterations += first.iterations + sweeps;
    let fit = if polished.objective < first.objective
        && problem.max_violation(&polished.delta) <= opts.feas_tol
    {
        polished
    } else {
        ShiftFit {
            iterations: polished.iterations,
            ..first
        }
    };
    (fit, Some(nu))
}

/// Sweep budget of the shooting pass before the refinement.
const FIRST_PASS_SWEEPS: usize = 20;

/// Tolerance on the optimality conditions used to skip the refinement.
const KKT_TOL: f64 = 1e-9;

/// Plain lasso optimality (`|x_jᵀr| <= λ`, equality with the sign of `Δ_j` on
/// the support). A feasible point meeting it is optimal for the constrained
/// problem too.
fn satisfies_lasso_kkt(problem: &ConstrainedLassoProblem<'_>, delta: &DVector<f64>, tol: f64) -> bool {
    let r = problem.y - problem.x * delta;
    let g = problem.x.transpose() * r;
    let scale = problem.lambda.max(1.0);
    g.iter().zip(delta.iter()).all(|(&gj, &dj)| {
        if dj == 0.0 {
            gj.abs() <= problem.lambda + tol * scale
        } else {
            (gj - problem.lambda * dj.signum()).abs() <= tol * scale
        }
    })
}

fn shoot(problem: &ConstrainedLassoProblem<'_>, init: DVector<f64>, opts: &SolverOptions) -> ShiftFit {
    let n = problem.n_coef();
    let mut shooter = Shooter::new(problem, init);
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < opts.max_sweeps {
        let change = shooter.sweep(0..n);
        sweeps += 1;
        if change < opts.tol {
            converged = true;
            break;
        }
        // Iterate on the current support until it settles, then re-check all.
        let active: Vec<usize> = (0..n).filter(|&j| shooter.delta[j] != 0.0).collect();
        let mut inner = 0;
        let mut every = NEWTON_EVERY;
        while sweeps < opts.max_sweeps {
            if inner % every == 0 && shooter.subspace_step() == 0.0 {
                every *= 2;
            }
            inner += 1;
            let change = shooter.sweep(active.iter().copied());
            sweeps += 1;
            if change < opts.tol {
                break;
            }
        }
        shooter.refresh();
    }
    let delta = shooter.delta;
    ShiftFit {
        objective: problem.objective(&delta),
        delta,
        iterations: sweeps,
        converged,
        sigma: None,
        lambda: problem.lambda,
    }
}

/// Largest step in `(0, 1]` along `dir` (indexed by `support`) before a
/// coordinate changes sign, and that coordinate.
pub(crate) fn sign_cut(delta: &DVector<f64>, support: &[usize], dir: &DVector<f64>) -> (f64, Option<usize>) {
    let mut step: f64 = 1.0;
    let mut blocking = None;
    for (k, &j) in support.iter().enumerate() {
        if delta[j] * dir[k] < 0.0 {
            let s = -delta[j] / dir[k];
            if s < step {
                step = s;
                blocking = Some(j);
            }
        }
    }
    (step, blocking)
}

/// Relative objective decrease a joint step must achieve to be taken; below
/// it the step only moves along a flat valley.
const MIN_GAIN: f64 = 1e-13;
/// Support reductions tried within one subspace step.
const MAX_DROPS: usize = 20;
/// Steps shorter than this (as a fraction of the full Newton step) count as
/// blocked.
const NEGLIGIBLE_STEP: f64 = 1e-8;

/// Coordinate sweeps between joint subspace steps.
const NEWTON_EVERY: usize = 10;

/// Minimiser of `½dᵀHd − gᵀd` over `{d : Cd = 0}` (all of space without
/// `C`), minimum-norm when that is not unique.
///
/// `rank_bound` is a known upper bound on the rank of `H`. When it is at
/// least the dimension, `H` is treated as definite: the constraint is
/// imposed by a stiff penalty plus an exact projection and the system is
/// solved by Cholesky with a tiny ridge. Otherwise the projected `H` is
/// pseudo-inverted, so the step carries no component along directions where
/// the quadratic is flat.
pub(crate) fn newton_direction(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    c: Option<&DMatrix<f64>>,
    rank_bound: usize,
) -> DVector<f64> {
    let k = g.len();
    let basis = c.map(row_space).filter(|q| q.ncols() > 0);
    let project = |v: DVector<f64>| match &basis {
        Some(q) => {
            let coef = q.transpose() * &v;
            v - q * coef
        }
        None => v,
    };
    if rank_bound < k {
        let (h, g) = match &basis {
            Some(q) => {
                let p = DMatrix::<f64>::identity(k, k) - q * q.transpose();
                (&p * h * &p, &p * g)
            }
            None => (h.clone(), g.clone()),
        };
        return project(pseudo_solve(h, &g));
    }
    let diag = h.diagonal().amax().max(f64::MIN_POSITIVE);
    let mut m = h.clone();
    if let Some(q) = &basis {
        m += q * q.transpose() * (1e6 * diag);
    }
    for i in 0..k {
        m[(i, i)] += 1e-9 * diag;
    }
    let d = match m.clone().cholesky() {
        Some(ch) => ch.solve(g),
        None => pseudo_solve(m, g),
    };
    project(d)
}

/// Orthonormal basis of the row space of `c`.
fn row_space(c: &DMatrix<f64>) -> DMatrix<f64> {
    let qr = c.transpose().col_piv_qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..r.nrows().min(r.ncols())).map(|i| r[(i, i)].abs()).collect();
    let top = diag.iter().copied().fold(0.0, f64::max);
    let rank = diag.iter().take_while(|&&v| v > 1e-10 * top).count();
    qr.q().columns(0, rank).into_owned()
}

fn pseudo_solve(h: DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    let eig = h.symmetric_eigen();
    let top = eig.eigenvalues.amax();
    let mut d = DVector::zeros(g.len());
    for (i, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev > 1e-10 * top {
            let v = eig.eigenvectors.column(i);
            d.axpy(v.dot(g) / ev, &v, 1.0);
        }
    }
    d
}

/// Method of multipliers on `TΔ ≤ 0`. Each inner problem
///
/// ```text
/// ½‖y − XΔ‖² + λ‖Δ‖₁ + 1/(2ρ) ‖(ν + ρTΔ)₊‖²
/// ```
///
/// has no hard constraint, so coordinate descent reaches its minimiser. The
/// returned point is feasible (after a shift along a column of `T` that is
/// positive on every violated row) or `None` if no such repair exists.
fn multiplier_refinement(
    problem: &ConstrainedLassoProblem<'_>,
    start: &DVector<f64>,
    nu_init: Option<&DVector<f64>>,
    opts: &SolverOptions,
) -> Option<(DVector<f64>, DVector<f64>, usize)> {
    let x = problem.x;
    let t = problem.t;
    let n = problem.n_coef();
    let mc = t.nrows();
    let col_sq: Vec<f64> = x.column_iter().map(|c| c.norm_squared()).collect();
    let t_sq: f64 = t.column_iter().map(|c| c.norm_squared()).sum::<f64>() / n as f64;
    let x_sq: f64 = col_sq.iter().sum::<f64>() / n as f64;
    let mut rho = if t_sq > 0.0 { 10.0 * x_sq / t_sq } else { 1.0 };

    let mut delta = start.clone();
    let mut residual = problem.y - x * &delta;
    let mut tdelta = t * &delta;
    let mut nu = match nu_init {
        Some(v) if v.len() == mc => v.clone(),
        _ => DVector::<f64>::zeros(mc),
    };
    let t_rows = column_rows(t);
    let mut c = Vec::with_capacity(mc);
    let mut v = Vec::with_capacity(mc);
    let mut buf = Vec::with_capacity(mc);
    let mut sweeps = 0;
    let scale = problem.y.amax().max(1.0);
    let mut prev_violation = tdelta.max().max(0.0);

    for _ in 0..MAX_OUTER {
        let before = delta.clone();
        let budget = opts.max_sweeps;
        // Early rounds only need to be as accurate as the multipliers are.
        let inner_tol = (0.1 * prev_violation).clamp(opts.tol * 0.1, 1e-3 * scale);
        let mut inner = 0;
        let mut every = NEWTON_EVERY;
        loop {
            if inner % every == 0 {
                match penalized_newton(problem, &delta, &residual, &tdelta, &nu, rho) {
                    Some(next) => {
                        delta = next;
                        residual = problem.y - x * &delta;
                        tdelta = t * &delta;
                    }
                    None => every *= 2,
                }
            }
            let mut max_change: f64 = 0.0;
            for j in 0..n {
                let a = col_sq[j];
                if a == 0.0 {
                    continue;
                }
                let xj = x.column(j);
                let tj = t.column(j);
                let old = delta[j];
                let b = xj.dot(&residual) + a * old;
                c.clear();
                v.clear();
                for &i in &t_rows[j] {
                    c.push(nu[i] + rho * (tdelta[i] - tj[i] * old));
                    v.push(tj[i]);
                }
                let new = penalized_univariate(a, b, problem.lambda, &c, &v, rho, &mut buf);
                let d = new - old;
                if d != 0.0 {
                    delta[j] = new;
                    residual.axpy(-d, &xj, 1.0);
                    for &i in &t_rows[j] {
                        tdelta[i] += d * tj[i];
                    }
                    max_change = max_change.max(d.abs());
                }
            }
            inner += 1;
            if max_change < inner_tol || inner >= budget {
                break;
            }
            if inner % 50 == 0 {
                residual = problem.y - x * &delta;
                tdelta = t * &delta;
            }
        }
        sweeps += inner;
        residual = problem.y - x * &delta;
        tdelta = t * &delta;
        let violation = tdelta.max().max(0.0);
        for i in 0..mc {
            nu[i] = (nu[i] + rho * tdelta[i]).max(0.0);
        }
        let moved = (&delta - &before).amax();
        if violation <= 1e-2 * opts.feas_tol * scale && moved < opts.tol {
            break;
        }
        if violation > 0.25 * prev_violation {
            rho *= 10.0;
        }
        prev_violation = violation;
    }

    let violation = tdelta.max();
    if violation > 0.0 {
        // Shift one coordinate whose column is positive on every violated row.
        let violated: Vec<usize> = (0..mc).filter(|&i| tdelta[i] > 0.0).collect();
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            let tj = t.column(j);
            if violated.iter().any(|&i| tj[i] <= 0.0) {
                continue;
            }
            let shift = violated
                .iter()
                .map(|&i| tdelta[i] / tj[i])
                .fold(0.0, f64::max);
            // Moving down must not break rows with negative entries.
            let safe = (0..mc).all(|i| tj[i] >= 0.0 || tdelta[i] - tj[i] * shift <= 0.0);
            if safe && best.is_none_or(|(_, s)| shift < s) {
                best = Some((j, shift));
            }
        }
        let (j, shift) = best?;
        delta[j] -= shift;
    }
    Some((delta, nu, sweeps))
}

const MAX_OUTER: usize = 60;

fn penalized_objective(
    problem: &ConstrainedLassoProblem<'_>,
    delta: &DVector<f64>,
    nu: &DVector<f64>,
    rho: f64,
) -> f64 {
    let shifted = nu + problem.t * delta * rho;
    let pen: f64 = shifted.iter().map(|v| v.max(0.0).powi(2)).sum();
    problem.objective(delta) + pen / (2.0 * rho)
}

/// Newton step on the multiplier subproblem restricted to the support, cut
/// at the first sign change and backtracked until the objective decreases.
fn penalized_newton(
    problem: &ConstrainedLassoProblem<'_>,
    delta: &DVector<f64>,
    residual: &DVector<f64>,
    tdelta: &DVector<f64>,
    nu: &DVector<f64>,
    rho: f64,
) -> Option<DVector<f64>> {
    let support: Vec<usize> = (0..delta.len()).filter(|&j| delta[j] != 0.0).collect();
    if support.is_empty() {
        return None;
    }
    let xs = problem.x.select_columns(&support);
    let signs = DVector::from_iterator(support.len(), support.iter().map(|&j| delta[j].signum()));
    let shifted = nu + tdelta * rho;
    let pressing: Vec<usize> = (0..shifted.len()).filter(|&i| shifted[i] > 0.0).collect();
    let mut grad = xs.transpose() * residual - signs * problem.lambda;
    let mut hess = xs.transpose() * &xs;
    if !pressing.is_empty() {
        let ta = problem.t.select_columns(&support).select_rows(&pressing);
        let sa = shifted.select_rows(&pressing);
        grad -= ta.transpose() * sa;
        hess += ta.transpose() * ta * rho;
    }
    let dir = newton_direction(&hess, &grad, None, problem.x.nrows() + pressing.len());
    let (mut step, mut blocking) = sign_cut(delta, &support, &dir);
    let current = penalized_objective(problem, delta, nu, rho);
    for _ in 0..20 {
        if !(step > 0.0) {
            return None;
        }
        let mut next = delta.clone();
        for (k, &j) in support.iter().enumerate() {
            next[j] += step * dir[k];
        }
        if let Some(j) = blocking {
            next[j] = 0.0;
        }
        if penalized_objective(problem, &next, nu, rho) < current {
            return Some(next);
        }
        step *= 0.5;
        blocking = None;
    }
    None
}

/// Minimises `½aθ² − bθ + λ|θ| + 1/(2ρ) Σ (c_i + ρ v_i θ)₊²` exactly.
///
/// The derivative of the smooth part is piecewise linear and increasing, so
/// the root is found by walking its breakpoints in order.
fn penalized_univariate(
    a: f64,
    b: f64,
    lambda: f64,
    c: &[f64],
    v: &[f64],
    rho: f64,
    buf: &mut Vec<(f64, f64)>,
) -> f64 {
    let d0 = -b + c
        .iter()
        .zip(v)
        .map(|(&ci, &vi)| vi * ci.max(0.0))
        .sum::<f64>();
    if d0 < -lambda {
        walk_right(a, b, c, v, 1.0, rho, -lambda, buf)
    } else if d0 > lambda {
        -walk_right(a, -b, c, v, -1.0, rho, -lambda, buf)
    } else {
        0.0
    }
}

/// Smallest `θ >= 0` with `aθ − b + Σ s·v_i (c_i + ρ s·v_i θ)₊ = target`,
/// given the left side is below `target` at zero.
#[allow(clippy::too_many_arguments)]
fn walk_right(
    a: f64,
    b: f64,
    c: &[f64],
    v: &[f64],
    sign: f64,
    rho: f64,
    target: f64,
    buf: &mut Vec<(f64, f64)>,
) -> f64 {
    let mut value = -b;
    let mut slope = a;
    buf.clear();
    for (&ci, &vi) in c.iter().zip(v) {
        let vi = sign * vi;
        if vi == 0.0 {
            continue;
        }
        if ci > 0.0 || (ci == 0.0 && vi > 0.0) {
            value += vi * ci;
            slope += rho * vi * vi;
        }
        let kink = -ci / (rho * vi);
        if kink > 0.0 {
            buf.push((kink, vi));
        }
    }
    buf.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut theta = 0.0;
    for &(kink, vi) in buf.iter() {
        let at = value + slope * (kink - theta);
        if at >= target {
            break;
        }
        value = at;
        theta = kink;
        if vi > 0.0 {
            slope += rho * vi * vi;
        } else {
            slope -= rho * vi * vi;
        }
    }
    theta + (target - value) / slope
}

/// Ordinary lasso `½‖y − Xb‖² + λ‖b‖₁` (no sign constraint).
pub fn lasso(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, opts: &SolverOptions) -> Result<ShiftFit> {
    let none = DMatrix::zeros(0, x.ncols());
    let problem = ConstrainedLassoProblem::new(x, y, &none, lambda)?;
    Ok(constrained_lasso(&problem, None, opts))
}

/// Stop the scale iteration once `σ̂` moves by less than this.
pub const SCALE_TOL: f64 = 1e-6;
/// `σ̂` below this is treated as a degenerate (interpolating) fit.
pub const SCALE_FLOOR: f64 = 1e-8;
const MAX_SCALE_UPDATES: usize = 500;

/// `√(2 log n / m)`, the default base rate of the scaled lasso.
pub fn default_lambda0(n_coef: usize, n_obs: usize) -> f64 {
    (2.0 * (n_coef.max(2) as f64).ln() / n_obs as f64).sqrt()
}

/// Scaled lasso: alternates `σ̂ = ‖y − XΔ̂‖/√m` with the constrained lasso at
/// `λ = λ₀·m·σ̂` until `σ̂` settles. The returned fit satisfies the fixed-point
/// identity exactly for the stored `sigma`; `lambda` is the penalty of the
/// last solve.
pub fn scaled_lasso(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    t: &DMatrix<f64>,
    lambda0: f64,
    init: Option<&DVector<f64>>,
    opts: &SolverOptions,
) -> Result<ShiftFit> {
    scaled_lasso_warm(x, y, t, lambda0, init, None, opts).map(|(fit, _)| fit)
}

/// [`scaled_lasso`] threading constraint multipliers through every solve.
///
/// The scale update `σ ← ‖y − XΔ(σ)‖/√m` is a fixed-point iteration on
/// `g(σ) = ‖y − XΔ(σ)‖/√m − σ`. Plain updates converge linearly and can take
/// hundreds of solves when the rate is small, so each step takes a secant
/// step on `g` instead, falling back to the plain update (or to bisection once
/// a sign change is bracketed) when the secant step is unusable.
pub(crate) fn scaled_lasso_warm(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    t: &DMatrix<f64>,
    lambda0: f64,
    init: Option<&DVector<f64>>,
    multipliers: Option<&DVector<f64>>,
    opts: &SolverOptions,
) -> Result<(ShiftFit, Option<DVector<f64>>)> {
    if !(lambda0 > 0.0 && lambda0.is_finite()) {
        return Err(Error::InvalidArgument(format!("base rate must be positive, got {lambda0}")));
    }
    // Validates dimensions once up front.
    ConstrainedLassoProblem::new(x, y, t, 0.0)?;
    let m = y.len() as f64;
    let mut delta = init.cloned().unwrap_or_else(|| DVector::zeros(x.ncols()));
    let mut nu = multipliers.cloned();
    let mut sigma = (y - x * &delta).norm() / m.sqrt();
    let mut iterations = 0;
    let mut previous: Option<(f64, f64)> = None;
    // Largest σ with g > 0 and smallest with g < 0 seen so far.
    let mut below = f64::NAN;
    let mut above = f64::NAN;
    let mut last = None;
    for _ in 0..MAX_SCALE_UPDATES {
        if sigma < SCALE_FLOOR {
            return Err(Error::ScaleCollapse { sigma, lambda0 });
        }
        let lambda = lambda0 * m * sigma;
        let problem = ConstrainedLassoProblem::new(x, y, t, lambda)?;
        let (fit, next_nu) = constrained_lasso_warm(&problem, Some(&delta), nu.as_ref(), opts);
        iterations += fit.iterations;
        delta = fit.delta.clone();
        nu = next_nu;
        let next = (y - x * &delta).norm() / m.sqrt();
        if next < SCALE_FLOOR {
            return Err(Error::ScaleCollapse { sigma: next, lambda0 });
        }
        let g = next - sigma;
        if g.abs() < SCALE_TOL {
            let fit = ShiftFit {
                iterations,
                sigma: Some(next),
                lambda,
                ..fit
            };
            return Ok((fit, nu));
        }
        if g > 0.0 && !(sigma <= below) {
            below = sigma;
        } else if g < 0.0 && !(sigma >= above) {
            above = sigma;
        }
        let bracketed = below.is_finite() && above.is_finite();
        let secant = previous
            .map(|(s0, g0)| sigma - g * (sigma - s0) / (g - g0))
            .filter(|c| c.is_finite() && *c > 0.0)
            .filter(|c| !bracketed || (*c > below.min(above) && *c < below.max(above)));
        previous = Some((sigma, g));
        last = Some((next, lambda, fit.converged));
        sigma = match secant {
            Some(c) => c,
            None if bracketed => 0.5 * (below + above),
            None => next,
        };
    }
    log::warn!("scaled lasso: noise scale did not settle after {MAX_SCALE_UPDATES} updates");
    let (sigma, lambda, _) = last.unwrap_or((sigma, lambda0 * m * sigma, false));
    let fit = ShiftFit {
        objective: ConstrainedLassoProblem::new(x, y, t, lambda)?.objective(&delta),
        delta,
        iterations,
        converged: false,
        sigma: Some(sigma),
        lambda,
    };
    Ok((fit, nu))
}
