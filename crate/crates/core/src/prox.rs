//! The proximal composite method and the consistent-approximation driver.
//!
//! Each outer step linearizes `G` at the incumbent and solves
//!
//! ```text
//!     min over x in X:  h(G(xk) + J(xk)(x - xk)) + (1/(2 lambda)) ||x - xk||^2
//! ```
//!
//! as one convex QP in `(x, v, w)` through the dual factorization of `h`.
//! A step is accepted when the actual decrease of `h(G(.))` covers a
//! `sigma`-fraction of the model decrease; `lambda` grows by `tau` on
//! acceptance (capped at `lambda_max`) and shrinks by `tau` on rejection.
//! Rejected resolves warm-start from the previous subproblem solution.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::composite::{CompositeError, CompositeProblem, StationarityTriple};
use crate::ext::ExtReal;
use crate::plq::{DualForm, PlqError};
use crate::polyhedra::{Polyhedron, PolyhedronError};
use crate::qp::{self, QpError, QpProblem, QpStatus};

#[derive(Debug, Error)]
pub enum ProxError {
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("starting point is infeasible (phi = +inf after projection)")]
    InfeasibleStart,
    #[error("linearized subproblem is infeasible")]
    LinearizedInfeasible,
    #[error("prox subproblem unbounded; h cannot take -inf")]
    UnexpectedUnbounded,
    #[error("approximation schedule is malformed: {0}")]
    BadSchedule(String),
    #[error("polyhedron does not have the expected shape: {0}")]
    ShapeMismatch(String),
    #[error("composite error: {0}")]
    Composite(#[from] CompositeError),
    #[error("penalty error: {0}")]
    Plq(#[from] PlqError),
    #[error("qp solver failure: {0}")]
    Solver(#[from] QpError),
    #[error("polyhedron error: {0}")]
    Polyhedron(#[from] PolyhedronError),
}

/// Method parameters; the defaults are the ones used across the test corpus.
#[derive(Debug, Clone)]
pub struct ProxParams {
    /// Step-size growth/shrink factor, `> 1`.
    pub tau: f64,
    /// Acceptance fraction in `(0,1)`.
    pub sigma: f64,
    /// Upper bound for `lambda`.
    pub lambda_max: f64,
    /// Initial `lambda` in `(0, lambda_max]`.
    pub lambda0: f64,
    /// Stop when `||xbar - x|| <= stop_tol`.
    pub stop_tol: f64,
    pub max_iter: usize,
    /// Cap on consecutive rejections within one outer iteration.
    pub max_backtracks: usize,
}

impl Default for ProxParams {
    fn default() -> Self {
        ProxParams {
            tau: 2.0,
            sigma: 0.1,
            lambda_max: 10.0,
            lambda0: 1.0,
            stop_tol: 1e-8,
            max_iter: 500,
            max_backtracks: 60,
        }
    }
}

impl ProxParams {
    pub fn validate(&self) -> Result<(), ProxError> {
        let bad = |v: f64| v.is_nan();
        if self.tau <= 1.0 || bad(self.tau) {
            return Err(ProxError::BadParams("tau must exceed 1".into()));
        }
        if self.sigma <= 0.0 || self.sigma >= 1.0 || bad(self.sigma) {
            return Err(ProxError::BadParams("sigma must lie in (0,1)".into()));
        }
        if self.lambda_max <= 0.0 || bad(self.lambda_max) {
            return Err(ProxError::BadParams("lambda_max must be positive".into()));
        }
        if self.lambda0 <= 0.0 || self.lambda0 > self.lambda_max || bad(self.lambda0) {
            return Err(ProxError::BadParams("lambda0 must lie in (0, lambda_max]".into()));
        }
        if self.stop_tol <= 0.0 || bad(self.stop_tol) {
            return Err(ProxError::BadParams("stop_tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// `||xbar - x||` fell below `stop_tol`.
    StepConverged,
    /// The residual target of an approximation stage was met.
    ResidualConverged,
    /// The model decrease fell below the evaluation-noise floor, so the
    /// acceptance ratio is no longer meaningful.
    ModelStalled,
    MaxIterations,
    BacktrackLimit,
}

/// One accepted outer iteration.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iter: usize,
    pub x: DVector<f64>,
    pub lambda: f64,
    pub phi: f64,
    pub model_decrease: f64,
    pub actual_decrease: f64,
    /// Residual of the recovered-multiplier triple at `x`.
    pub residual: f64,
    pub step_norm: f64,
    /// Rejections before this step was accepted.
    pub backtracks: usize,
}

#[derive(Debug, Clone)]
pub struct SolveTrace {
    pub records: Vec<IterationRecord>,
    pub final_triple: StationarityTriple,
    pub termination: Termination,
}

impl SolveTrace {
    pub fn final_x(&self) -> &DVector<f64> {
        &self.final_triple.x
    }

    /// CSV export with the exact column set
    /// `iter,phi,lambda,step_norm,residual,backtracks`.
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "iter,phi,lambda,step_norm,residual,backtracks")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.iter, r.phi, r.lambda, r.step_norm, r.residual, r.backtracks
            )?;
        }
        Ok(())
    }
}

/// Schedule of approximating problems for the consistent-approximation driver.
#[derive(Debug, Clone)]
pub struct ApproxSchedule {
    pub kind: ScheduleKind,
    pub nu_list: Vec<u32>,
    /// Stage residual targets, strictly decreasing.
    pub eps_list: Vec<f64>,
    /// Penalty magnitudes, strictly increasing (penalty schedules only).
    pub theta_list: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    MoreauSmoothing,
    ExactPenalty,
    Custom,
}

impl ApproxSchedule {
    pub fn validate(&self) -> Result<(), ProxError> {
        if self.nu_list.len() != self.eps_list.len() {
            return Err(ProxError::BadSchedule("nu_list and eps_list lengths differ".into()));
        }
        if self.nu_list.is_empty() {
            return Err(ProxError::BadSchedule("schedule is empty".into()));
        }
        if !self.nu_list.windows(2).all(|w| w[0] < w[1]) {
            return Err(ProxError::BadSchedule("nu_list must be increasing".into()));
        }
        if !self.eps_list.iter().all(|e| *e > 0.0) {
            return Err(ProxError::BadSchedule("eps_list must be positive".into()));
        }
        if !self.eps_list.windows(2).all(|w| w[0] > w[1]) {
            return Err(ProxError::BadSchedule("eps_list must be strictly decreasing".into()));
        }
        if let Some(thetas) = &self.theta_list {
            if thetas.len() != self.nu_list.len() {
                return Err(ProxError::BadSchedule("theta_list length differs".into()));
            }
            if !thetas.windows(2).all(|w| w[0] < w[1]) {
                return Err(ProxError::BadSchedule("theta_list must be strictly increasing".into()));
            }
            if !thetas.iter().all(|t| *t > 0.0) {
                return Err(ProxError::BadSchedule("theta_list must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Exact-penalty surrogate of the multiplier set `{1} x R^m x [0,inf)^q`:
/// `{1} x [-theta,theta]^m x [0,theta]^q`. The induced penalty is
/// `z0 + theta * sum |z_eq| + theta * sum max(0, z_ineq)`.
pub fn penalty_family(y: &Polyhedron, theta: f64) -> Result<Polyhedron, ProxError> {
    if theta < 0.0 {
        return Err(ProxError::BadParams("theta must be nonnegative".into()));
    }
    let dim = y.dim();
    let (a_eq, b_eq) = y.eq_rows();
    let (d, d_rhs) = y.ineq_rows();
    // expect exactly: one equality row e_0 = 1, inequality rows -e_j <= 0
    if a_eq.nrows() != 1 || (b_eq[0] - 1.0).abs() > 1e-12 {
        return Err(ProxError::ShapeMismatch("expected a single equality row y_0 = 1".into()));
    }
    for j in 0..dim {
        let want = if j == 0 { 1.0 } else { 0.0 };
        if (a_eq[(0, j)] - want).abs() > 1e-12 {
            return Err(ProxError::ShapeMismatch("equality row must pin the first coordinate".into()));
        }
    }
    let mut ineq_coord = vec![false; dim];
    for i in 0..d.nrows() {
        if d_rhs[i].abs() > 1e-12 {
            return Err(ProxError::ShapeMismatch("inequality rhs must be zero".into()));
        }
        let mut coord = None;
        for j in 0..dim {
            if d[(i, j)] != 0.0 {
                if coord.is_some() || (d[(i, j)] + 1.0).abs() > 1e-12 {
                    return Err(ProxError::ShapeMismatch(
                        "inequalities must be sign rows -y_j <= 0".into(),
                    ));
                }
                coord = Some(j);
            }
        }
        match coord {
            Some(j) if j > 0 => ineq_coord[j] = true,
            _ => return Err(ProxError::ShapeMismatch("bad inequality row".into())),
        }
    }
    // trailing q coordinates must be the inequality ones
    let q = ineq_coord.iter().filter(|b| **b).count();
    let m = dim - 1 - q;
    for (j, flagged) in ineq_coord.iter().enumerate() {
        let expect = j > m;
        if *flagged != expect {
            return Err(ProxError::ShapeMismatch(
                "inequality coordinates must be the trailing block".into(),
            ));
        }
    }
    let mut lower = vec![0.0; dim];
    let mut upper = vec![0.0; dim];
    lower[0] = 1.0;
    upper[0] = 1.0;
    for j in 1..=m {
        lower[j] = -theta;
        upper[j] = theta;
    }
    for j in (m + 1)..dim {
        lower[j] = 0.0;
        upper[j] = theta;
    }
    // keep the equality-row form for the first coordinate
    let boxed = Polyhedron::box_set(&lower, &upper)?;
    let (di, drhs) = boxed.ineq_rows();
    let mut a = DMatrix::zeros(1, dim);
    a[(0, 0)] = 1.0;
    // drop the two box rows that encode y_0 = 1 and keep it as an equality
    let keep: Vec<usize> = (0..di.nrows())
        .filter(|&i| di[(i, 0)] == 0.0)
        .collect();
    let mut d2 = DMatrix::zeros(keep.len(), dim);
    let mut r2 = DVector::zeros(keep.len());
    for (t, &i) in keep.iter().enumerate() {
        d2.set_row(t, &di.row(i));
        r2[t] = drhs[i];
    }
    Ok(Polyhedron::new(a, DVector::from_element(1, 1.0), d2, r2)?)
}

/// The Step-1 subproblem at `x_curr` with proximal weight `lambda`; returns
/// the minimizer's `x`-part.
pub fn prox_subproblem(
    p: &CompositeProblem,
    x_curr: &DVector<f64>,
    lambda: f64,
) -> Result<DVector<f64>, ProxError> {
    let form = p.penalty().dual_form();
    let (x, _) = subproblem_inner(p, &form, x_curr, lambda, None)?;
    Ok(x)
}

/// Shared subproblem path; `warm` is the stacked `(x,v,w)` solution of a
/// previous solve at the same linearization point (still feasible because
/// `lambda` only enters the objective).
fn subproblem_inner(
    p: &CompositeProblem,
    form: &DualForm,
    x_curr: &DVector<f64>,
    lambda: f64,
    warm: Option<&DVector<f64>>,
) -> Result<(DVector<f64>, DVector<f64>), ProxError> {
    let n = p.input_dim();
    let m = p.output_dim();
    let qd = form.a.ncols();
    let total = n + qd + m;

    let gx = p.map().value(x_curr);
    let jac = p.map().jacobian(x_curr);

    // the objective is scaled by lambda so the proximal block stays unit-size
    // even under deep backtracking; the minimizer is unchanged
    let mut h = DMatrix::zeros(total, total);
    for i in 0..n {
        h[(i, i)] = 1.0;
    }
    for i in 0..m {
        for j in 0..m {
            h[(n + qd + i, n + qd + j)] = lambda * form.j[(i, j)];
        }
    }
    let mut c = DVector::zeros(total);
    for i in 0..n {
        c[i] = -x_curr[i];
    }
    for i in 0..qd {
        c[n + i] = lambda * form.b[i];
    }

    let (xa, xb) = p.domain().eq_rows();
    let (xd, xdr) = p.domain().ineq_rows();
    let k = xa.nrows();
    let mut eq = DMatrix::zeros(k + m, total);
    let mut eq_rhs = DVector::zeros(k + m);
    for i in 0..k {
        for j in 0..n {
            eq[(i, j)] = xa[(i, j)];
        }
        eq_rhs[i] = xb[i];
    }
    // A v + D w = G(xk) + J (x - xk)  <=>  -J x + A v + D w = G(xk) - J xk
    let rhs_shift = &gx - &jac * x_curr;
    for r in 0..m {
        for j in 0..n {
            eq[(k + r, j)] = -jac[(r, j)];
        }
        for j in 0..qd {
            eq[(k + r, n + j)] = form.a[(r, j)];
        }
        for j in 0..m {
            eq[(k + r, n + qd + j)] = form.d[(r, j)];
        }
        eq_rhs[k + r] = rhs_shift[r];
    }
    let mut ineq = DMatrix::zeros(xd.nrows() + qd, total);
    let mut ineq_rhs = DVector::zeros(xd.nrows() + qd);
    for i in 0..xd.nrows() {
        for j in 0..n {
            ineq[(i, j)] = xd[(i, j)];
        }
        ineq_rhs[i] = xdr[i];
    }
    for i in 0..qd {
        ineq[(xd.nrows() + i, n + i)] = -1.0;
    }
    let feas = Polyhedron::new(eq, eq_rhs, ineq, ineq_rhs)
        .expect("subproblem polyhedron is well-formed");
    let qp_prob = QpProblem::new(h, c, feas)?;

    let sol = match warm {
        Some(w0) => match qp::solve_from(&qp_prob, w0) {
            Ok(s) => s,
            Err(QpError::InfeasibleStart) => qp::solve(&qp_prob)?,
            Err(e) => return Err(e.into()),
        },
        None => qp::solve(&qp_prob)?,
    };
    match sol.status {
        QpStatus::Optimal => Ok((DVector::from_fn(n, |i, _| sol.x[i]), sol.x)),
        QpStatus::Infeasible => Err(ProxError::LinearizedInfeasible),
        QpStatus::Unbounded => Err(ProxError::UnexpectedUnbounded),
    }
}

#[derive(Debug, Clone, Copy)]
enum StopRule {
    StepNorm,
    Residual(f64),
}

/// Proximal composite method from `x0`. `x0` is projected onto `X` and must
/// then have finite `phi`.
pub fn solve(
    p: &CompositeProblem,
    params: &ProxParams,
    x0: &DVector<f64>,
) -> Result<SolveTrace, ProxError> {
    run(p, params, x0, StopRule::StepNorm, false)
}

/// Run until the recovered-multiplier residual falls to `eps` (Step 1 of the
/// consistent-approximation loop); the step-norm rule still applies.
pub fn solve_until_residual(
    p: &CompositeProblem,
    params: &ProxParams,
    x0: &DVector<f64>,
    eps: f64,
) -> Result<SolveTrace, ProxError> {
    run(p, params, x0, StopRule::Residual(eps), false)
}

/// Like [`solve`] but tolerates a start with `phi = +inf`: while infeasible,
/// subproblem steps are accepted unconditionally (the linearized penalty acts
/// as a feasibility restorer). Used by the duality-side inner minimizations.
pub(crate) fn solve_allow_infeasible(
    p: &CompositeProblem,
    params: &ProxParams,
    x0: &DVector<f64>,
) -> Result<SolveTrace, ProxError> {
    run(p, params, x0, StopRule::StepNorm, true)
}

fn run(
    p: &CompositeProblem,
    params: &ProxParams,
    x0: &DVector<f64>,
    stop: StopRule,
    allow_infeasible: bool,
) -> Result<SolveTrace, ProxError> {
    params.validate()?;
    let mut x = qp::project(p.domain(), x0)?;
    let mut phi_x = p.phi(&x)?;
    if !phi_x.is_finite() && !allow_infeasible {
        return Err(ProxError::InfeasibleStart);
    }
    let form = p.penalty().dual_form();
    let mut lambda = params.lambda0;
    let mut records = Vec::new();
    let mut termination = Termination::MaxIterations;

    let h_at = |x: &DVector<f64>| -> Result<ExtReal, ProxError> {
        Ok(p.penalty().eval(&p.map().value(x))?)
    };

    for iter in 0..params.max_iter {
        // residual bookkeeping at the incumbent
        let triple = if phi_x.is_finite() {
            Some(p.residual_at(&x)?)
        } else {
            None
        };
        let residual = triple.as_ref().map_or(f64::INFINITY, |t| t.residual);
        if let StopRule::Residual(eps) = stop {
            if residual <= eps {
                termination = Termination::ResidualConverged;
                break;
            }
        }

        let gx = p.map().value(&x);
        let jac = p.map().jacobian(&x);
        let (mut xbar, mut stacked) = subproblem_inner(p, &form, &x, lambda, None)?;
        let mut backtracks = 0usize;
        let accepted;
        loop {
            let step = (&xbar - &x).norm();
            if step <= params.stop_tol && phi_x.is_finite() {
                // the paper's "xbar = x" stop, realized with a tolerance;
                // this last micro-step skipped the ratio test, so take it
                // only when it does not increase the objective
                let h_bar = p.phi(&xbar)?;
                if h_bar <= phi_x {
                    x = xbar;
                    phi_x = h_bar;
                }
                termination = Termination::StepConverged;
                let final_triple = p.residual_at(&x)?;
                records.push(IterationRecord {
                    iter,
                    x: x.clone(),
                    lambda,
                    phi: phi_x.as_f64(),
                    model_decrease: 0.0,
                    actual_decrease: 0.0,
                    residual: final_triple.residual,
                    step_norm: step,
                    backtracks,
                });
                return Ok(SolveTrace { records, final_triple, termination });
            }

            let linearized = &gx + &jac * (&xbar - &x);
            let h_lin = p.penalty().eval(&linearized)?;
            let h_new = h_at(&xbar)?;
            if !phi_x.is_finite() {
                // restoration phase: any step beats an infinite incumbent
                let rec_phi = h_new.as_f64();
                records.push(IterationRecord {
                    iter,
                    x: xbar.clone(),
                    lambda,
                    phi: rec_phi,
                    model_decrease: f64::INFINITY,
                    actual_decrease: f64::INFINITY,
                    residual,
                    step_norm: step,
                    backtracks,
                });
                x = xbar;
                phi_x = p.phi(&x)?;
                accepted = true;
                break;
            }
            let h_old = phi_x.finite().expect("incumbent is finite here");
            let model_decrease = h_old - h_lin.as_f64();
            let actual_decrease = match h_new {
                ExtReal::Finite(v) => h_old - v,
                ExtReal::PosInf => f64::NEG_INFINITY,
                ExtReal::NegInf => f64::INFINITY,
            };
            // both decreases come from separate QP evaluations; once the
            // model cannot promise progress above that noise the ratio test
            // is a coin flip and rejections would shrink lambda forever
            if model_decrease <= 1e-10 * (1.0 + h_old.abs()) {
                termination = Termination::ModelStalled;
                accepted = false;
                break;
            }
            if actual_decrease >= params.sigma * model_decrease {
                records.push(IterationRecord {
                    iter,
                    x: xbar.clone(),
                    lambda,
                    phi: h_new.as_f64(),
                    model_decrease,
                    actual_decrease,
                    residual,
                    step_norm: step,
                    backtracks,
                });
                lambda = (params.tau * lambda).min(params.lambda_max);
                x = xbar;
                phi_x = h_new;
                accepted = true;
                break;
            }
            backtracks += 1;
            if backtracks > params.max_backtracks {
                termination = Termination::BacktrackLimit;
                accepted = false;
                break;
            }
            lambda /= params.tau;
            let (nx, nstacked) = subproblem_inner(p, &form, &x, lambda, Some(&stacked))?;
            xbar = nx;
            stacked = nstacked;
        }
        if !accepted {
            break;
        }
    }

    if !phi_x.is_finite() {
        return Err(ProxError::InfeasibleStart);
    }
    let final_triple = p.residual_at(&x)?;
    Ok(SolveTrace { records, final_triple, termination })
}

/// Consistent-approximation driver: for each stage `nu` solve the member
/// problem until its own residual is at most `eps_nu`, warm-starting each
/// stage at the previous stage's point.
pub fn consistent_solve(
    family: impl Fn(u32) -> Result<CompositeProblem, ProxError>,
    schedule: &ApproxSchedule,
    params: &ProxParams,
    x0: &DVector<f64>,
) -> Result<Vec<SolveTrace>, ProxError> {
    schedule.validate()?;
    let mut traces = Vec::with_capacity(schedule.nu_list.len());
    let mut x = x0.clone();
    for (stage, &nu) in schedule.nu_list.iter().enumerate() {
        let member = family(nu)?;
        let eps = schedule.eps_list[stage];
        let trace = solve_until_residual(&member, params, &x, eps)?;
        x = trace.final_x().clone();
        traces.push(trace);
    }
    Ok(traces)
}

/// Moreau-smoothing family for a base problem: stage `nu` replaces `h` by
/// its `Q + I/nu` smoothing.
pub fn moreau_family(
    base: &CompositeProblem,
) -> impl Fn(u32) -> Result<CompositeProblem, ProxError> + '_ {
    move |nu| Ok(base.with_penalty(base.penalty().moreau_smoothed(nu))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use crate::composite::SmoothMap;
    use crate::plq::PlqFunction;

    fn vecn(s: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(s)
    }

    fn abs_problem() -> CompositeProblem {
        CompositeProblem::new(Polyhedron::free(1), SmoothMap::identity(1), PlqFunction::abs())
            .unwrap()
    }

    fn abs_quadratic() -> CompositeProblem {
        let g = SmoothMap::new(1, 1, |x| vecn(&[x[0] * x[0] - 1.0]))
            .with_jacobian(|x| DMatrix::from_element(1, 1, 2.0 * x[0]));
        CompositeProblem::new(Polyhedron::free(1), g, PlqFunction::abs()).unwrap()
    }

    #[test]
    fn subproblem_is_soft_threshold() {
        // phi = |x|: prox with lambda = 1 from 0.3 gives 0; from 3 gives 2
        let p = abs_problem();
        let x = prox_subproblem(&p, &vecn(&[0.3]), 1.0).unwrap();
        assert_relative_eq!(x[0], 0.0, epsilon = 1e-8);
        let x = prox_subproblem(&p, &vecn(&[3.0]), 1.0).unwrap();
        assert_relative_eq!(x[0], 2.0, epsilon = 1e-8);
    }

    #[test]
    fn subproblem_is_projected_gradient_step_when_smooth() {
        // Y = {1}, Q = 0: step solves min <grad g0, x> + (1/2l)||x-xk||^2 over X
        let g0 = SmoothMap::new(2, 1, |x| vecn(&[x[0] * x[0] + x[1] * x[1]]))
            .with_jacobian(|x| DMatrix::from_row_slice(1, 2, &[2.0 * x[0], 2.0 * x[1]]));
        let h = PlqFunction::new(
            Polyhedron::singleton(&vecn(&[1.0])).unwrap(),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let xset = Polyhedron::box_set(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let p = CompositeProblem::new(xset.clone(), g0, h).unwrap();
        let xk = vecn(&[1.0, 0.5]);
        let lambda = 0.25;
        let xbar = prox_subproblem(&p, &xk, lambda).unwrap();
        // projected gradient: proj(xk - lambda * grad)
        let grad = vecn(&[2.0, 1.0]);
        let target = qp::project(&xset, &(&xk - lambda * &grad)).unwrap();
        assert_relative_eq!((xbar - target).norm(), 0.0, epsilon = 1e-7);
    }

    #[test]
    fn model_decrease_nonnegative() {
        let p = abs_quadratic();
        for (xk, lambda) in [(3.0, 1.0), (1.5, 0.1), (0.2, 5.0)] {
            let xk = vecn(&[xk]);
            let xbar = prox_subproblem(&p, &xk, lambda).unwrap();
            let gx = p.map().value(&xk);
            let jac = p.map().jacobian(&xk);
            let lin = &gx + &jac * (&xbar - &xk);
            let h_old = p.penalty().eval(&gx).unwrap().finite().unwrap();
            let h_lin = p.penalty().eval(&lin).unwrap().finite().unwrap();
            assert!(h_old - h_lin >= -1e-9);
        }
    }

    #[test]
    fn solves_abs_quadratic_to_stationarity() {
        let p = abs_quadratic();
        let trace = solve(&p, &ProxParams::default(), &vecn(&[3.0])).unwrap();
        assert_eq!(trace.termination, Termination::StepConverged);
        let x = trace.final_x()[0];
        assert!((x.abs() - 1.0).abs() <= 1e-6, "limit {x}");
        assert!(trace.final_triple.residual <= 1e-6);
        // descent across accepted iterations
        for w in trace.records.windows(2) {
            assert!(w[1].phi <= w[0].phi + 1e-12);
        }
        // lambda stays within (0, lambda_max]
        for r in &trace.records {
            assert!(r.lambda > 0.0 && r.lambda <= 10.0);
        }
    }

    #[test]
    fn smooth_strongly_convex_projected_gradient() {
        // phi = 1/2||x - a||^2 via Y={1}: converges with tiny gradient
        let a = [0.3, -0.7, 1.1];
        let g0 = SmoothMap::new(3, 1, move |x| {
            let mut s = 0.0;
            for i in 0..3 {
                s += (x[i] - a[i]) * (x[i] - a[i]);
            }
            vecn(&[0.5 * s])
        })
        .with_jacobian(move |x| {
            DMatrix::from_fn(1, 3, |_, j| x[j] - a[j])
        });
        let h = PlqFunction::new(
            Polyhedron::singleton(&vecn(&[1.0])).unwrap(),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let p = CompositeProblem::new(Polyhedron::free(3), g0, h).unwrap();
        let trace = solve(&p, &ProxParams::default(), &vecn(&[5.0, 5.0, 5.0])).unwrap();
        let x = trace.final_x();
        let grad_norm = ((x[0] - 0.3).powi(2) + (x[1] + 0.7).powi(2) + (x[2] - 1.1).powi(2)).sqrt();
        assert!(grad_norm <= 1e-7, "gradient norm {grad_norm}");
    }

    #[test]
    fn infeasible_start_is_projected() {
        let p = CompositeProblem::new(
            Polyhedron::interval(0.0, 1.0).unwrap(),
            SmoothMap::identity(1),
            PlqFunction::abs(),
        )
        .unwrap();
        let trace = solve(&p, &ProxParams::default(), &vecn(&[7.0])).unwrap();
        assert_relative_eq!(trace.final_x()[0], 0.0, epsilon = 1e-7);
    }

    #[test]
    fn csv_columns() {
        let p = abs_quadratic();
        let trace = solve(&p, &ProxParams::default(), &vecn(&[2.0])).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "iter,phi,lambda,step_norm,residual,backtracks");
        assert!(lines.next().unwrap().split(',').count() == 6);
    }

    #[test]
    fn moreau_schedule_converges_to_true_stationarity() {
        let base = abs_quadratic();
        let schedule = ApproxSchedule {
            kind: ScheduleKind::MoreauSmoothing,
            nu_list: vec![1, 10, 100, 1000],
            eps_list: vec![1.0, 0.1, 0.01, 0.001],
            theta_list: None,
        };
        let traces =
            consistent_solve(moreau_family(&base), &schedule, &ProxParams::default(), &vecn(&[3.0]))
                .unwrap();
        assert_eq!(traces.len(), 4);
        for (t, eps) in traces.iter().zip(&schedule.eps_list) {
            assert!(
                t.termination == Termination::ResidualConverged
                    || t.termination == Termination::StepConverged,
                "stage ended with {:?}",
                t.termination
            );
            assert!(t.final_triple.residual <= *eps || t.termination == Termination::StepConverged);
        }
        let last = &traces.last().unwrap().final_triple;
        assert!((last.x[0].abs() - 1.0).abs() <= 1e-3);
        // residual of the TRUE problem at the final stage triple
        let t = base.stationarity_residual(&last.x, &last.y, &last.z).unwrap();
        assert!(t.residual <= 1e-3, "true residual {}", t.residual);
    }

    #[test]
    fn penalty_family_shapes() {
        let y = Polyhedron::nlp_multiplier_set(1, 0).unwrap();
        let y5 = penalty_family(&y, 5.0).unwrap();
        // {1} x [-5,5]: h5(z) = z0 + 5|z1|
        let h5 = PlqFunction::new(y5.clone(), DMatrix::zeros(2, 2)).unwrap();
        let v = h5.eval(&vecn(&[2.0, -1.0])).unwrap().finite().unwrap();
        assert_relative_eq!(v, 7.0, epsilon = 1e-9);
        // theta = 0 collapses to z0
        let y0 = penalty_family(&y, 0.0).unwrap();
        let h0 = PlqFunction::new(y0, DMatrix::zeros(2, 2)).unwrap();
        assert_relative_eq!(
            h0.eval(&vecn(&[2.0, -1.0])).unwrap().finite().unwrap(),
            2.0,
            epsilon = 1e-9
        );
        // with inequalities: {1} x [-t,t]^m x [0,t]^q
        let y2 = Polyhedron::nlp_multiplier_set(1, 1).unwrap();
        let yt = penalty_family(&y2, 2.0).unwrap();
        let ht = PlqFunction::new(yt, DMatrix::zeros(3, 3)).unwrap();
        // h(z) = z0 + 2|z1| + 2*max(0,z2)
        assert_relative_eq!(
            ht.eval(&vecn(&[1.0, -2.0, 3.0])).unwrap().finite().unwrap(),
            1.0 + 4.0 + 6.0,
            epsilon = 1e-9
        );
        assert_relative_eq!(
            ht.eval(&vecn(&[1.0, -2.0, -3.0])).unwrap().finite().unwrap(),
            5.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn penalty_minorizes_h_on_samples() {
        let y = Polyhedron::nlp_multiplier_set(2, 1).unwrap();
        let h = PlqFunction::new(y.clone(), DMatrix::zeros(4, 4)).unwrap();
        let ht = PlqFunction::new(penalty_family(&y, 8.0).unwrap(), DMatrix::zeros(4, 4)).unwrap();
        let mut state = 31u64;
        let mut unif = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64)
        };
        for _ in 0..100 {
            let z = vecn(&[
                unif() * 4.0 - 2.0,
                unif() * 2.0 - 1.0,
                unif() * 2.0 - 1.0,
                unif() * 2.0 - 1.0,
            ]);
            let hz = h.eval(&z).unwrap();
            let htz = ht.eval(&z).unwrap().finite().unwrap();
            match hz {
                ExtReal::Finite(v) => assert!(htz <= v + 1e-9),
                ExtReal::PosInf => {}
                ExtReal::NegInf => panic!("h is proper"),
            }
        }
    }

    #[test]
    fn constant_family_reduces_to_repeated_solve() {
        // no approximation: each stage solves the same problem with a
        // tightening residual target
        let base = abs_quadratic();
        let schedule = ApproxSchedule {
            kind: ScheduleKind::Custom,
            nu_list: vec![1, 2, 3],
            eps_list: vec![1e-2, 1e-4, 1e-6],
            theta_list: None,
        };
        let traces = consistent_solve(
            |_nu| Ok(base.clone()),
            &schedule,
            &ProxParams::default(),
            &vecn(&[2.5]),
        )
        .unwrap();
        for (t, eps) in traces.iter().zip(&schedule.eps_list) {
            assert!(t.final_triple.residual <= *eps);
        }
    }

    #[test]
    fn exact_penalty_schedule_on_equality_nlp() {
        // min 1/2||x||^2 s.t. x0 + x1 = 1: solution (0.5, 0.5), multiplier -0.5
        let g = SmoothMap::new(2, 2, |x| {
            vecn(&[0.5 * (x[0] * x[0] + x[1] * x[1]), x[0] + x[1] - 1.0])
        })
        .with_jacobian(|x| DMatrix::from_row_slice(2, 2, &[x[0], x[1], 1.0, 1.0]));
        let y = Polyhedron::nlp_multiplier_set(1, 0).unwrap();
        let h = PlqFunction::new(y.clone(), DMatrix::zeros(2, 2)).unwrap();
        let base = CompositeProblem::new(Polyhedron::free(2), g, h).unwrap();

        let nus: Vec<u32> = (1..=12).collect();
        let eps: Vec<f64> = nus.iter().map(|n| 0.5f64.powi(*n as i32)).collect();
        let thetas: Vec<f64> = nus.iter().map(|n| 2.0f64.powi(*n as i32)).collect();
        let schedule = ApproxSchedule {
            kind: ScheduleKind::ExactPenalty,
            nu_list: nus,
            eps_list: eps,
            theta_list: Some(thetas.clone()),
        };
        let family = |nu: u32| -> Result<CompositeProblem, ProxError> {
            let theta = 2.0f64.powi(nu as i32);
            let ynu = penalty_family(&y, theta)?;
            Ok(base.with_penalty(PlqFunction::new(ynu, DMatrix::zeros(2, 2))?)?)
        };
        let traces =
            consistent_solve(family, &schedule, &ProxParams::default(), &vecn(&[2.0, -1.0]))
                .unwrap();
        let xfinal = traces.last().unwrap().final_x();
        assert!((xfinal[0] - 0.5).abs() <= 1e-3, "x0 = {}", xfinal[0]);
        assert!((xfinal[1] - 0.5).abs() <= 1e-3, "x1 = {}", xfinal[1]);
    }
}
