//! Dense convex quadratic programming over polyhedra.
//!
//! `minimize 1/2 <x,Hx> + <c,x>  subject to  A_e x = b_e, D x <= d`
//!
//! with `H` symmetric positive semidefinite (`H = 0` gives linear programs).
//! The solver is a primal active-set method: a feasible point is maintained,
//! the working set is the equality rows plus a subset of tight inequality
//! rows, and each iteration either takes a Newton step in the reduced
//! subspace, rides a zero-curvature descent direction to a blocking row, or
//! drops a row with a negative multiplier. All ties break on the lowest row
//! index, which both prevents cycling (Bland) and makes the output
//! deterministic for golden tests.
//!
//! Rank decisions use SVD throughout; exact finite termination on desk-scale
//! polyhedral QPs is the goal, not speed.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg;
use crate::polyhedra::{Polyhedron, ACTIVE_TOL};

/// All solver tolerances in one place.
#[derive(Debug, Clone)]
pub struct Tolerances {
    /// Primal feasibility and active-set detection (absolute).
    pub feas: f64,
    /// Reduced gradient below this (relative to data scale) counts as zero.
    pub grad_zero: f64,
    /// Multipliers above `-mult` count as nonnegative.
    pub mult: f64,
    /// Relative eigenvalue floor separating curved from flat subspace
    /// directions.
    pub curvature: f64,
    /// Hessian symmetry check.
    pub symmetry: f64,
    /// Hessian PSD check (eigenvalue floor).
    pub psd: f64,
    /// Iteration cap factor (times number of rows plus dimension).
    pub max_iter_factor: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            feas: ACTIVE_TOL,
            grad_zero: 1e-11,
            mult: 1e-9,
            curvature: 1e-10,
            symmetry: 1e-12,
            psd: 1e-10,
            max_iter_factor: 60,
        }
    }
}

#[derive(Debug, Error)]
pub enum QpError {
    #[error("hessian is not symmetric within {0}")]
    Asymmetric(f64),
    #[error("hessian is not positive semidefinite (min eigenvalue {0})")]
    NotPsd(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("iteration limit exhausted after {0} iterations")]
    IterationLimit(usize),
    #[error("start point is not feasible")]
    InfeasibleStart,
    #[error("feasible region is empty")]
    Infeasible,
    #[error("dimension {got} exceeds brute-force cap {max}")]
    BruteForceTooLarge { max: usize, got: usize },
    #[error("brute-force oracle requires a bounded feasible region")]
    BruteForceUnbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// A convex QP instance.
#[derive(Debug, Clone)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub c: DVector<f64>,
    pub feasible: Polyhedron,
}

impl QpProblem {
    pub fn new(h: DMatrix<f64>, c: DVector<f64>, feasible: Polyhedron) -> Result<Self, QpError> {
        let n = feasible.dim();
        if h.nrows() != n || h.ncols() != n {
            return Err(QpError::DimensionMismatch { expected: n, got: h.nrows() });
        }
        if c.len() != n {
            return Err(QpError::DimensionMismatch { expected: n, got: c.len() });
        }
        let tol = Tolerances::default();
        if !linalg::is_symmetric(&h, tol.symmetry * (1.0 + linalg::amax(&h))) {
            return Err(QpError::Asymmetric(tol.symmetry));
        }
        let min_eig = linalg::min_eigenvalue(&h);
        if min_eig < -tol.psd * (1.0 + linalg::amax(&h)) {
            return Err(QpError::NotPsd(min_eig));
        }
        Ok(QpProblem { h, c, feasible })
    }

    /// Linear program `min <c,x>` over the polyhedron.
    pub fn lp(c: DVector<f64>, feasible: Polyhedron) -> Result<Self, QpError> {
        let n = feasible.dim();
        QpProblem::new(DMatrix::zeros(n, n), c, feasible)
    }

    fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.h * x)) + self.c.dot(x)
    }
}

/// Solver output. `eq_mult`/`ineq_mult` are the KKT multipliers (the
/// stationarity convention is `H x + c + A_e^T mu + D^T nu = 0`, `nu >= 0`).
#[derive(Debug, Clone)]
pub struct QpSolution {
    pub status: QpStatus,
    pub x: DVector<f64>,
    pub obj: f64,
    pub eq_mult: DVector<f64>,
    pub ineq_mult: DVector<f64>,
    pub iterations: usize,
}

impl QpSolution {
    fn infeasible(n: usize, k: usize, q: usize) -> Self {
        QpSolution {
            status: QpStatus::Infeasible,
            x: DVector::zeros(n),
            obj: f64::INFINITY,
            eq_mult: DVector::zeros(k),
            ineq_mult: DVector::zeros(q),
            iterations: 0,
        }
    }
}

/// Solve a convex QP: phase-1 feasibility, then the active-set iteration.
pub fn solve(qp: &QpProblem) -> Result<QpSolution, QpError> {
    let k = qp.feasible.num_eq();
    let q = qp.feasible.num_ineq();
    match feasible_point(&qp.feasible)? {
        None => Ok(QpSolution::infeasible(qp.feasible.dim(), k, q)),
        Some(x0) => active_set_recovering(qp, x0),
    }
}

/// Solve starting from a known feasible point (skips phase 1).
pub fn solve_from(qp: &QpProblem, start: &DVector<f64>) -> Result<QpSolution, QpError> {
    let tol = Tolerances::default();
    if !qp.feasible.contains(start, 10.0 * tol.feas) {
        return Err(QpError::InfeasibleStart);
    }
    active_set_recovering(qp, start.clone())
}

/// Active-set iteration with a degeneracy escape: if the plain iteration
/// exhausts its cap (cycling at a degenerate vertex), retry with the
/// inequality right-hand sides pushed outward by a tiny deterministic jitter
/// (the start stays feasible), then snap the perturbed working set back onto
/// the original data through its KKT system and verify the result. Only a
/// verified snap-back is returned; otherwise the original error stands.
fn active_set_recovering(qp: &QpProblem, x0: DVector<f64>) -> Result<QpSolution, QpError> {
    let limit = match active_set(qp, x0.clone()) {
        Err(QpError::IterationLimit(it)) => it,
        other => return other,
    };
    let (d, d_rhs) = qp.feasible.ineq_rows();
    let (a_eq, b_eq) = qp.feasible.eq_rows();
    let n = qp.feasible.dim();
    let mut state = 0x7E57AB1E5EEDu64;
    for attempt in 1..=2u32 {
        let mut pert = d_rhs.clone();
        for i in 0..pert.len() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let u = ((state >> 11) as f64) / ((1u64 << 53) as f64);
            pert[i] += (1.0 + u) * 1e-9 * attempt as f64 * (1.0 + d_rhs[i].abs());
        }
        let relaxed = Polyhedron::new(a_eq.clone(), b_eq.clone(), d.clone(), pert)
            .expect("perturbed polyhedron is well-formed");
        let qp2 = QpProblem { h: qp.h.clone(), c: qp.c.clone(), feasible: relaxed };
        let sol2 = match active_set(&qp2, x0.clone()) {
            Ok(s) => s,
            Err(_) => continue,
        };
        if sol2.status != QpStatus::Optimal {
            // infeasibility cannot be introduced by outward relaxation and
            // unboundedness does not depend on right-hand sides
            return Ok(sol2);
        }
        // snap the perturbed working set back onto the original data
        let working: Vec<usize> =
            (0..d.nrows()).filter(|&i| sol2.ineq_mult[i] > 0.0).collect();
        let s = working.len();
        let k = a_eq.nrows();
        let mut m = DMatrix::zeros(n + k + s, n + k + s);
        let mut rhs = DVector::zeros(n + k + s);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = qp.h[(i, j)];
            }
            rhs[i] = -qp.c[i];
        }
        for r in 0..k {
            for j in 0..n {
                m[(n + r, j)] = a_eq[(r, j)];
                m[(j, n + r)] = a_eq[(r, j)];
            }
            rhs[n + r] = b_eq[r];
        }
        for (t, &i) in working.iter().enumerate() {
            for j in 0..n {
                m[(n + k + t, j)] = d[(i, j)];
                m[(j, n + k + t)] = d[(i, j)];
            }
            rhs[n + k + t] = d_rhs[i];
        }
        let (sol, res) = linalg::min_norm_solve(&m, &rhs);
        if res > 1e-7 * (1.0 + linalg::vamax(&rhs)) {
            continue;
        }
        let x = DVector::from_fn(n, |i, _| sol[i]);
        if !qp.feasible.contains(&x, ACTIVE_TOL) {
            continue;
        }
        let mut ineq_mult = DVector::zeros(d.nrows());
        let mut signs_ok = true;
        for (t, &i) in working.iter().enumerate() {
            let mu = sol[n + k + t];
            if mu < -1e-7 {
                signs_ok = false;
            }
            ineq_mult[i] = mu.max(0.0);
        }
        if !signs_ok {
            continue;
        }
        let eq_mult = DVector::from_fn(k, |i, _| sol[n + i]);
        let mut stat = &qp.h * &x + &qp.c;
        stat += a_eq.transpose() * &eq_mult;
        stat += d.transpose() * &ineq_mult;
        let scale = 1.0 + linalg::vamax(&qp.c) + linalg::amax(&qp.h) * (1.0 + linalg::vamax(&x));
        if linalg::vamax(&stat) > 1e-6 * scale {
            continue;
        }
        return Ok(QpSolution {
            status: QpStatus::Optimal,
            x: x.clone(),
            obj: qp.objective(&x),
            eq_mult,
            ineq_mult,
            iterations: limit + sol2.iterations,
        });
    }
    Err(QpError::IterationLimit(limit))
}

/// A feasible point of the polyhedron, or `None` if it is empty.
///
/// Equalities are satisfied by a minimum-norm solve; remaining inequality
/// violation is driven down by the phase-1 LP `min t  s.t.  Dx - t <= d`,
/// which starts feasible by construction.
pub fn feasible_point(p: &Polyhedron) -> Result<Option<DVector<f64>>, QpError> {
    let tol = Tolerances::default();
    let n = p.dim();
    let (a_eq, b_eq) = p.eq_rows();
    let (d, d_rhs) = p.ineq_rows();
    let (x0, res) = linalg::min_norm_solve(a_eq, b_eq);
    if res > 1e-9 * (1.0 + linalg::vamax(b_eq)) {
        return Ok(None); // inconsistent equalities
    }
    let viol = (0..d.nrows())
        .map(|i| d.row(i).transpose().dot(&x0) - d_rhs[i])
        .fold(0.0f64, f64::max);
    if viol <= tol.feas {
        return Ok(Some(x0));
    }

    // phase-1 LP in (x, t)
    let mut a1 = DMatrix::zeros(a_eq.nrows(), n + 1);
    for i in 0..a_eq.nrows() {
        for j in 0..n {
            a1[(i, j)] = a_eq[(i, j)];
        }
    }
    let mut d1 = DMatrix::zeros(d.nrows() + 1, n + 1);
    let mut d1_rhs = DVector::zeros(d.nrows() + 1);
    for i in 0..d.nrows() {
        for j in 0..n {
            d1[(i, j)] = d[(i, j)];
        }
        d1[(i, n)] = -1.0;
        d1_rhs[i] = d_rhs[i];
    }
    d1[(d.nrows(), n)] = -1.0; // t >= -1 keeps the LP bounded
    d1_rhs[d.nrows()] = 1.0;
    let feas1 = Polyhedron::new(a1, b_eq.clone(), d1, d1_rhs)
        .expect("phase-1 polyhedron is well-formed");
    let mut c1 = DVector::zeros(n + 1);
    c1[n] = 1.0;
    let lp = QpProblem::lp(c1, feas1)?;
    let mut start = DVector::zeros(n + 1);
    for j in 0..n {
        start[j] = x0[j];
    }
    start[n] = viol;
    let sol = active_set(&lp, start)?;
    if sol.status == QpStatus::Optimal && sol.x[n] <= tol.feas {
        let x = DVector::from_fn(n, |i, _| sol.x[i]);
        Ok(Some(x))
    } else {
        Ok(None)
    }
}

/// Euclidean projection onto a polyhedron. Members map to themselves exactly.
pub fn project(p: &Polyhedron, x: &DVector<f64>) -> Result<DVector<f64>, QpError> {
    if x.len() != p.dim() {
        return Err(QpError::DimensionMismatch { expected: p.dim(), got: x.len() });
    }
    if p.contains(x, 0.0) {
        return Ok(x.clone());
    }
    let qp = QpProblem::new(DMatrix::identity(p.dim(), p.dim()), -x, p.clone())?;
    let sol = solve(&qp)?;
    match sol.status {
        QpStatus::Optimal => Ok(sol.x),
        _ => Err(QpError::Infeasible),
    }
}

// ---------------------------------------------------------------------------
// active-set iteration
// ---------------------------------------------------------------------------

enum MultStep {
    Optimal(DVector<f64>),
    Drop(usize),
}

/// Least-squares multipliers on the working set; either certify optimality or
/// name the working-set position to drop (lowest row index among negatives).
fn multiplier_step(
    w: &DMatrix<f64>,
    g: &DVector<f64>,
    working: &[usize],
    k: usize,
    tol: &Tolerances,
) -> MultStep {
    let (mu, _res) = linalg::min_norm_solve(&w.transpose(), &(-g));
    let mut drop_pos: Option<usize> = None;
    for (j, &i) in working.iter().enumerate() {
        if mu[k + j] < -tol.mult && drop_pos.is_none_or(|r| i < working[r]) {
            drop_pos = Some(j);
        }
    }
    match drop_pos {
        None => MultStep::Optimal(mu),
        Some(j) => MultStep::Drop(j),
    }
}

fn active_set(qp: &QpProblem, mut x: DVector<f64>) -> Result<QpSolution, QpError> {
    let tol = Tolerances::default();
    let n = qp.feasible.dim();
    let (a_eq, _) = qp.feasible.eq_rows();
    let (d, d_rhs) = qp.feasible.ineq_rows();
    let k = a_eq.nrows();
    let q = d.nrows();
    let max_iter = tol.max_iter_factor * (n + k + q) + 200;

    let grad_scale =
        1.0 + linalg::vamax(&qp.c) + linalg::amax(&qp.h) * (1.0 + linalg::vamax(&x));

    // start with the tight rows as the working set
    let mut working: Vec<usize> = (0..q)
        .filter(|&i| (d.row(i).transpose().dot(&x) - d_rhs[i]).abs() <= tol.feas)
        .collect();

    let finish = |x: &DVector<f64>, mu: &DVector<f64>, working: &[usize], iter: usize| {
        let mut ineq_mult = DVector::zeros(q);
        for (j, &i) in working.iter().enumerate() {
            ineq_mult[i] = mu[k + j].max(0.0);
        }
        let eq_mult = DVector::from_fn(k, |i, _| mu[i]);
        QpSolution {
            status: QpStatus::Optimal,
            x: x.clone(),
            obj: qp.objective(x),
            eq_mult,
            ineq_mult,
            iterations: iter,
        }
    };

    for iter in 0..max_iter {
        // working-set constraint matrix and its null space
        let mut w = DMatrix::zeros(k + working.len(), n);
        for i in 0..k {
            w.set_row(i, &a_eq.row(i));
        }
        for (j, &i) in working.iter().enumerate() {
            w.set_row(k + j, &d.row(i));
        }
        let z = linalg::nullspace(&w);
        let g = &qp.h * &x + &qp.c;
        let grad_tol = tol.grad_zero * grad_scale * (1.0 + linalg::vamax(&x));

        // direction on the current face: flat (zero-curvature) descent first,
        // otherwise a Newton step on the curved subspace
        let mut direction: Option<DVector<f64>> = None;
        if z.ncols() > 0 {
            let gz = z.transpose() * &g;
            if linalg::vamax(&gz) > grad_tol {
                let hz = z.transpose() * &qp.h * &z;
                let eig = hz.symmetric_eigen();
                let eig_scale = linalg::vamax(&eig.eigenvalues).max(1.0);
                let curve_tol = tol.curvature * eig_scale;
                let mut flat = DVector::zeros(z.ncols());
                let mut newton = DVector::zeros(z.ncols());
                for idx in 0..eig.eigenvalues.len() {
                    let lambda = eig.eigenvalues[idx];
                    let v = eig.eigenvectors.column(idx);
                    let coef = v.dot(&gz);
                    if lambda <= curve_tol {
                        flat.axpy(-coef, &v, 1.0);
                    } else {
                        newton.axpy(-coef / lambda, &v, 1.0);
                    }
                }
                // normalize the flat direction so its slope stays linear in
                // the reduced gradient (a raw -P0 gz has quadratic slope and
                // can fall below the descent threshold while far from optimal)
                let p_z = if flat.norm() > grad_tol {
                    let n = flat.norm();
                    flat / n
                } else {
                    newton
                };
                let p = &z * p_z;
                let slope = g.dot(&p);
                if p.norm() > grad_tol && slope < -grad_tol * p.norm().max(1.0) {
                    direction = Some(p);
                }
            }
        }

        let p = match direction {
            None => match multiplier_step(&w, &g, &working, k, &tol) {
                MultStep::Optimal(mu) => return Ok(finish(&x, &mu, &working, iter)),
                MultStep::Drop(j) => {
                    working.remove(j);
                    continue;
                }
            },
            Some(p) => p,
        };

        let slope = g.dot(&p);
        let curv = p.dot(&(&qp.h * &p));
        let alpha_newton = if curv > tol.curvature * p.norm_squared().max(1e-30) {
            (-slope / curv).max(0.0)
        } else {
            f64::INFINITY
        };

        // nearest blocking row, ties on the lowest row index
        let mut alpha_block = f64::INFINITY;
        let mut block_idx: Option<usize> = None;
        for i in 0..q {
            if working.contains(&i) {
                continue;
            }
            let row = d.row(i).transpose();
            let r = row.dot(&p);
            if r > 1e-12 * (1.0 + row.norm() * p.norm()) {
                let slack = d_rhs[i] - row.dot(&x);
                let a = (slack / r).max(0.0);
                if a < alpha_block - 1e-14 {
                    alpha_block = a;
                    block_idx = Some(i);
                } else if (a - alpha_block).abs() <= 1e-14 && block_idx.is_none_or(|b| i < b) {
                    block_idx = Some(i);
                }
            }
        }

        if alpha_newton.is_infinite() && alpha_block.is_infinite() {
            // strict descent along a recession direction with zero curvature
            return Ok(QpSolution {
                status: QpStatus::Unbounded,
                x,
                obj: f64::NEG_INFINITY,
                eq_mult: DVector::zeros(k),
                ineq_mult: DVector::zeros(q),
                iterations: iter,
            });
        }

        let alpha = alpha_newton.min(alpha_block);
        x.axpy(alpha, &p, 1.0);
        if alpha_block <= alpha_newton {
            working.push(block_idx.expect("finite blocking step has an index"));
            working.sort_unstable();
        }
    }
    Err(QpError::IterationLimit(max_iter))
}

// ---------------------------------------------------------------------------
// oracles and certificates
// ---------------------------------------------------------------------------

/// Brute-force QP oracle: enumerate working subsets of the inequality rows,
/// solve each equality-constrained KKT system, filter by feasibility, and
/// take the best candidate. Shares no code with the active-set path.
pub fn brute_force_qp(qp: &QpProblem) -> Result<QpSolution, QpError> {
    const MAX_DIM: usize = 6;
    let n = qp.feasible.dim();
    if n > MAX_DIM {
        return Err(QpError::BruteForceTooLarge { max: MAX_DIM, got: n });
    }
    let rec = qp.feasible.recession_cone_unchecked();
    if cone_max_abs_coordinate(&rec)? > 1e-7 {
        return Err(QpError::BruteForceUnbounded);
    }
    let (a_eq, b_eq) = qp.feasible.eq_rows();
    let (d, d_rhs) = qp.feasible.ineq_rows();
    let k = a_eq.nrows();
    let q = d.nrows();

    // (objective, x, equality multipliers, subset, subset multipliers)
    type Candidate = (f64, DVector<f64>, DVector<f64>, Vec<usize>, DVector<f64>);
    let mut best: Option<Candidate> = None;
    for size in 0..=q.min(n) {
        let mut pick = vec![0usize; size];
        enumerate(q, size, &mut pick, 0, 0, &mut |subset: &[usize]| {
            let s = subset.len();
            // KKT system: [H A^T; A 0] [x; mult] = [-c; rhs]
            let mut m = DMatrix::zeros(n + k + s, n + k + s);
            let mut rhs = DVector::zeros(n + k + s);
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] = qp.h[(i, j)];
                }
                rhs[i] = -qp.c[i];
            }
            for r in 0..k {
                for j in 0..n {
                    m[(n + r, j)] = a_eq[(r, j)];
                    m[(j, n + r)] = a_eq[(r, j)];
                }
                rhs[n + r] = b_eq[r];
            }
            for (t, &i) in subset.iter().enumerate() {
                for j in 0..n {
                    m[(n + k + t, j)] = d[(i, j)];
                    m[(j, n + k + t)] = d[(i, j)];
                }
                rhs[n + k + t] = d_rhs[i];
            }
            let (sol, res) = linalg::min_norm_solve(&m, &rhs);
            if res > 1e-8 * (1.0 + linalg::vamax(&rhs)) {
                return; // no stationary point on this face's affine hull
            }
            let x = DVector::from_fn(n, |i, _| sol[i]);
            if !qp.feasible.contains(&x, ACTIVE_TOL) {
                return;
            }
            let obj = qp.objective(&x);
            let replace = match &best {
                None => true,
                Some((b, _, _, _, _)) => obj < *b - 1e-12,
            };
            if replace {
                let eq_mult = DVector::from_fn(k, |i, _| sol[n + i]);
                let sub_mult = DVector::from_fn(s, |i, _| sol[n + k + i]);
                best = Some((obj, x, eq_mult, subset.to_vec(), sub_mult));
            }
        });
    }
    match best {
        None => Ok(QpSolution::infeasible(n, k, q)),
        Some((obj, x, eq_mult, subset, sub_mult)) => {
            let mut ineq_mult = DVector::zeros(q);
            for (t, &i) in subset.iter().enumerate() {
                ineq_mult[i] = sub_mult[t];
            }
            Ok(QpSolution {
                status: QpStatus::Optimal,
                x,
                obj,
                eq_mult,
                ineq_mult,
                iterations: 0,
            })
        }
    }
}

fn enumerate(
    n: usize,
    size: usize,
    pick: &mut [usize],
    depth: usize,
    start: usize,
    f: &mut impl FnMut(&[usize]),
) {
    if depth == size {
        f(&pick[..depth]);
        return;
    }
    for i in start..n {
        pick[depth] = i;
        enumerate(n, size, pick, depth + 1, i + 1, f);
    }
}

/// Maximum of `|u_j|` over a polyhedral cone intersected with the unit box,
/// certified by 2·dim LPs. Zero means the cone is `{0}`.
pub fn cone_max_abs_coordinate(cone: &Polyhedron) -> Result<f64, QpError> {
    let n = cone.dim();
    let (a_eq, _) = cone.eq_rows();
    let (d, _) = cone.ineq_rows();
    // cone rows with the unit box appended
    let mut di = DMatrix::zeros(d.nrows() + 2 * n, n);
    let mut rhs = DVector::zeros(d.nrows() + 2 * n);
    for i in 0..d.nrows() {
        di.set_row(i, &d.row(i));
    }
    for j in 0..n {
        di[(d.nrows() + 2 * j, j)] = 1.0;
        rhs[d.nrows() + 2 * j] = 1.0;
        di[(d.nrows() + 2 * j + 1, j)] = -1.0;
        rhs[d.nrows() + 2 * j + 1] = 1.0;
    }
    let feas = Polyhedron::new(a_eq.clone(), DVector::zeros(a_eq.nrows()), di, rhs)
        .expect("cone box polyhedron is well-formed");
    let origin = DVector::zeros(n);
    let mut max_reach = 0.0f64;
    for j in 0..n {
        for sgn in [1.0, -1.0] {
            let mut c = DVector::zeros(n);
            c[j] = -sgn;
            let lp = QpProblem::lp(c, feas.clone())?;
            let sol = solve_from(&lp, &origin)?;
            if sol.status == QpStatus::Optimal {
                max_reach = max_reach.max(-sol.obj);
            }
        }
    }
    Ok(max_reach)
}

/// Certify that an optimal solution is the unique minimizer: the cone of
/// directions that stay feasible, keep the objective flat, and stay in the
/// Hessian null space must be `{0}`.
pub fn certify_unique(qp: &QpProblem, sol: &QpSolution) -> Result<bool, QpError> {
    if sol.status != QpStatus::Optimal {
        return Ok(false);
    }
    let n = qp.feasible.dim();
    let (a_eq, _) = qp.feasible.eq_rows();
    let (d, _) = qp.feasible.ineq_rows();
    let active = qp.feasible.active_set(&sol.x, ACTIVE_TOL);
    let g = &qp.h * &sol.x + &qp.c;

    // equalities: A_e u = 0, H u = 0, <g,u> = 0; inequalities: D_act u <= 0;
    // near-zero rows (for example the gradient row at a flat optimum) are
    // vacuous and dropped by the cone sanitizer
    let mut eq = DMatrix::zeros(a_eq.nrows() + n + 1, n);
    for i in 0..a_eq.nrows() {
        eq.set_row(i, &a_eq.row(i));
    }
    for i in 0..n {
        eq.set_row(a_eq.nrows() + i, &qp.h.row(i));
    }
    eq.set_row(a_eq.nrows() + n, &g.transpose());
    let mut di = DMatrix::zeros(active.len(), n);
    for (j, &i) in active.iter().enumerate() {
        di.set_row(j, &d.row(i));
    }
    let cone = crate::polyhedra::homogeneous_cone(&eq, &di);
    Ok(cone_max_abs_coordinate(&cone)? <= 1e-7)
}
