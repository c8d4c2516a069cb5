//! The assembled problem `minimize phi(x) = i_X(x) + h(G(x))` together with
//! its first-order machinery: chain-rule subgradients under a certified
//! qualification, and the stationarity residual
//!
//! ```text
//!     dist(0, Phi(x,y,z)),
//!     Phi(x,y,z) = {G(x)-z} x (Qy - z + N_Y(y)) x (grad G(x)^T y + N_X(x)),
//! ```
//!
//! whose zeros encode the first-order optimality condition. The auxiliary
//! `(y,z)` make the residual a meaningful stopping quantity even where `phi`
//! is nonsmooth.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::ext::ExtReal;
use crate::plq::{PlqError, PlqFunction, Subgradients};
use crate::polyhedra::{self, Polyhedron, ACTIVE_TOL};
use crate::qp::{self, QpError};

#[derive(Debug, Error)]
pub enum CompositeError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("X must be nonempty")]
    EmptyX,
    #[error("point is outside dom phi")]
    NotInDomain,
    #[error("penalty error: {0}")]
    Plq(#[from] PlqError),
    #[error("qp solver failure: {0}")]
    Solver(#[from] QpError),
}

type ValueFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;
type JacobianFn = dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync;
type WeightedHessianFn = dyn Fn(&DVector<f64>, &DVector<f64>) -> DMatrix<f64> + Send + Sync;

/// A smooth mapping `G: R^n -> R^m` given by callbacks. Callbacks must be
/// pure and reentrant; values are shared by `Arc`, so clones are cheap and
/// the map is safe for concurrent use.
#[derive(Clone)]
pub struct SmoothMap {
    n: usize,
    m: usize,
    value: Arc<ValueFn>,
    jacobian: Option<Arc<JacobianFn>>,
    weighted_hessian: Option<Arc<WeightedHessianFn>>,
    affine: Option<(DMatrix<f64>, DVector<f64>)>,
}

impl std::fmt::Debug for SmoothMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SmoothMap")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .field("weighted_hessian", &self.weighted_hessian.is_some())
            .field("affine", &self.affine.is_some())
            .finish()
    }
}

impl SmoothMap {
    pub fn new(
        n: usize,
        m: usize,
        value: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        SmoothMap { n, m, value: Arc::new(value), jacobian: None, weighted_hessian: None, affine: None }
    }

    pub fn with_jacobian(
        mut self,
        jac: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    pub fn with_weighted_hessian(
        mut self,
        wh: impl Fn(&DVector<f64>, &DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.weighted_hessian = Some(Arc::new(wh));
        self
    }

    /// The affine map `G(x) = A x + b`.
    pub fn affine(a: DMatrix<f64>, b: DVector<f64>) -> Self {
        let (m, n) = (a.nrows(), a.ncols());
        assert_eq!(m, b.len(), "affine map: rhs length");
        let a2 = a.clone();
        let b2 = b.clone();
        let a3 = a.clone();
        let zeros = DMatrix::zeros(n, n);
        SmoothMap {
            n,
            m,
            value: Arc::new(move |x| &a2 * x + &b2),
            jacobian: Some(Arc::new(move |_| a3.clone())),
            weighted_hessian: Some(Arc::new(move |_, _| zeros.clone())),
            affine: Some((a, b)),
        }
    }

    /// The identity on `R^n`.
    pub fn identity(n: usize) -> Self {
        SmoothMap::affine(DMatrix::identity(n, n), DVector::zeros(n))
    }

    /// The shifted map `x -> G(x) + u` (Rockafellian perturbations).
    pub fn shifted(&self, u: &DVector<f64>) -> Self {
        assert_eq!(u.len(), self.m, "shift dimension");
        if let Some((a, b)) = &self.affine {
            return SmoothMap::affine(a.clone(), b + u);
        }
        let base = self.clone();
        let u = u.clone();
        let jac_base = self.clone();
        let wh_base = self.clone();
        SmoothMap {
            n: self.n,
            m: self.m,
            value: Arc::new(move |x| base.value(x) + &u),
            jacobian: Some(Arc::new(move |x| jac_base.jacobian(x))),
            weighted_hessian: Some(Arc::new(move |x, y| wh_base.weighted_hessian(x, y))),
            affine: None,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.n
    }

    pub fn output_dim(&self) -> usize {
        self.m
    }

    /// `(A, b)` when the map was registered as `G(x) = A x + b`.
    pub fn affine_data(&self) -> Option<(&DMatrix<f64>, &DVector<f64>)> {
        self.affine.as_ref().map(|(a, b)| (a, b))
    }

    pub fn value(&self, x: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(x.len(), self.n);
        (self.value)(x)
    }

    /// Analytic Jacobian when registered, central finite differences with
    /// step `1e-6 * max(1,|x_i|)` otherwise.
    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        if let Some(j) = &self.jacobian {
            return j(x);
        }
        let mut jac = DMatrix::zeros(self.m, self.n);
        for i in 0..self.n {
            let hstep = 1e-6 * x[i].abs().max(1.0);
            let mut xp = x.clone();
            xp[i] += hstep;
            let mut xm = x.clone();
            xm[i] -= hstep;
            let col = ((self.value)(&xp) - (self.value)(&xm)) / (2.0 * hstep);
            jac.set_column(i, &col);
        }
        jac
    }

    /// `grad^2 <y, G(.)>` at `x`; analytic when registered, otherwise central
    /// differences of the Jacobian.
    pub fn weighted_hessian(&self, x: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64> {
        if let Some(wh) = &self.weighted_hessian {
            return wh(x, y);
        }
        let mut hess = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let hstep = 1e-5 * x[i].abs().max(1.0);
            let mut xp = x.clone();
            xp[i] += hstep;
            let mut xm = x.clone();
            xm[i] -= hstep;
            let col = (self.jacobian(&xp).transpose() * y - self.jacobian(&xm).transpose() * y)
                / (2.0 * hstep);
            hess.set_column(i, &col);
        }
        // symmetrize the finite-difference noise away
        0.5 * (&hess + hess.transpose())
    }

    /// Max relative disagreement between the registered Jacobian and central
    /// finite differences over the given sample points.
    pub fn jacobian_consistency(&self, samples: &[DVector<f64>]) -> f64 {
        let mut worst = 0.0f64;
        for x in samples {
            let jac = self.jacobian(x);
            let mut fd = DMatrix::zeros(self.m, self.n);
            for i in 0..self.n {
                let hstep = 1e-6 * x[i].abs().max(1.0);
                let mut xp = x.clone();
                xp[i] += hstep;
                let mut xm = x.clone();
                xm[i] -= hstep;
                fd.set_column(i, &(((self.value)(&xp) - (self.value)(&xm)) / (2.0 * hstep)));
            }
            let scale = 1.0 + crate::linalg::amax(&jac);
            worst = worst.max(crate::linalg::amax(&(&jac - &fd)) / scale);
        }
        worst
    }
}

/// The problem data `(X, G, h)`.
#[derive(Debug, Clone)]
pub struct CompositeProblem {
    domain: Polyhedron,
    map: SmoothMap,
    penalty: PlqFunction,
}

/// A candidate stationary triple with the blockwise residual of
/// `0 in Phi(x,y,z)`.
#[derive(Debug, Clone)]
pub struct StationarityTriple {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub z: DVector<f64>,
    /// `||G(x) - z||`
    pub r_g: f64,
    /// `dist(z - Qy, N_Y(y))`
    pub r_y: f64,
    /// `dist(-grad G(x)^T y, N_X(x))`
    pub r_x: f64,
    /// Euclidean norm of the three parts; `+inf` when an empty-cone marker
    /// was hit.
    pub residual: f64,
}

/// Chain-rule output at a point.
#[derive(Debug, Clone)]
pub struct ChainSubgradient {
    /// `grad G(x)^T y` for the argmin representative `y`.
    pub representative: DVector<f64>,
    /// Whether the generating QP certified a unique multiplier.
    pub unique: bool,
    /// The multiplier `y` itself.
    pub multiplier: DVector<f64>,
    /// Certified verdict for the chain-rule qualification
    /// `y in N_domh(G(x)), grad G(x)^T y = 0  =>  y = 0`.
    pub qualification_ok: bool,
    /// Verdict for the optimality-condition qualification (the variant with
    /// `-grad G(x)^T y in N_X(x)`) in the sub-cases where it is certifiable:
    /// `Some(true)` when `N_domh(G(x)) = {0}`, mirrors `qualification_ok`
    /// when `X` has no constraint rows, `None` otherwise.
    pub qualification_optimality: Option<bool>,
}

impl CompositeProblem {
    pub fn new(
        domain: Polyhedron,
        map: SmoothMap,
        penalty: PlqFunction,
    ) -> Result<Self, CompositeError> {
        if domain.dim() != map.input_dim() {
            return Err(CompositeError::DimensionMismatch {
                expected: domain.dim(),
                got: map.input_dim(),
            });
        }
        if map.output_dim() != penalty.dim() {
            return Err(CompositeError::DimensionMismatch {
                expected: penalty.dim(),
                got: map.output_dim(),
            });
        }
        if qp::feasible_point(&domain)?.is_none() {
            return Err(CompositeError::EmptyX);
        }
        Ok(CompositeProblem { domain, map, penalty })
    }

    pub fn domain(&self) -> &Polyhedron {
        &self.domain
    }

    pub fn map(&self) -> &SmoothMap {
        &self.map
    }

    pub fn penalty(&self) -> &PlqFunction {
        &self.penalty
    }

    pub fn input_dim(&self) -> usize {
        self.map.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.map.output_dim()
    }

    /// Same `(X, G)` with a different penalty (approximation schedules).
    pub fn with_penalty(&self, penalty: PlqFunction) -> Result<Self, CompositeError> {
        if penalty.dim() != self.map.output_dim() {
            return Err(CompositeError::DimensionMismatch {
                expected: self.map.output_dim(),
                got: penalty.dim(),
            });
        }
        Ok(CompositeProblem { domain: self.domain.clone(), map: self.map.clone(), penalty })
    }

    /// `phi(x) = i_X(x) + h(G(x))`.
    pub fn phi(&self, x: &DVector<f64>) -> Result<ExtReal, CompositeError> {
        if x.len() != self.input_dim() {
            return Err(CompositeError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        if !self.domain.contains(x, ACTIVE_TOL) {
            return Ok(ExtReal::PosInf);
        }
        Ok(self.penalty.eval(&self.map.value(x))?)
    }

    /// Chain-rule subgradient with a certified qualification verdict.
    pub fn chain_subgradient(&self, x: &DVector<f64>) -> Result<ChainSubgradient, CompositeError> {
        if !self.phi(x)?.is_finite() {
            return Err(CompositeError::NotInDomain);
        }
        let z = self.map.value(x);
        let jac = self.map.jacobian(x);

        // qualification cone: N_domh(z) with grad G^T y = 0 appended
        let dom_cone = self.penalty.domain_normal_cone(&z);
        let (a_eq, _) = dom_cone.eq_rows();
        let (d, _) = dom_cone.ineq_rows();
        let m = self.output_dim();
        let n = self.input_dim();
        let mut eq = DMatrix::zeros(a_eq.nrows() + n, m);
        for i in 0..a_eq.nrows() {
            eq.set_row(i, &a_eq.row(i));
        }
        for i in 0..n {
            eq.set_row(a_eq.nrows() + i, &jac.column(i).transpose());
        }
        let qual_cone = polyhedra::homogeneous_cone(&eq, d);
        let qualification_ok = qp::cone_max_abs_coordinate(&qual_cone)? <= 1e-7;

        let dom_trivial = qp::cone_max_abs_coordinate(&dom_cone)? <= 1e-7;
        let qualification_optimality = if dom_trivial {
            Some(true)
        } else if self.domain.num_eq() == 0 && self.domain.num_ineq() == 0 {
            // N_X = {0} everywhere, the two conditions coincide
            Some(qualification_ok)
        } else {
            None
        };

        let info = match self.penalty.subgradients(&z)? {
            Subgradients::At(info) => info,
            Subgradients::Empty => return Err(CompositeError::NotInDomain),
        };
        Ok(ChainSubgradient {
            representative: jac.transpose() * &info.representative,
            unique: info.unique,
            multiplier: info.representative,
            qualification_ok,
            qualification_optimality,
        })
    }

    /// Blockwise residual of `0 in Phi(x,y,z)`. Points up to `1e-8` outside
    /// `X` are projected first; farther out the empty-cone convention yields
    /// an infinite residual, as it does for `y` outside `Y`.
    pub fn stationarity_residual(
        &self,
        x: &DVector<f64>,
        y: &DVector<f64>,
        z: &DVector<f64>,
    ) -> Result<StationarityTriple, CompositeError> {
        let (n, m) = (self.input_dim(), self.output_dim());
        if x.len() != n {
            return Err(CompositeError::DimensionMismatch { expected: n, got: x.len() });
        }
        if y.len() != m || z.len() != m {
            return Err(CompositeError::DimensionMismatch { expected: m, got: y.len() });
        }
        let infinite = |x: DVector<f64>, y: DVector<f64>, z: DVector<f64>| StationarityTriple {
            x,
            y,
            z,
            r_g: f64::INFINITY,
            r_y: f64::INFINITY,
            r_x: f64::INFINITY,
            residual: f64::INFINITY,
        };
        let x_eval = if self.domain.contains(x, 0.0) {
            x.clone()
        } else if self.domain.contains(x, ACTIVE_TOL) {
            qp::project(&self.domain, x)?
        } else {
            return Ok(infinite(x.clone(), y.clone(), z.clone()));
        };

        let gx = self.map.value(&x_eval);
        let r_g = (&gx - z).norm();

        let ny = self.penalty.y_set().normal_cone(y, ACTIVE_TOL);
        if ny.is_empty_marker() {
            return Ok(infinite(x_eval, y.clone(), z.clone()));
        }
        let r_y = polyhedra::dist_to_cone(&ny, &(z - self.penalty.q() * y));

        let nx = self.domain.normal_cone(&x_eval, ACTIVE_TOL);
        let jac = self.map.jacobian(&x_eval);
        let r_x = polyhedra::dist_to_cone(&nx, &(-(jac.transpose() * y)));

        let residual = (r_g * r_g + r_y * r_y + r_x * r_x).sqrt();
        Ok(StationarityTriple { x: x_eval, y: y.clone(), z: z.clone(), r_g, r_y, r_x, residual })
    }

    /// `z = G(x)` and a subgradient `y` at `z`: this zeroes the first
    /// residual block exactly and the second up to solver tolerance. Among
    /// the subgradients (a polyhedral face when the argmin is not unique),
    /// the one minimizing the third block `dist(-grad G^T y, N_X(x))` is
    /// selected by one more convex QP, so the recovered triple is as
    /// stationary as the point allows.
    pub fn multiplier_recovery(
        &self,
        x: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>), CompositeError> {
        if !self.phi(x)?.is_finite() {
            return Err(CompositeError::NotInDomain);
        }
        let z = self.map.value(x);
        let info = match self.penalty.subgradients(&z)? {
            Subgradients::At(info) => info,
            Subgradients::Empty => return Err(CompositeError::NotInDomain),
        };
        if info.unique {
            return Ok((info.representative, z));
        }
        match self.best_face_multiplier(x, &z, &info.representative) {
            Ok(y) => Ok((y, z)),
            // fall back to the representative on any solver hiccup
            Err(_) => Ok((info.representative, z)),
        }
    }

    /// Minimize `||grad G(x)^T y + N_X(x)-part||` over the solution face
    /// `{y in Y : Qy = Qy0, <g,y> = <g,y0>}` of the subgradient QP.
    fn best_face_multiplier(
        &self,
        x: &DVector<f64>,
        z: &DVector<f64>,
        y0: &DVector<f64>,
    ) -> Result<DVector<f64>, CompositeError> {
        let m = self.output_dim();
        let n = self.input_dim();
        let q = self.penalty.q();
        let yset = self.penalty.y_set();
        let jac = self.map.jacobian(x);

        // face rows: Y rows plus the solution-set equalities, scaled to unit
        // norm and dropped when vacuous
        let (ya, yb) = yset.eq_rows();
        let (yd, ydr) = yset.ineq_rows();
        let grad = q * y0 - z;
        let mut eq_rows: Vec<(DVector<f64>, f64)> = Vec::new();
        for i in 0..ya.nrows() {
            eq_rows.push((ya.row(i).transpose(), yb[i]));
        }
        let qy0 = q * y0;
        for i in 0..m {
            let row = q.row(i).transpose();
            let norm = row.norm();
            if norm > 1e-12 * (1.0 + crate::linalg::amax(q)) {
                eq_rows.push((row / norm, qy0[i] / norm));
            }
        }
        let gnorm = grad.norm();
        if gnorm > 1e-9 * (1.0 + z.norm()) {
            eq_rows.push((&grad / gnorm, grad.dot(y0) / gnorm));
        }

        // variables (y, a, b): a spans the X equalities, b >= 0 weights the
        // active X inequalities; minimize ||J^T y + A_X^T a + D_act^T b||^2
        let (xa, _) = self.domain.eq_rows();
        let (xd, _) = self.domain.ineq_rows();
        let active = self.domain.active_set(x, ACTIVE_TOL);
        let k = xa.nrows();
        let act = active.len();
        let total = m + k + act;
        let mut cols = DMatrix::zeros(n, total);
        let jt = jac.transpose(); // n x m: columns indexed by output coordinate
        for j in 0..m {
            cols.set_column(j, &jt.column(j));
        }
        for r in 0..k {
            cols.set_column(m + r, &xa.row(r).transpose());
        }
        for (t, &i) in active.iter().enumerate() {
            cols.set_column(m + k + t, &xd.row(i).transpose());
        }
        let h = cols.transpose() * &cols;
        let c = DVector::zeros(total);

        let mut eq = DMatrix::zeros(eq_rows.len(), total);
        let mut eq_rhs = DVector::zeros(eq_rows.len());
        for (i, (row, rhs)) in eq_rows.iter().enumerate() {
            for j in 0..m {
                eq[(i, j)] = row[j];
            }
            eq_rhs[i] = *rhs;
        }
        let mut ineq = DMatrix::zeros(yd.nrows() + act, total);
        let mut ineq_rhs = DVector::zeros(yd.nrows() + act);
        for i in 0..yd.nrows() {
            for j in 0..m {
                ineq[(i, j)] = yd[(i, j)];
            }
            ineq_rhs[i] = ydr[i];
        }
        for t in 0..act {
            ineq[(yd.nrows() + t, m + k + t)] = -1.0;
        }
        let feas = Polyhedron::new(eq, eq_rhs, ineq, ineq_rhs)
            .map_err(|_| CompositeError::NotInDomain)?;
        let qp_prob = qp::QpProblem::new(h, c, feas)?;
        let mut start = DVector::zeros(total);
        for j in 0..m {
            start[j] = y0[j];
        }
        let sol = match qp::solve_from(&qp_prob, &start) {
            Ok(s) => s,
            Err(qp::QpError::InfeasibleStart) => qp::solve(&qp_prob)?,
            Err(e) => return Err(e.into()),
        };
        if sol.status != qp::QpStatus::Optimal {
            return Err(CompositeError::NotInDomain);
        }
        Ok(DVector::from_fn(m, |j, _| sol.x[j]))
    }

    /// Recovered-multiplier residual at `x` in one call.
    pub fn residual_at(&self, x: &DVector<f64>) -> Result<StationarityTriple, CompositeError> {
        let (y, z) = self.multiplier_recovery(x)?;
        self.stationarity_residual(x, &y, &z)
    }
}
