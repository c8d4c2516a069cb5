//! The piecewise linear-quadratic penalty
//!
//! ```text
//!     h(z) = sup { <y,z> - 1/2 <y,Qy> : y in Y },
//! ```
//!
//! with `Y` a nonempty polyhedron and `Q` symmetric positive semidefinite.
//! `h` is proper, lsc, and convex by construction. It is finite at `z` exactly
//! when no recession direction `d` of `Y` with `Qd = 0` has `<d,z> > 0`; the
//! implementation certifies domain membership with an LP over that cone
//! rather than guessing from large values.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::ext::ExtReal;
use crate::linalg;
use crate::polyhedra::Polyhedron;
use crate::qp::{self, QpError, QpProblem, QpSolution, QpStatus};

#[derive(Debug, Error)]
pub enum PlqError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("Y must be nonempty")]
    EmptyY,
    #[error("Q must be symmetric positive semidefinite")]
    BadQ,
    #[error("qp solver failure: {0}")]
    Solver(#[from] QpError),
    #[error("dual program was unbounded; h cannot take -inf")]
    UnexpectedUnbounded,
}

/// The pair `(Y, Q)` defining `h`.
#[derive(Debug, Clone)]
pub struct PlqFunction {
    y_set: Polyhedron,
    q: DMatrix<f64>,
}

/// Factorized description `Y = {y | A^T y <= b}`, `Q = D J^{-1} D^T` used by
/// the dual evaluation route and the proximal subproblems.
#[derive(Debug, Clone)]
pub struct DualForm {
    /// `m x q`; columns are the inequality normals of `Y`.
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    /// Symmetric PSD square root of `Q`.
    pub d: DMatrix<f64>,
    /// Always the identity here (`Q = D I D`).
    pub j: DMatrix<f64>,
}

/// Result of the subgradient computation, with the paper's convention that
/// the set is empty off the domain.
#[derive(Debug, Clone)]
pub enum Subgradients {
    Empty,
    At(SubgradientInfo),
}

impl Subgradients {
    pub fn representative(&self) -> Option<&DVector<f64>> {
        match self {
            Subgradients::Empty => None,
            Subgradients::At(info) => Some(&info.representative),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SubgradientInfo {
    /// A point of `argmin_{y in Y} 1/2 <y,Qy> - <y,z>` (deterministic
    /// tie-break from the active-set path).
    pub representative: DVector<f64>,
    /// True iff the QP certifies a unique optimum.
    pub unique: bool,
    /// The full argmin description.
    pub solution: QpSolution,
}

impl PlqFunction {
    pub fn new(y_set: Polyhedron, q: DMatrix<f64>) -> Result<Self, PlqError> {
        let m = y_set.dim();
        if q.nrows() != m || q.ncols() != m {
            return Err(PlqError::DimensionMismatch { expected: m, got: q.nrows() });
        }
        if !linalg::is_symmetric(&q, 1e-12 * (1.0 + linalg::amax(&q))) {
            return Err(PlqError::BadQ);
        }
        if linalg::min_eigenvalue(&q) < -1e-10 * (1.0 + linalg::amax(&q)) {
            return Err(PlqError::BadQ);
        }
        if qp::feasible_point(&y_set)?.is_none() {
            return Err(PlqError::EmptyY);
        }
        Ok(PlqFunction { y_set, q })
    }

    /// `h = |.|` on the reals: `Y = [-1,1]`, `Q = 0`.
    pub fn abs() -> Self {
        PlqFunction::new(
            Polyhedron::interval(-1.0, 1.0).expect("interval"),
            DMatrix::zeros(1, 1),
        )
        .expect("abs is well-formed")
    }

    pub fn y_set(&self) -> &Polyhedron {
        &self.y_set
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn dim(&self) -> usize {
        self.y_set.dim()
    }

    /// The argmin QP of the subgradient formula at `z`.
    fn argmin_qp(&self, z: &DVector<f64>) -> Result<QpProblem, PlqError> {
        Ok(QpProblem::new(self.q.clone(), -z, self.y_set.clone())?)
    }

    /// The cone `{d in Y^inf | Qd = 0}` whose support of `z` decides
    /// membership of `z` in `dom h`.
    fn domain_cone(&self) -> Polyhedron {
        let m = self.dim();
        let rec = self.y_set.recession_cone_unchecked();
        let (a_eq, _) = rec.eq_rows();
        let (d, _) = rec.ineq_rows();
        let mut eq = DMatrix::zeros(a_eq.nrows() + m, m);
        for i in 0..a_eq.nrows() {
            eq.set_row(i, &a_eq.row(i));
        }
        for i in 0..m {
            eq.set_row(a_eq.nrows() + i, &self.q.row(i));
        }
        crate::polyhedra::homogeneous_cone(&eq, d)
    }

    /// Certified test for `z in dom h`: maximize `<d,z>` over the domain cone
    /// intersected with the unit box; a positive optimum certifies `+inf`.
    pub fn in_domain(&self, z: &DVector<f64>) -> Result<bool, PlqError> {
        let cone = self.domain_cone();
        let boxed = intersect_unit_box(&cone);
        let lp = QpProblem::lp(-z.clone(), boxed)?;
        let sol = qp::solve_from(&lp, &DVector::zeros(self.dim()))?;
        let reach = -sol.obj;
        Ok(reach <= 1e-9 * (1.0 + linalg::vamax(z)))
    }

    /// `h(z)`, `+inf` included.
    pub fn eval(&self, z: &DVector<f64>) -> Result<ExtReal, PlqError> {
        if z.len() != self.dim() {
            return Err(PlqError::DimensionMismatch { expected: self.dim(), got: z.len() });
        }
        if !self.in_domain(z)? {
            return Ok(ExtReal::PosInf);
        }
        let sol = qp::solve(&self.argmin_qp(z)?)?;
        match sol.status {
            QpStatus::Optimal => Ok(ExtReal::Finite(-sol.obj)),
            // the domain certificate said finite; an unbounded argmin QP can
            // only be numerical noise at the certificate tolerance
            QpStatus::Unbounded => Ok(ExtReal::PosInf),
            QpStatus::Infeasible => Err(PlqError::EmptyY),
        }
    }

    /// `∂h(z) = argmin_{y in Y} 1/2 <y,Qy> - <y,z>` for `z in dom h`,
    /// the empty marker otherwise.
    pub fn subgradients(&self, z: &DVector<f64>) -> Result<Subgradients, PlqError> {
        if z.len() != self.dim() {
            return Err(PlqError::DimensionMismatch { expected: self.dim(), got: z.len() });
        }
        if !self.in_domain(z)? {
            return Ok(Subgradients::Empty);
        }
        let qp_prob = self.argmin_qp(z)?;
        let sol = qp::solve(&qp_prob)?;
        if sol.status != QpStatus::Optimal {
            return Ok(Subgradients::Empty);
        }
        let unique = qp::certify_unique(&qp_prob, &sol)?;
        Ok(Subgradients::At(SubgradientInfo {
            representative: sol.x.clone(),
            unique,
            solution: sol,
        }))
    }

    /// `N_{dom h}(z) = {y in Y^inf | Qy = 0, <y,z> = 0}` as a polyhedron.
    /// Equals `{0}` whenever `Y` is bounded or `Q` is positive definite.
    pub fn domain_normal_cone(&self, z: &DVector<f64>) -> Polyhedron {
        let m = self.dim();
        let cone = self.domain_cone();
        let (a_eq, _) = cone.eq_rows();
        let (d, _) = cone.ineq_rows();
        let mut eq = DMatrix::zeros(a_eq.nrows() + 1, m);
        for i in 0..a_eq.nrows() {
            eq.set_row(i, &a_eq.row(i));
        }
        eq.set_row(a_eq.nrows(), &z.transpose());
        crate::polyhedra::homogeneous_cone(&eq, d)
    }

    /// Inequality-only description of `Y` plus the square-root factorization
    /// of `Q` (equalities split into opposing inequalities; `D = Q^{1/2}`,
    /// `J = I`, so `Q = D J^{-1} D^T` holds for any PSD `Q`).
    pub fn dual_form(&self) -> DualForm {
        let m = self.dim();
        let (a_eq, b_eq) = self.y_set.eq_rows();
        let (di, d_rhs) = self.y_set.ineq_rows();
        let q_total = di.nrows() + 2 * a_eq.nrows();
        let mut a = DMatrix::zeros(m, q_total);
        let mut b = DVector::zeros(q_total);
        for i in 0..di.nrows() {
            for j in 0..m {
                a[(j, i)] = di[(i, j)];
            }
            b[i] = d_rhs[i];
        }
        for i in 0..a_eq.nrows() {
            for j in 0..m {
                a[(j, di.nrows() + 2 * i)] = a_eq[(i, j)];
                a[(j, di.nrows() + 2 * i + 1)] = -a_eq[(i, j)];
            }
            b[di.nrows() + 2 * i] = b_eq[i];
            b[di.nrows() + 2 * i + 1] = -b_eq[i];
        }
        DualForm {
            a,
            b,
            d: linalg::sym_sqrt(&self.q),
            j: DMatrix::identity(m, m),
        }
    }

    /// Evaluate `h` through the dual program
    /// `inf { <b,v> + 1/2 <w,Jw> : Av + Dw = z, v >= 0 }`;
    /// infeasibility corresponds exactly to `h(z) = +inf`.
    pub fn eval_via_dual(&self, z: &DVector<f64>) -> Result<ExtReal, PlqError> {
        if z.len() != self.dim() {
            return Err(PlqError::DimensionMismatch { expected: self.dim(), got: z.len() });
        }
        let form = self.dual_form();
        let sol = solve_dual_program(&form, z)?;
        match sol.status {
            QpStatus::Optimal => Ok(ExtReal::Finite(sol.obj)),
            QpStatus::Infeasible => Ok(ExtReal::PosInf),
            QpStatus::Unbounded => Err(PlqError::UnexpectedUnbounded),
        }
    }

    /// Moreau-type smoothing: same `Y`, `Q` replaced by `Q + I/nu`. The
    /// smoothed function minorizes `h` pointwise and is differentiable
    /// wherever the argmin is unique.
    pub fn moreau_smoothed(&self, nu: u32) -> PlqFunction {
        assert!(nu >= 1, "smoothing index must be at least 1");
        let m = self.dim();
        let q = &self.q + DMatrix::<f64>::identity(m, m) / (nu as f64);
        PlqFunction { y_set: self.y_set.clone(), q }
    }
}

/// Solve the dual program of `h` at `z`: variables `(v, w)`, equalities
/// `Av + Dw = z`, inequalities `v >= 0`.
pub fn solve_dual_program(form: &DualForm, z: &DVector<f64>) -> Result<QpSolution, PlqError> {
    let m = form.a.nrows();
    let qn = form.a.ncols();
    let total = qn + m;
    let mut h = DMatrix::zeros(total, total);
    for i in 0..m {
        for j in 0..m {
            h[(qn + i, qn + j)] = form.j[(i, j)];
        }
    }
    let mut c = DVector::zeros(total);
    for i in 0..qn {
        c[i] = form.b[i];
    }
    let mut eq = DMatrix::zeros(m, total);
    for r in 0..m {
        for i in 0..qn {
            eq[(r, i)] = form.a[(r, i)];
        }
        for i in 0..m {
            eq[(r, qn + i)] = form.d[(r, i)];
        }
    }
    let mut ineq = DMatrix::zeros(qn, total);
    for i in 0..qn {
        ineq[(i, i)] = -1.0;
    }
    let feas = Polyhedron::new(eq, z.clone(), ineq, DVector::zeros(qn))
        .expect("dual program polyhedron is well-formed");
    Ok(qp::solve(&QpProblem::new(h, c, feas)?)?)
}

/// The polyhedron intersected with the unit box (used to bound cone LPs).
pub(crate) fn intersect_unit_box(p: &Polyhedron) -> Polyhedron {
    let n = p.dim();
    let (a_eq, b_eq) = p.eq_rows();
    let (d, d_rhs) = p.ineq_rows();
    let mut di = DMatrix::zeros(d.nrows() + 2 * n, n);
    let mut rhs = DVector::zeros(d.nrows() + 2 * n);
    for i in 0..d.nrows() {
        di.set_row(i, &d.row(i));
        rhs[i] = d_rhs[i];
    }
    for j in 0..n {
        di[(d.nrows() + 2 * j, j)] = 1.0;
        rhs[d.nrows() + 2 * j] = 1.0;
        di[(d.nrows() + 2 * j + 1, j)] = -1.0;
        rhs[d.nrows() + 2 * j + 1] = 1.0;
    }
    Polyhedron::new(a_eq.clone(), b_eq.clone(), di, rhs).expect("boxed polyhedron")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn vecn(s: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(s)
    }

    fn lcg(state: &mut u64) -> f64 {
        *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*state >> 11) as f64) / ((1u64 << 53) as f64)
    }

    #[test]
    fn abs_eval() {
        let h = PlqFunction::abs();
        assert_eq!(h.eval(&vecn(&[-3.0])).unwrap(), ExtReal::Finite(3.0));
        assert_eq!(h.eval(&vecn(&[0.0])).unwrap(), ExtReal::Finite(0.0));
        assert_relative_eq!(h.eval(&vecn(&[2.5])).unwrap().finite().unwrap(), 2.5, epsilon = 1e-9);
    }

    #[test]
    fn nlp_penalty_eval() {
        // Y = {1} x R: h(z) = z0 if z1 = 0, +inf otherwise
        let y = Polyhedron::nlp_multiplier_set(1, 0).unwrap();
        let h = PlqFunction::new(y, DMatrix::zeros(2, 2)).unwrap();
        assert_eq!(h.eval(&vecn(&[5.0, 0.0])).unwrap(), ExtReal::Finite(5.0));
        assert_eq!(h.eval(&vecn(&[5.0, 0.1])).unwrap(), ExtReal::PosInf);
        assert_eq!(h.eval(&vecn(&[5.0, -0.1])).unwrap(), ExtReal::PosInf);
    }

    #[test]
    fn quadratic_penalty_1d() {
        // Y = [0,1], Q = [2]: h(1) = sup y - y^2 = 1/4 at y = 1/2
        let h = PlqFunction::new(
            Polyhedron::interval(0.0, 1.0).unwrap(),
            DMatrix::from_element(1, 1, 2.0),
        )
        .unwrap();
        let v = h.eval(&vecn(&[1.0])).unwrap().finite().unwrap();
        assert_relative_eq!(v, 0.25, epsilon = 1e-9);
        // grid oracle
        let oracle = (0..=1000)
            .map(|i| {
                let y = i as f64 / 1000.0;
                y - y * y
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert_relative_eq!(v, oracle, epsilon = 1e-6);
    }

    #[test]
    fn abs_subgradients() {
        let h = PlqFunction::abs();
        match h.subgradients(&vecn(&[0.0])).unwrap() {
            Subgradients::At(info) => {
                assert_relative_eq!(info.representative[0], 0.0, epsilon = 1e-9);
                assert!(!info.unique);
            }
            Subgradients::Empty => panic!("0 is in dom |.|"),
        }
        match h.subgradients(&vecn(&[2.0])).unwrap() {
            Subgradients::At(info) => {
                assert_relative_eq!(info.representative[0], 1.0, epsilon = 1e-9);
                assert!(info.unique);
            }
            Subgradients::Empty => panic!(),
        }
    }

    #[test]
    fn free_quadratic_subgradient() {
        // Y = R, Q = [1]: h(z) = z^2/2, gradient z
        let h = PlqFunction::new(Polyhedron::free(1), DMatrix::identity(1, 1)).unwrap();
        match h.subgradients(&vecn(&[3.0])).unwrap() {
            Subgradients::At(info) => {
                assert_relative_eq!(info.representative[0], 3.0, epsilon = 1e-9);
                assert!(info.unique);
            }
            Subgradients::Empty => panic!(),
        }
        assert_relative_eq!(h.eval(&vecn(&[3.0])).unwrap().finite().unwrap(), 4.5, epsilon = 1e-9);
    }

    #[test]
    fn out_of_domain_marker() {
        let y = Polyhedron::nlp_multiplier_set(1, 0).unwrap();
        let h = PlqFunction::new(y, DMatrix::zeros(2, 2)).unwrap();
        assert!(matches!(h.subgradients(&vecn(&[1.0, 0.5])).unwrap(), Subgradients::Empty));
    }

    #[test]
    fn domain_normal_cone_trivial_cases() {
        // bounded Y
        let habs = PlqFunction::abs();
        let cone = habs.domain_normal_cone(&vecn(&[0.3]));
        assert!(qp::cone_max_abs_coordinate(&cone).unwrap() <= 1e-9);
        // positive definite Q
        let hq = PlqFunction::new(Polyhedron::nonneg_orthant(2).unwrap(), DMatrix::identity(2, 2))
            .unwrap();
        let cone = hq.domain_normal_cone(&vecn(&[1.0, 1.0]));
        assert!(qp::cone_max_abs_coordinate(&cone).unwrap() <= 1e-9);
    }

    #[test]
    fn domain_normal_cone_nlp_geometry() {
        // Y = {1} x R, Q = 0, z = (5,0): cone = {0} x R
        let y = Polyhedron::nlp_multiplier_set(1, 0).unwrap();
        let h = PlqFunction::new(y, DMatrix::zeros(2, 2)).unwrap();
        let cone = h.domain_normal_cone(&vecn(&[5.0, 0.0]));
        assert!(cone.contains(&vecn(&[0.0, 1.0]), 1e-12));
        assert!(cone.contains(&vecn(&[0.0, -7.0]), 1e-12));
        assert!(!cone.contains(&vecn(&[0.1, 0.0]), 1e-9));
    }

    #[test]
    fn dual_form_factorizations() {
        let habs = PlqFunction::abs();
        let f = habs.dual_form();
        assert_eq!(linalg::amax(&f.d), 0.0);
        assert_relative_eq!(f.j[(0, 0)], 1.0);
        let hq = PlqFunction::new(
            Polyhedron::free(2),
            DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]),
        )
        .unwrap();
        let f = hq.dual_form();
        assert_relative_eq!(f.d[(0, 0)], 2.0, epsilon = 1e-12);
        assert_relative_eq!(f.d[(1, 1)], 1.0, epsilon = 1e-12);
        // random PD reconstruction
        let mut state = 11u64;
        let r = DMatrix::from_fn(3, 3, |_, _| lcg(&mut state) * 2.0 - 1.0);
        let q = &r.transpose() * &r + DMatrix::<f64>::identity(3, 3) * 0.1;
        let h = PlqFunction::new(Polyhedron::free(3), q.clone()).unwrap();
        let f = h.dual_form();
        let qr = &f.d * &f.j * f.d.transpose();
        assert!(linalg::amax(&(qr - q)) <= 1e-9);
    }

    #[test]
    fn dual_form_membership_agrees() {
        // {y | A^T y <= b} must agree with Y on sampled points
        let y = Polyhedron::simplex(3).unwrap();
        let h = PlqFunction::new(y.clone(), DMatrix::zeros(3, 3)).unwrap();
        let f = h.dual_form();
        let mut state = 23u64;
        for _ in 0..1000 {
            let p = vecn(&[
                lcg(&mut state) * 2.0 - 0.5,
                lcg(&mut state) * 2.0 - 0.5,
                lcg(&mut state) * 2.0 - 0.5,
            ]);
            let in_y = y.contains(&p, 1e-9);
            let atp = f.a.transpose() * &p;
            let in_dual = (0..f.b.len()).all(|i| atp[i] <= f.b[i] + 1e-9);
            assert_eq!(in_y, in_dual);
        }
    }

    #[test]
    fn dual_eval_matches_primal() {
        let habs = PlqFunction::abs();
        assert_eq!(habs.eval_via_dual(&vecn(&[-3.0])).unwrap(), ExtReal::Finite(3.0));
        // out of domain: infeasible iff +inf
        let y = Polyhedron::nlp_multiplier_set(1, 0).unwrap();
        let h = PlqFunction::new(y, DMatrix::zeros(2, 2)).unwrap();
        assert_eq!(h.eval_via_dual(&vecn(&[2.0, -1.0])).unwrap(), ExtReal::PosInf);
        let v = h.eval_via_dual(&vecn(&[2.0, 0.0])).unwrap().finite().unwrap();
        assert_relative_eq!(v, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn dual_eval_random_cross_check() {
        // CVaR-like Y, Q = 0 and a PD-Q variant
        let m = 3;
        let p = [0.5, 0.3, 0.2];
        let alpha = 0.5;
        let y = {
            let mut d = DMatrix::zeros(2 * m, m);
            let mut v = DVector::zeros(2 * m);
            for i in 0..m {
                d[(i, i)] = 1.0 - alpha;
                v[i] = p[i];
                d[(m + i, i)] = -1.0;
            }
            Polyhedron::new(
                DMatrix::from_element(1, m, 1.0),
                DVector::from_element(1, 1.0),
                d,
                v,
            )
            .unwrap()
        };
        for pd in [false, true] {
            let q = if pd {
                DMatrix::<f64>::identity(m, m) * 0.7
            } else {
                DMatrix::zeros(m, m)
            };
            let h = PlqFunction::new(y.clone(), q).unwrap();
            let mut state = 99u64;
            for _ in 0..50 {
                let z = DVector::from_fn(m, |_, _| lcg(&mut state) * 4.0 - 2.0);
                let a = h.eval(&z).unwrap().finite().expect("bounded Y: finite");
                let b = h.eval_via_dual(&z).unwrap().finite().expect("finite");
                assert!((a - b).abs() <= 1e-7, "primal {a} vs dual {b}");
            }
        }
    }

    #[test]
    fn vertex_oracle_bounded_polyhedral() {
        // Q = 0, bounded Y: h(z) = max over vertices of <v,z>
        let y = Polyhedron::box_set(&[0.0, -1.0], &[2.0, 1.0]).unwrap();
        let h = PlqFunction::new(y.clone(), DMatrix::zeros(2, 2)).unwrap();
        let verts = y.vertices().unwrap();
        let mut state = 5u64;
        for _ in 0..100 {
            let z = vecn(&[lcg(&mut state) * 4.0 - 2.0, lcg(&mut state) * 4.0 - 2.0]);
            let hv = h.eval(&z).unwrap().finite().unwrap();
            let vmax = verts.iter().map(|v| v.dot(&z)).fold(f64::NEG_INFINITY, f64::max);
            assert!((hv - vmax).abs() <= 1e-9, "{hv} vs vertex max {vmax}");
        }
    }

    #[test]
    fn moreau_huber() {
        // h = |.|, nu = 1: Huber with unit threshold
        let h1 = PlqFunction::abs().moreau_smoothed(1);
        let cases = [(0.0, 0.0), (0.5, 0.125), (1.0, 0.5), (2.0, 1.5), (-3.0, 2.5)];
        for (z, want) in cases {
            let got = h1.eval(&vecn(&[z])).unwrap().finite().unwrap();
            assert_relative_eq!(got, want, epsilon = 1e-9);
        }
    }

    #[test]
    fn moreau_minorizes_and_converges() {
        let h = PlqFunction::abs();
        let mut state = 77u64;
        for _ in 0..50 {
            let z = vecn(&[lcg(&mut state) * 6.0 - 3.0]);
            let hv = h.eval(&z).unwrap().finite().unwrap();
            for nu in [1u32, 4, 16, 64] {
                let hn = h.moreau_smoothed(nu).eval(&z).unwrap().finite().unwrap();
                assert!(hn <= hv + 1e-12);
                // sup_{y in [-1,1]} ||y||^2 / (2 nu) bound for bounded Y
                assert!(hv - hn <= 1.0 / (2.0 * nu as f64) + 1e-12);
            }
        }
    }

    #[test]
    fn moreau_keeps_uniqueness() {
        let h = PlqFunction::new(Polyhedron::interval(-1.0, 1.0).unwrap(), DMatrix::identity(1, 1))
            .unwrap();
        for z in [-0.5, 0.0, 0.9] {
            let before = match h.subgradients(&vecn(&[z])).unwrap() {
                Subgradients::At(i) => i.unique,
                _ => false,
            };
            let after = match h.moreau_smoothed(3).subgradients(&vecn(&[z])).unwrap() {
                Subgradients::At(i) => i.unique,
                _ => false,
            };
            assert!(before && after);
        }
    }

    #[test]
    fn convexity_midpoint_sampling() {
        let h = PlqFunction::new(
            Polyhedron::box_set(&[0.0, 0.0], &[1.0, 2.0]).unwrap(),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.5]),
        )
        .unwrap();
        let mut state = 3u64;
        for _ in 0..50 {
            let a = vecn(&[lcg(&mut state) * 4.0 - 2.0, lcg(&mut state) * 4.0 - 2.0]);
            let b = vecn(&[lcg(&mut state) * 4.0 - 2.0, lcg(&mut state) * 4.0 - 2.0]);
            let mid = (&a + &b) * 0.5;
            let ha = h.eval(&a).unwrap().finite().unwrap();
            let hb = h.eval(&b).unwrap().finite().unwrap();
            let hm = h.eval(&mid).unwrap().finite().unwrap();
            assert!(hm <= 0.5 * ha + 0.5 * hb + 1e-9);
        }
    }

    #[test]
    fn subgradient_inequality() {
        let h = PlqFunction::new(
            Polyhedron::box_set(&[-1.0, -1.0], &[1.0, 1.0]).unwrap(),
            DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0]),
        )
        .unwrap();
        let mut state = 13u64;
        for _ in 0..100 {
            let z = vecn(&[lcg(&mut state) * 4.0 - 2.0, lcg(&mut state) * 4.0 - 2.0]);
            let x = vecn(&[lcg(&mut state) * 4.0 - 2.0, lcg(&mut state) * 4.0 - 2.0]);
            let g = match h.subgradients(&z).unwrap() {
                Subgradients::At(i) => i.representative,
                _ => panic!("real-valued"),
            };
            let hz = h.eval(&z).unwrap().finite().unwrap();
            let hx = h.eval(&x).unwrap().finite().unwrap();
            assert!(hx >= hz + g.dot(&(&x - &z)) - 1e-8);
        }
    }
}
