//! Polyhedral sets in the description `{x | A_e x = b_e, D x <= d}`,
//! membership tests, normal cones, recession cones, and vertex enumeration.
//!
//! One canonical representation keeps the normal-cone code single-path:
//! boxes, simplices, and the other constructors are sugar that lower into
//! equality/inequality rows.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg;

/// Absolute active-set tolerance used across the crate (desk-scale data is
/// order one).
pub const ACTIVE_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum PolyhedronError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("polyhedron data must be finite")]
    NonFiniteData,
    #[error("polyhedron dimension must be at least 1")]
    ZeroDimension,
    #[error("polyhedron is empty")]
    Empty,
    #[error("polyhedron is unbounded")]
    Unbounded,
    #[error("vertex enumeration supports dim <= {max}, got {got}")]
    TooLarge { max: usize, got: usize },
    #[error("inconsistent constructor bounds (lower > upper)")]
    BadBounds,
}

/// A polyhedron `{x in R^dim | A_e x = b_e, D x <= d}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyhedron {
    dim: usize,
    a_eq: DMatrix<f64>,
    b_eq: DVector<f64>,
    d_ineq: DMatrix<f64>,
    d_rhs: DVector<f64>,
}

impl Polyhedron {
    pub fn new(
        a_eq: DMatrix<f64>,
        b_eq: DVector<f64>,
        d_ineq: DMatrix<f64>,
        d_rhs: DVector<f64>,
    ) -> Result<Self, PolyhedronError> {
        let dim = a_eq.ncols().max(d_ineq.ncols());
        if dim == 0 {
            return Err(PolyhedronError::ZeroDimension);
        }
        if a_eq.ncols() != dim && a_eq.nrows() > 0 {
            return Err(PolyhedronError::DimensionMismatch {
                expected: dim,
                got: a_eq.ncols(),
            });
        }
        if d_ineq.ncols() != dim && d_ineq.nrows() > 0 {
            return Err(PolyhedronError::DimensionMismatch {
                expected: dim,
                got: d_ineq.ncols(),
            });
        }
        if a_eq.nrows() != b_eq.len() {
            return Err(PolyhedronError::DimensionMismatch {
                expected: a_eq.nrows(),
                got: b_eq.len(),
            });
        }
        if d_ineq.nrows() != d_rhs.len() {
            return Err(PolyhedronError::DimensionMismatch {
                expected: d_ineq.nrows(),
                got: d_rhs.len(),
            });
        }
        let finite = a_eq.iter().all(|v| v.is_finite())
            && b_eq.iter().all(|v| v.is_finite())
            && d_ineq.iter().all(|v| v.is_finite())
            && d_rhs.iter().all(|v| v.is_finite());
        if !finite {
            return Err(PolyhedronError::NonFiniteData);
        }
        // normalize empty-row matrices to the right width
        let a_eq = if a_eq.nrows() == 0 { DMatrix::zeros(0, dim) } else { a_eq };
        let d_ineq = if d_ineq.nrows() == 0 { DMatrix::zeros(0, dim) } else { d_ineq };
        Ok(Polyhedron { dim, a_eq, b_eq, d_ineq, d_rhs })
    }

    /// All of `R^dim` (no constraints).
    pub fn free(dim: usize) -> Self {
        Polyhedron {
            dim,
            a_eq: DMatrix::zeros(0, dim),
            b_eq: DVector::zeros(0),
            d_ineq: DMatrix::zeros(0, dim),
            d_rhs: DVector::zeros(0),
        }
    }

    /// Box with per-coordinate bounds; an entry may be `-inf`/`+inf`, in which
    /// case no row is emitted for that side.
    pub fn box_set(lower: &[f64], upper: &[f64]) -> Result<Self, PolyhedronError> {
        let dim = lower.len();
        if dim == 0 {
            return Err(PolyhedronError::ZeroDimension);
        }
        if upper.len() != dim {
            return Err(PolyhedronError::DimensionMismatch { expected: dim, got: upper.len() });
        }
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for i in 0..dim {
            if lower[i] > upper[i] {
                return Err(PolyhedronError::BadBounds);
            }
            if lower[i].is_nan() || upper[i].is_nan() {
                return Err(PolyhedronError::NonFiniteData);
            }
            if upper[i].is_finite() {
                let mut r = vec![0.0; dim];
                r[i] = 1.0;
                rows.push(r);
                rhs.push(upper[i]);
            }
            if lower[i].is_finite() {
                let mut r = vec![0.0; dim];
                r[i] = -1.0;
                rows.push(r);
                rhs.push(-lower[i]);
            }
        }
        let d = DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]);
        Polyhedron::new(
            DMatrix::zeros(0, dim),
            DVector::zeros(0),
            d,
            DVector::from_vec(rhs),
        )
    }

    /// One-dimensional interval `[l, u]`; either end may be infinite.
    pub fn interval(l: f64, u: f64) -> Result<Self, PolyhedronError> {
        Polyhedron::box_set(&[l], &[u])
    }

    pub fn nonneg_orthant(dim: usize) -> Result<Self, PolyhedronError> {
        Polyhedron::box_set(&vec![0.0; dim], &vec![f64::INFINITY; dim])
    }

    /// `{y >= 0 | sum y_i = 1}`.
    pub fn simplex(dim: usize) -> Result<Self, PolyhedronError> {
        let base = Polyhedron::nonneg_orthant(dim)?;
        let a = DMatrix::from_element(1, dim, 1.0);
        Polyhedron::new(a, DVector::from_element(1, 1.0), base.d_ineq, base.d_rhs)
    }

    /// The single point `{p}`.
    pub fn singleton(p: &DVector<f64>) -> Result<Self, PolyhedronError> {
        let dim = p.len();
        Polyhedron::new(
            DMatrix::identity(dim, dim),
            p.clone(),
            DMatrix::zeros(0, dim),
            DVector::zeros(0),
        )
    }

    /// The multiplier set `{1} x R^m x [0, inf)^q` of a nonlinear program with
    /// `m` equality and `q` inequality constraints.
    pub fn nlp_multiplier_set(m_eq: usize, q_ineq: usize) -> Result<Self, PolyhedronError> {
        let dim = 1 + m_eq + q_ineq;
        let mut a = DMatrix::zeros(1, dim);
        a[(0, 0)] = 1.0;
        let mut d = DMatrix::zeros(q_ineq, dim);
        for i in 0..q_ineq {
            d[(i, 1 + m_eq + i)] = -1.0;
        }
        Polyhedron::new(a, DVector::from_element(1, 1.0), d, DVector::zeros(q_ineq))
    }

    /// Cartesian product (block-diagonal stacking of the descriptions).
    pub fn product(parts: &[Polyhedron]) -> Result<Self, PolyhedronError> {
        let dim: usize = parts.iter().map(|p| p.dim).sum();
        if dim == 0 {
            return Err(PolyhedronError::ZeroDimension);
        }
        let ke: usize = parts.iter().map(|p| p.a_eq.nrows()).sum();
        let ki: usize = parts.iter().map(|p| p.d_ineq.nrows()).sum();
        let mut a_eq = DMatrix::zeros(ke, dim);
        let mut b_eq = DVector::zeros(ke);
        let mut d_ineq = DMatrix::zeros(ki, dim);
        let mut d_rhs = DVector::zeros(ki);
        let (mut re, mut ri, mut col) = (0, 0, 0);
        for p in parts {
            for i in 0..p.a_eq.nrows() {
                for j in 0..p.dim {
                    a_eq[(re, col + j)] = p.a_eq[(i, j)];
                }
                b_eq[re] = p.b_eq[i];
                re += 1;
            }
            for i in 0..p.d_ineq.nrows() {
                for j in 0..p.dim {
                    d_ineq[(ri, col + j)] = p.d_ineq[(i, j)];
                }
                d_rhs[ri] = p.d_rhs[i];
                ri += 1;
            }
            col += p.dim;
        }
        Polyhedron::new(a_eq, b_eq, d_ineq, d_rhs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eq_rows(&self) -> (&DMatrix<f64>, &DVector<f64>) {
        (&self.a_eq, &self.b_eq)
    }

    pub fn ineq_rows(&self) -> (&DMatrix<f64>, &DVector<f64>) {
        (&self.d_ineq, &self.d_rhs)
    }

    pub fn num_eq(&self) -> usize {
        self.a_eq.nrows()
    }

    pub fn num_ineq(&self) -> usize {
        self.d_ineq.nrows()
    }

    /// True iff every equality holds within `tol` and every inequality within
    /// `tol`.
    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        assert_eq!(x.len(), self.dim, "contains: dimension mismatch");
        for i in 0..self.a_eq.nrows() {
            if (self.a_eq.row(i).transpose().dot(x) - self.b_eq[i]).abs() > tol {
                return false;
            }
        }
        for i in 0..self.d_ineq.nrows() {
            if self.d_ineq.row(i).transpose().dot(x) - self.d_rhs[i] > tol {
                return false;
            }
        }
        true
    }

    /// Indices of inequality rows active at `x` within `tol`.
    pub fn active_set(&self, x: &DVector<f64>, tol: f64) -> Vec<usize> {
        (0..self.d_ineq.nrows())
            .filter(|&i| self.d_ineq.row(i).transpose().dot(x) - self.d_rhs[i] >= -tol)
            .collect()
    }

    /// Normal cone at `x`: the span of the equality rows plus nonnegative
    /// combinations of the active inequality rows. Points outside the set get
    /// the empty-cone marker.
    pub fn normal_cone(&self, x: &DVector<f64>, tol: f64) -> NormalCone {
        if !self.contains(x, tol) {
            return NormalCone::Empty;
        }
        let active = self.active_set(x, tol);
        let mut gen = DMatrix::zeros(active.len(), self.dim);
        for (k, &i) in active.iter().enumerate() {
            gen.set_row(k, &self.d_ineq.row(i));
        }
        NormalCone::Cone(ConeDescription {
            span_rows: self.a_eq.clone(),
            gen_rows: gen,
            base_point: x.clone(),
            active,
        })
    }

    /// `{y | A_e y = 0, D y <= 0}`; every `x + t y` with `x` in the set,
    /// `y` in the result and `t >= 0` stays in the set.
    ///
    /// Fails with [`PolyhedronError::Empty`] when the set itself is empty
    /// (certified by a feasibility LP).
    pub fn recession_cone(&self) -> Result<Polyhedron, PolyhedronError> {
        if crate::qp::feasible_point(self)
            .map_err(|_| PolyhedronError::Empty)?
            .is_none()
        {
            return Err(PolyhedronError::Empty);
        }
        Ok(self.recession_cone_unchecked())
    }

    /// Recession-cone rows without the emptiness certificate.
    pub fn recession_cone_unchecked(&self) -> Polyhedron {
        Polyhedron {
            dim: self.dim,
            a_eq: self.a_eq.clone(),
            b_eq: DVector::zeros(self.a_eq.nrows()),
            d_ineq: self.d_ineq.clone(),
            d_rhs: DVector::zeros(self.d_ineq.nrows()),
        }
    }

    /// All vertices (basic feasible points), deduplicated within 1e-9.
    /// Restricted to bounded sets of dimension at most 6; this is a test
    /// oracle, not a production path.
    pub fn vertices(&self) -> Result<Vec<DVector<f64>>, PolyhedronError> {
        const MAX_DIM: usize = 6;
        if self.dim > MAX_DIM {
            return Err(PolyhedronError::TooLarge { max: MAX_DIM, got: self.dim });
        }
        let rec = self.recession_cone()?; // also certifies nonemptiness
        let reach = crate::qp::cone_max_abs_coordinate(&rec)
            .map_err(|_| PolyhedronError::Unbounded)?;
        if reach > 1e-7 {
            return Err(PolyhedronError::Unbounded);
        }

        // stack equality rows with every inequality subset that pins down a
        // unique point; filter by feasibility and dedup
        let k = self.a_eq.nrows();
        let q = self.d_ineq.nrows();
        let mut verts: Vec<DVector<f64>> = Vec::new();
        for size in 0..=q.min(self.dim) {
            let mut pick = vec![0usize; size];
            enumerate_subsets(q, size, &mut pick, 0, 0, &mut |subset| {
                let mut rows = DMatrix::zeros(k + subset.len(), self.dim);
                let mut rhs = DVector::zeros(k + subset.len());
                for i in 0..k {
                    rows.set_row(i, &self.a_eq.row(i));
                    rhs[i] = self.b_eq[i];
                }
                for (j, &i) in subset.iter().enumerate() {
                    rows.set_row(k + j, &self.d_ineq.row(i));
                    rhs[k + j] = self.d_rhs[i];
                }
                if linalg::nullspace(&rows).ncols() > 0 {
                    return; // does not pin down a unique point
                }
                let (x, res) = linalg::min_norm_solve(&rows, &rhs);
                if res > 1e-9 * (1.0 + linalg::vamax(&rhs)) {
                    return;
                }
                if !self.contains(&x, ACTIVE_TOL) {
                    return;
                }
                if !verts.iter().any(|v| (v - &x).amax() <= 1e-9) {
                    verts.push(x);
                }
            });
        }
        Ok(verts)
    }
}

/// Homogeneous cone `{u | E u = 0, D u <= 0}` with near-zero rows dropped and
/// the rest scaled to unit norm. Normalization is exact for zero right-hand
/// sides and keeps the cone LPs well conditioned.
pub fn homogeneous_cone(eq: &DMatrix<f64>, ineq: &DMatrix<f64>) -> Polyhedron {
    let dim = eq.ncols().max(ineq.ncols());
    let scale = linalg::amax(eq).max(linalg::amax(ineq)).max(1.0);
    let keep = |m: &DMatrix<f64>| -> Vec<usize> {
        (0..m.nrows())
            .filter(|&i| m.row(i).norm() > 1e-12 * scale)
            .collect()
    };
    let normalize = |m: &DMatrix<f64>, rows: &[usize]| -> DMatrix<f64> {
        let mut out = DMatrix::zeros(rows.len(), dim);
        for (t, &i) in rows.iter().enumerate() {
            let r = m.row(i);
            out.set_row(t, &(r / r.norm()));
        }
        out
    };
    let ekeep = keep(eq);
    let ikeep = keep(ineq);
    let e = normalize(eq, &ekeep);
    let d = normalize(ineq, &ikeep);
    let ke = e.nrows();
    let ki = d.nrows();
    Polyhedron { dim, a_eq: e, b_eq: DVector::zeros(ke), d_ineq: d, d_rhs: DVector::zeros(ki) }
}

fn enumerate_subsets(
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
        enumerate_subsets(n, size, pick, depth + 1, i + 1, f);
    }
}

/// Generator description of a polyhedral cone attached at a point:
/// `{ span_rows^T a + gen_rows^T b : a free, b >= 0 }`.
#[derive(Debug, Clone)]
pub struct ConeDescription {
    /// Rows spanning the linear part (the equality normals).
    pub span_rows: DMatrix<f64>,
    /// Rows generating the pointed part (active inequality normals).
    pub gen_rows: DMatrix<f64>,
    /// The point the cone is attached at.
    pub base_point: DVector<f64>,
    /// Indices of the active inequality rows.
    pub active: Vec<usize>,
}

/// A normal cone, with the convention `N_C(x) = empty` for `x` outside `C`.
#[derive(Debug, Clone)]
pub enum NormalCone {
    Empty,
    Cone(ConeDescription),
}

impl NormalCone {
    pub fn is_empty_marker(&self) -> bool {
        matches!(self, NormalCone::Empty)
    }
}

/// Euclidean distance from `v` to the cone; `+inf` for the empty marker.
///
/// The free span is eliminated by orthogonal projection and the remaining
/// nonnegative-least-squares problem over the generators is solved by
/// Lawson-Hanson. This path is deliberately independent of the active-set QP
/// solver so the two can cross-check each other.
pub fn dist_to_cone(cone: &NormalCone, v: &DVector<f64>) -> f64 {
    let desc = match cone {
        NormalCone::Empty => return f64::INFINITY,
        NormalCone::Cone(d) => d,
    };
    let n = v.len();
    assert_eq!(
        desc.span_rows.ncols().max(desc.gen_rows.ncols()).max(n),
        n,
        "dist_to_cone: dimension mismatch"
    );
    // project out the span
    let q = linalg::row_space_basis(&desc.span_rows); // n x r, orthonormal cols
    let perp = |w: &DVector<f64>| -> DVector<f64> {
        if q.ncols() == 0 {
            w.clone()
        } else {
            w - &q * (q.transpose() * w)
        }
    };
    let v_perp = perp(v);
    let m = desc.gen_rows.nrows();
    if m == 0 {
        return v_perp.norm();
    }
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(m);
    for i in 0..m {
        let g = perp(&desc.gen_rows.row(i).transpose());
        cols.push(g);
    }
    let a = DMatrix::from_fn(n, m, |i, j| cols[j][i]);
    let coeff = nnls(&a, &v_perp);
    (a * coeff - v_perp).norm()
}

/// Lawson-Hanson nonnegative least squares: `argmin_{x >= 0} ||a x - b||_2`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let (m, n) = (a.nrows(), a.ncols());
    let mut x = DVector::zeros(n);
    if n == 0 || m == 0 {
        return x;
    }
    let mut passive = vec![false; n];
    let tol = 1e-12 * (1.0 + linalg::amax(a)) * (1.0 + linalg::vamax(b));
    let max_outer = 6 * n + 30;

    let solve_passive = |passive: &[bool]| -> DVector<f64> {
        let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        if idx.is_empty() {
            return DVector::zeros(n);
        }
        let sub = DMatrix::from_fn(m, idx.len(), |i, k| a[(i, idx[k])]);
        let (z, _) = linalg::min_norm_solve(&sub, b);
        let mut full = DVector::zeros(n);
        for (k, &j) in idx.iter().enumerate() {
            full[j] = z[k];
        }
        full
    };

    for _ in 0..max_outer {
        // gradient of 1/2||ax-b||^2 is a^T(ax-b); w = -gradient
        let w = a.transpose() * (b - a * &x);
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if !passive[j] && w[j] > tol
                && best.is_none_or(|(_, bw)| w[j] > bw) {
                    best = Some((j, w[j]));
                }
        }
        let Some((enter, _)) = best else {
            return x;
        };
        passive[enter] = true;

        loop {
            let z = solve_passive(&passive);
            let neg: Vec<usize> = (0..n).filter(|&j| passive[j] && z[j] <= tol).collect();
            if neg.is_empty() {
                x = z;
                break;
            }
            // step from x toward z until the first passive variable hits zero
            let mut alpha = 1.0f64;
            for &j in &neg {
                let denom = x[j] - z[j];
                if denom > 0.0 {
                    alpha = alpha.min(x[j] / denom);
                }
            }
            x = &x + alpha * (&z - &x);
            for j in 0..n {
                if passive[j] && x[j] <= tol {
                    passive[j] = false;
                    x[j] = 0.0;
                }
            }
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn vec2(a: f64, b: f64) -> DVector<f64> {
        DVector::from_row_slice(&[a, b])
    }

    #[test]
    fn box_membership() {
        let p = Polyhedron::box_set(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!(p.contains(&vec2(0.5, 0.5), 0.0));
        assert!(!p.contains(&vec2(1.0 + 1e-6, 0.0), 1e-9));
    }

    #[test]
    fn simplex_membership() {
        let p = Polyhedron::simplex(3).unwrap();
        let c = DVector::from_element(3, 1.0 / 3.0);
        assert!(p.contains(&c, 1e-12));
        assert!(!p.contains(&DVector::from_row_slice(&[0.5, 0.5, 0.5]), 1e-9));
    }

    #[test]
    fn normal_cone_interior_is_origin() {
        let p = Polyhedron::box_set(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        match p.normal_cone(&vec2(0.5, 0.5), ACTIVE_TOL) {
            NormalCone::Cone(c) => {
                assert_eq!(c.active.len(), 0);
                assert_eq!(c.span_rows.nrows(), 0);
            }
            NormalCone::Empty => panic!("interior point"),
        }
        let cone = p.normal_cone(&vec2(0.5, 0.5), ACTIVE_TOL);
        assert_relative_eq!(dist_to_cone(&cone, &vec2(3.0, 4.0)), 5.0, epsilon = 1e-10);
    }

    #[test]
    fn normal_cone_corner() {
        let p = Polyhedron::box_set(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let cone = p.normal_cone(&vec2(0.0, 0.0), ACTIVE_TOL);
        // cone is {(-a,-b): a,b >= 0}; (-1,-2) inside, (1,0) outside
        assert!(dist_to_cone(&cone, &vec2(-1.0, -2.0)) < 1e-10);
        assert_relative_eq!(dist_to_cone(&cone, &vec2(1.0, 0.0)), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn normal_cone_halfplane() {
        // {x2 <= 0} at (3, 0): cone = {(0,t): t >= 0}
        let p = Polyhedron::new(
            DMatrix::zeros(0, 2),
            DVector::zeros(0),
            DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
            DVector::zeros(1),
        )
        .unwrap();
        let cone = p.normal_cone(&vec2(3.0, 0.0), ACTIVE_TOL);
        assert!(dist_to_cone(&cone, &vec2(0.0, 7.0)) < 1e-10);
        assert_relative_eq!(dist_to_cone(&cone, &vec2(1.0, 1.0)), 1.0, epsilon = 1e-10);
        assert_relative_eq!(dist_to_cone(&cone, &vec2(0.0, -2.0)), 2.0, epsilon = 1e-10);
    }

    #[test]
    fn empty_cone_marker_off_set() {
        let p = Polyhedron::box_set(&[0.0], &[1.0]).unwrap();
        let x = DVector::from_row_slice(&[2.0]);
        assert!(p.normal_cone(&x, ACTIVE_TOL).is_empty_marker());
        assert_eq!(
            dist_to_cone(&p.normal_cone(&x, ACTIVE_TOL), &DVector::from_row_slice(&[0.0])),
            f64::INFINITY
        );
    }

    #[test]
    fn dist_nonneg_orthant() {
        let p = Polyhedron::box_set(&[0.0, 0.0], &[f64::INFINITY, f64::INFINITY]).unwrap();
        // at the corner (0,0) of the nonneg orthant the normal cone is the
        // nonpositive orthant; for the spec's example use generators directly
        let cone = NormalCone::Cone(ConeDescription {
            span_rows: DMatrix::zeros(0, 2),
            gen_rows: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
            base_point: vec2(0.0, 0.0),
            active: vec![0, 1],
        });
        // nonneg orthant as a cone of generators e1, e2
        assert_relative_eq!(dist_to_cone(&cone, &vec2(-1.0, 2.0)), 1.0, epsilon = 1e-10);
        assert!(p.contains(&vec2(0.0, 0.0), 0.0));
    }

    #[test]
    fn recession_of_box_is_origin() {
        let p = Polyhedron::box_set(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let r = p.recession_cone().unwrap();
        assert!(r.contains(&vec2(0.0, 0.0), 0.0));
        assert!(!r.contains(&vec2(0.1, 0.0), 1e-9));
        assert!(!r.contains(&vec2(-0.1, 0.0), 1e-9));
    }

    #[test]
    fn recession_of_nlp_set() {
        // Y = {1} x R^2 x [0,inf): recession cone {0} x R^2 x [0,inf)
        let y = Polyhedron::nlp_multiplier_set(2, 1).unwrap();
        let r = y.recession_cone().unwrap();
        assert!(r.contains(&DVector::from_row_slice(&[0.0, -3.0, 5.0, 2.0]), 1e-12));
        assert!(!r.contains(&DVector::from_row_slice(&[0.5, 0.0, 0.0, 0.0]), 1e-9));
        assert!(!r.contains(&DVector::from_row_slice(&[0.0, 0.0, 0.0, -1.0]), 1e-9));
    }

    #[test]
    fn halfspace_recession_is_itself() {
        let p = Polyhedron::new(
            DMatrix::zeros(0, 2),
            DVector::zeros(0),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DVector::zeros(1),
        )
        .unwrap();
        let r = p.recession_cone().unwrap();
        assert_eq!(r, p);
    }

    #[test]
    fn recession_idempotent_on_samples() {
        let p = Polyhedron::new(
            DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]),
            DVector::from_element(1, 2.0),
            DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, -1.0, 0.0]),
            DVector::from_row_slice(&[4.0, 1.0]),
        )
        .unwrap();
        let r1 = p.recession_cone().unwrap();
        let r2 = r1.recession_cone().unwrap();
        // membership oracles agree on deterministic samples
        let mut state = 0x9E3779B97F4A7C15u64;
        for _ in 0..200 {
            let mut xs = [0.0f64; 3];
            for x in &mut xs {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                *x = ((state >> 11) as f64) / ((1u64 << 53) as f64) * 4.0 - 2.0;
            }
            let v = DVector::from_row_slice(&xs);
            assert_eq!(r1.contains(&v, 1e-9), r2.contains(&v, 1e-9));
        }
    }

    #[test]
    fn vertices_of_box() {
        let p = Polyhedron::box_set(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let mut vs: Vec<(i64, i64)> = p
            .vertices()
            .unwrap()
            .iter()
            .map(|v| (v[0].round() as i64, v[1].round() as i64))
            .collect();
        vs.sort_unstable();
        assert_eq!(vs, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
    }

    #[test]
    fn vertices_of_simplex() {
        let p = Polyhedron::simplex(3).unwrap();
        let vs = p.vertices().unwrap();
        assert_eq!(vs.len(), 3);
        for v in &vs {
            assert_relative_eq!(v.sum(), 1.0, epsilon = 1e-9);
            assert_relative_eq!(v.amax(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn vertices_of_interval() {
        let p = Polyhedron::interval(-1.0, 1.0).unwrap();
        let mut vs: Vec<i64> = p.vertices().unwrap().iter().map(|v| v[0].round() as i64).collect();
        vs.sort_unstable();
        assert_eq!(vs, vec![-1, 1]);
    }

    #[test]
    fn vertices_reject_unbounded() {
        let p = Polyhedron::nonneg_orthant(2).unwrap();
        assert!(matches!(p.vertices(), Err(PolyhedronError::Unbounded)));
    }

    #[test]
    fn nnls_projects_negative_part() {
        // distance from (-1, 2) to cone{e1, e2} is 1
        let a = DMatrix::identity(2, 2);
        let b = vec2(-1.0, 2.0);
        let x = nnls(&a, &b);
        assert_relative_eq!(x[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(x[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn regular_normal_limsup_property() {
        // every emitted generator satisfies <v, x-base> <= tol for sampled x in P
        let p = Polyhedron::box_set(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let base = vec2(0.0, 0.3);
        let cone = match p.normal_cone(&base, ACTIVE_TOL) {
            NormalCone::Cone(c) => c,
            _ => panic!(),
        };
        let mut state = 7u64;
        for _ in 0..500 {
            let mut xs = [0.0f64; 2];
            for x in &mut xs {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                *x = ((state >> 11) as f64) / ((1u64 << 53) as f64);
            }
            let x = vec2(xs[0], xs[1]);
            for i in 0..cone.gen_rows.nrows() {
                let v = cone.gen_rows.row(i).transpose();
                assert!(v.dot(&(&x - &base)) <= 1e-9 + 0.0 * x.norm());
            }
        }
    }
}
