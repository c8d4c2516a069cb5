//! Second-order analysis for the one-dimensional and smooth-Hessian cases:
//! normal cones to subgradient graphs, coderivatives, second-order
//! subdifferentials, and tilt-stability verdicts.
//!
//! For a 1-D penalty `h` given by an interval `Y = [l,u]` and a scalar
//! curvature `q`, the subgradient mapping has a planar graph made of at most
//! three segments/rays (horizontal saturation pieces, a diagonal piece of
//! slope `1/q`, vertical jumps). Normal cones to that polyline are unions of
//! at most four convex cones: the regular-normal polar at the point plus the
//! perpendicular lines contributed as limits from adjacent pieces. Slicing a
//! cone union at a fixed second coordinate yields coderivative values as
//! exact unions of intervals.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::composite::{CompositeError, CompositeProblem};
use crate::linalg;
use crate::plq::{PlqError, PlqFunction};
use crate::polyhedra::Polyhedron;

const GEOM_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum SecondOrderError {
    #[error("matrix must be symmetric")]
    Asymmetric,
    #[error("penalty must be one-dimensional")]
    NotOneDimensional,
    #[error("point is not on the graph")]
    OffGraph,
    #[error("0 is not a subgradient at the point")]
    NotStationary,
    #[error("the given value is not a subgradient at the point")]
    NotASubgradient,
    #[error("unsupported problem shape: {0}")]
    Unsupported(String),
    #[error("penalty error: {0}")]
    Plq(#[from] PlqError),
    #[error("composite error: {0}")]
    Composite(#[from] CompositeError),
}

// ---------------------------------------------------------------------------
// interval sets
// ---------------------------------------------------------------------------

/// A finite union of closed intervals with possibly infinite endpoints,
/// stored sorted and merged so equality is structural.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSet {
    ivs: Vec<(f64, f64)>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        IntervalSet { ivs: Vec::new() }
    }

    pub fn all() -> Self {
        IntervalSet { ivs: vec![(f64::NEG_INFINITY, f64::INFINITY)] }
    }

    pub fn point(a: f64) -> Self {
        IntervalSet { ivs: vec![(a, a)] }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        if lo > hi {
            IntervalSet::empty()
        } else {
            IntervalSet { ivs: vec![(lo, hi)] }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.ivs.is_empty()
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.ivs
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        self.ivs.iter().any(|(lo, hi)| x >= lo - tol && x <= hi + tol)
    }

    pub fn inf(&self) -> Option<f64> {
        self.ivs.first().map(|(lo, _)| *lo)
    }

    pub fn sup(&self) -> Option<f64> {
        self.ivs.last().map(|(_, hi)| *hi)
    }

    pub fn union(mut self, other: &IntervalSet) -> IntervalSet {
        self.ivs.extend_from_slice(&other.ivs);
        self.normalize();
        self
    }

    /// `{c * x : x in self}`.
    pub fn scale(&self, c: f64) -> IntervalSet {
        if self.is_empty() {
            return IntervalSet::empty();
        }
        if c == 0.0 {
            return IntervalSet::point(0.0);
        }
        let out: Vec<(f64, f64)> = self
            .ivs
            .iter()
            .map(|(lo, hi)| if c > 0.0 { (c * lo, c * hi) } else { (c * hi, c * lo) })
            .collect();
        let mut s = IntervalSet { ivs: out };
        s.normalize();
        s
    }

    /// Minkowski sum `{a + b}`; empty absorbs.
    pub fn minkowski_add(&self, other: &IntervalSet) -> IntervalSet {
        if self.is_empty() || other.is_empty() {
            return IntervalSet::empty();
        }
        let mut out = Vec::with_capacity(self.ivs.len() * other.ivs.len());
        for (alo, ahi) in &self.ivs {
            for (blo, bhi) in &other.ivs {
                out.push((alo + blo, ahi + bhi));
            }
        }
        let mut s = IntervalSet { ivs: out };
        s.normalize();
        s
    }

    fn normalize(&mut self) {
        self.ivs.retain(|(lo, hi)| lo <= hi && !(lo.is_nan() || hi.is_nan()));
        self.ivs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(self.ivs.len());
        for &(lo, hi) in &self.ivs {
            match merged.last_mut() {
                Some((_, phi)) if lo <= *phi + GEOM_TOL => {
                    if hi > *phi {
                        *phi = hi;
                    }
                }
                _ => merged.push((lo, hi)),
            }
        }
        self.ivs = merged;
    }
}

// ---------------------------------------------------------------------------
// planar polyline graphs
// ---------------------------------------------------------------------------

/// A segment or ray in the plane.
#[derive(Debug, Clone, Copy)]
pub enum Piece {
    Seg { a: [f64; 2], b: [f64; 2] },
    Ray { origin: [f64; 2], dir: [f64; 2] },
}

/// Graph of a set-valued map on the reals as an ordered polyline.
#[derive(Debug, Clone)]
pub struct PolylineGraph {
    pieces: Vec<Piece>,
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn norm2(a: [f64; 2]) -> f64 {
    dot2(a, a).sqrt()
}

fn scale2(a: [f64; 2], c: f64) -> [f64; 2] {
    [c * a[0], c * a[1]]
}

fn perp(d: [f64; 2]) -> [f64; 2] {
    [-d[1], d[0]]
}

/// Where a point sits on a piece.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Location {
    Interior,
    Endpoint,
}

impl Piece {
    /// Locate `p` on the piece within `tol`; returns the location class and
    /// the outgoing unit tangent direction(s) at `p` along this piece.
    fn locate(&self, p: [f64; 2], tol: f64) -> Option<(Location, Vec<[f64; 2]>)> {
        match *self {
            Piece::Seg { a, b } => {
                let d = sub(b, a);
                let len = norm2(d);
                let dn = scale2(d, 1.0 / len);
                let w = sub(p, a);
                if cross(dn, w).abs() > tol * (1.0 + norm2(w)) {
                    return None;
                }
                let t = dot2(dn, w);
                if t < -tol || t > len + tol {
                    return None;
                }
                if t <= tol {
                    Some((Location::Endpoint, vec![dn]))
                } else if t >= len - tol {
                    Some((Location::Endpoint, vec![scale2(dn, -1.0)]))
                } else {
                    Some((Location::Interior, vec![dn, scale2(dn, -1.0)]))
                }
            }
            Piece::Ray { origin, dir } => {
                let len = norm2(dir);
                let dn = scale2(dir, 1.0 / len);
                let w = sub(p, origin);
                if cross(dn, w).abs() > tol * (1.0 + norm2(w)) {
                    return None;
                }
                let t = dot2(dn, w);
                if t < -tol {
                    return None;
                }
                if t <= tol {
                    Some((Location::Endpoint, vec![dn]))
                } else {
                    Some((Location::Interior, vec![dn, scale2(dn, -1.0)]))
                }
            }
        }
    }
}

impl PolylineGraph {
    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Graph of the subgradient map of the 1-D penalty with `Y = [lo, hi]`
    /// (either side may be infinite) and curvature `q >= 0`.
    pub fn subgradient_graph_1d(lo: f64, hi: f64, q: f64) -> Self {
        assert!(lo <= hi, "interval must be ordered");
        assert!(q >= 0.0, "curvature must be nonnegative");
        let mut pieces = Vec::new();
        if lo == hi {
            // constant subgradient: a horizontal line through (0, lo)
            pieces.push(Piece::Ray { origin: [0.0, lo], dir: [-1.0, 0.0] });
            pieces.push(Piece::Ray { origin: [0.0, lo], dir: [1.0, 0.0] });
            return PolylineGraph { pieces };
        }
        if q > 0.0 {
            // diagonal y = x/q clipped to [lo, hi]
            match (lo.is_finite(), hi.is_finite()) {
                (true, true) => {
                    pieces.push(Piece::Ray { origin: [q * lo, lo], dir: [-1.0, 0.0] });
                    pieces.push(Piece::Seg { a: [q * lo, lo], b: [q * hi, hi] });
                    pieces.push(Piece::Ray { origin: [q * hi, hi], dir: [1.0, 0.0] });
                }
                (true, false) => {
                    pieces.push(Piece::Ray { origin: [q * lo, lo], dir: [-1.0, 0.0] });
                    pieces.push(Piece::Ray { origin: [q * lo, lo], dir: [q, 1.0] });
                }
                (false, true) => {
                    pieces.push(Piece::Ray { origin: [q * hi, hi], dir: [-q, -1.0] });
                    pieces.push(Piece::Ray { origin: [q * hi, hi], dir: [1.0, 0.0] });
                }
                (false, false) => {
                    pieces.push(Piece::Ray { origin: [0.0, 0.0], dir: [-q, -1.0] });
                    pieces.push(Piece::Ray { origin: [0.0, 0.0], dir: [q, 1.0] });
                }
            }
        } else {
            // piecewise constant with a vertical face at 0
            match (lo.is_finite(), hi.is_finite()) {
                (true, true) => {
                    pieces.push(Piece::Ray { origin: [0.0, lo], dir: [-1.0, 0.0] });
                    pieces.push(Piece::Seg { a: [0.0, lo], b: [0.0, hi] });
                    pieces.push(Piece::Ray { origin: [0.0, hi], dir: [1.0, 0.0] });
                }
                (true, false) => {
                    pieces.push(Piece::Ray { origin: [0.0, lo], dir: [-1.0, 0.0] });
                    pieces.push(Piece::Ray { origin: [0.0, lo], dir: [0.0, 1.0] });
                }
                (false, true) => {
                    pieces.push(Piece::Ray { origin: [0.0, hi], dir: [0.0, -1.0] });
                    pieces.push(Piece::Ray { origin: [0.0, hi], dir: [1.0, 0.0] });
                }
                (false, false) => {
                    pieces.push(Piece::Ray { origin: [0.0, 0.0], dir: [0.0, -1.0] });
                    pieces.push(Piece::Ray { origin: [0.0, 0.0], dir: [0.0, 1.0] });
                }
            }
        }
        PolylineGraph { pieces }
    }

    /// Graph of the normal-cone map of the interval `[lo, hi]` (vertical
    /// faces at finite endpoints, the horizontal zero section inbetween).
    pub fn normal_cone_graph_interval(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "interval must be ordered");
        let mut pieces = Vec::new();
        if lo == hi {
            // N at the single point is all of R: one vertical line
            pieces.push(Piece::Ray { origin: [lo, 0.0], dir: [0.0, -1.0] });
            pieces.push(Piece::Ray { origin: [lo, 0.0], dir: [0.0, 1.0] });
            return PolylineGraph { pieces };
        }
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => {
                pieces.push(Piece::Ray { origin: [lo, 0.0], dir: [0.0, -1.0] });
                pieces.push(Piece::Seg { a: [lo, 0.0], b: [hi, 0.0] });
                pieces.push(Piece::Ray { origin: [hi, 0.0], dir: [0.0, 1.0] });
            }
            (true, false) => {
                pieces.push(Piece::Ray { origin: [lo, 0.0], dir: [0.0, -1.0] });
                pieces.push(Piece::Ray { origin: [lo, 0.0], dir: [1.0, 0.0] });
            }
            (false, true) => {
                pieces.push(Piece::Ray { origin: [hi, 0.0], dir: [-1.0, 0.0] });
                pieces.push(Piece::Ray { origin: [hi, 0.0], dir: [0.0, 1.0] });
            }
            (false, false) => {
                pieces.push(Piece::Ray { origin: [0.0, 0.0], dir: [-1.0, 0.0] });
                pieces.push(Piece::Ray { origin: [0.0, 0.0], dir: [1.0, 0.0] });
            }
        }
        PolylineGraph { pieces }
    }

    pub fn on_graph(&self, p: [f64; 2], tol: f64) -> bool {
        self.pieces.iter().any(|piece| piece.locate(p, tol).is_some())
    }
}

// ---------------------------------------------------------------------------
// cone unions and coderivatives
// ---------------------------------------------------------------------------

/// One convex member of a normal-cone union.
#[derive(Debug, Clone, Copy)]
pub enum ConeMember {
    /// The full line `span{d}`.
    LineSpan([f64; 2]),
    /// `{t g : t >= 0}`.
    Ray([f64; 2]),
    /// `{a n1 + b n2 : a, b >= 0}` with independent `n1`, `n2`.
    Fan([f64; 2], [f64; 2]),
}

/// Union of at most four convex cones.
#[derive(Debug, Clone)]
pub struct ConeUnion {
    pub members: Vec<ConeMember>,
}

impl ConeUnion {
    pub fn empty() -> Self {
        ConeUnion { members: Vec::new() }
    }

    pub fn contains(&self, v: [f64; 2], tol: f64) -> bool {
        self.members.iter().any(|m| member_contains(*m, v, tol))
    }

    /// `{u : (u, w) in union}` as an interval set.
    pub fn slice_at(&self, w: f64) -> IntervalSet {
        let mut out = IntervalSet::empty();
        for m in &self.members {
            out = out.union(&member_slice(*m, w));
        }
        out
    }
}

fn member_contains(m: ConeMember, v: [f64; 2], tol: f64) -> bool {
    match m {
        ConeMember::LineSpan(d) => cross(d, v).abs() <= tol * (1.0 + norm2(v)),
        ConeMember::Ray(g) => cross(g, v).abs() <= tol * (1.0 + norm2(v)) && dot2(g, v) >= -tol,
        ConeMember::Fan(n1, n2) => {
            let s = cross(n1, n2).signum();
            s * cross(n1, v) >= -tol * (1.0 + norm2(v))
                && s * cross(v, n2) >= -tol * (1.0 + norm2(v))
        }
    }
}

fn member_slice(m: ConeMember, w: f64) -> IntervalSet {
    match m {
        ConeMember::LineSpan(d) => {
            if d[1].abs() <= GEOM_TOL {
                if w.abs() <= GEOM_TOL {
                    IntervalSet::all()
                } else {
                    IntervalSet::empty()
                }
            } else {
                IntervalSet::point(d[0] * (w / d[1]))
            }
        }
        ConeMember::Ray(g) => {
            if g[1].abs() <= GEOM_TOL {
                if w.abs() > GEOM_TOL {
                    IntervalSet::empty()
                } else if g[0] > GEOM_TOL {
                    IntervalSet::interval(0.0, f64::INFINITY)
                } else if g[0] < -GEOM_TOL {
                    IntervalSet::interval(f64::NEG_INFINITY, 0.0)
                } else {
                    IntervalSet::point(0.0)
                }
            } else {
                let t = w / g[1];
                if t >= -GEOM_TOL {
                    IntervalSet::point(g[0] * t.max(0.0))
                } else {
                    IntervalSet::empty()
                }
            }
        }
        ConeMember::Fan(n1, n2) => {
            // (u,w) in cone{n1,n2}  <=>  s*cross(n1,(u,w)) >= 0 and
            // s*cross((u,w),n2) >= 0 with s = sign(cross(n1,n2)); both are
            // linear inequalities in u
            let c12 = cross(n1, n2);
            if c12.abs() <= GEOM_TOL {
                let r1 = member_slice(ConeMember::Ray(n1), w);
                let r2 = member_slice(ConeMember::Ray(n2), w);
                return r1.union(&r2);
            }
            let s = c12.signum();
            // s*(n1.x*w - n1.y*u) >= 0   =>  (s*n1.y) u <= s*n1.x*w
            // s*(u*n2.y - w*n2.x) >= 0   =>  (-s*n2.y) u <= -s*n2.x*w
            let constraints = [(s * n1[1], s * n1[0] * w), (-s * n2[1], -s * n2[0] * w)];
            let mut lo = f64::NEG_INFINITY;
            let mut hi = f64::INFINITY;
            for (a, b) in constraints {
                if a.abs() <= GEOM_TOL {
                    if b < -GEOM_TOL {
                        return IntervalSet::empty();
                    }
                } else if a > 0.0 {
                    hi = hi.min(b / a);
                } else {
                    lo = lo.max(b / a);
                }
            }
            IntervalSet::interval(lo, hi)
        }
    }
}

/// Normal cone to the polyline at `p`: the polar of the outgoing tangents
/// (regular normals) plus the perpendicular lines from each incident piece
/// (limits of regular normals at nearby interior points). Off the graph,
/// the empty union.
pub fn graph_normal_cone(g: &PolylineGraph, p: [f64; 2]) -> ConeUnion {
    let tol = GEOM_TOL;
    let mut tangents: Vec<[f64; 2]> = Vec::new();
    for piece in &g.pieces {
        if let Some((_, dirs)) = piece.locate(p, tol) {
            for d in dirs {
                if !tangents.iter().any(|t| norm2(sub(*t, d)) <= 1e-9) {
                    tangents.push(d);
                }
            }
        }
    }
    if tangents.is_empty() {
        return ConeUnion::empty();
    }
    debug_assert!(tangents.len() <= 2, "polyline points have at most two tangents");
    let mut members = Vec::new();
    if tangents.len() == 1 {
        // bare graph endpoint: the polar halfplane of the single tangent,
        // split into two fans, plus the limit line
        let t = tangents[0];
        let pp = perp(t);
        members.push(ConeMember::Fan(pp, scale2(t, -1.0)));
        members.push(ConeMember::Fan(scale2(t, -1.0), scale2(pp, -1.0)));
        members.push(ConeMember::LineSpan(pp));
        return ConeUnion { members };
    }
    let (t1, t2) = (tangents[0], tangents[1]);
    if norm2(sub(t2, scale2(t1, -1.0))) <= 1e-9 {
        // straight through: the perpendicular line
        members.push(ConeMember::LineSpan(perp(t1)));
    } else {
        // corner: polar fan of the two tangents plus both limit lines
        let mut n1 = perp(t1);
        if dot2(n1, t2) > 0.0 {
            n1 = scale2(n1, -1.0);
        }
        let mut n2 = perp(t2);
        if dot2(n2, t1) > 0.0 {
            n2 = scale2(n2, -1.0);
        }
        members.push(ConeMember::Fan(n1, n2));
        members.push(ConeMember::LineSpan(perp(t1)));
        members.push(ConeMember::LineSpan(perp(t2)));
    }
    ConeUnion { members }
}

/// `D*S(p)(v) = {u : (u,-v) in N_gph(p)}`.
pub fn coderivative(g: &PolylineGraph, p: [f64; 2], v: f64) -> IntervalSet {
    graph_normal_cone(g, p).slice_at(-v)
}

// ---------------------------------------------------------------------------
// second-order subdifferentials of 1-D penalties
// ---------------------------------------------------------------------------

/// The interval `[lo, hi]` described by a 1-D polyhedron.
pub fn interval_of_1d(y: &Polyhedron) -> Result<(f64, f64), SecondOrderError> {
    if y.dim() != 1 {
        return Err(SecondOrderError::NotOneDimensional);
    }
    let (a_eq, b_eq) = y.eq_rows();
    let (d, d_rhs) = y.ineq_rows();
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for i in 0..a_eq.nrows() {
        let a = a_eq[(i, 0)];
        if a.abs() <= GEOM_TOL {
            continue;
        }
        let v = b_eq[i] / a;
        lo = lo.max(v);
        hi = hi.min(v);
    }
    for i in 0..d.nrows() {
        let a = d[(i, 0)];
        if a.abs() <= GEOM_TOL {
            continue;
        }
        let v = d_rhs[i] / a;
        if a > 0.0 {
            hi = hi.min(v);
        } else {
            lo = lo.max(v);
        }
    }
    Ok((lo, hi))
}

/// Subgradient graph of a 1-D penalty.
pub fn subgradient_graph(f: &PlqFunction) -> Result<PolylineGraph, SecondOrderError> {
    if f.dim() != 1 {
        return Err(SecondOrderError::NotOneDimensional);
    }
    let (lo, hi) = interval_of_1d(f.y_set())?;
    Ok(PolylineGraph::subgradient_graph_1d(lo, hi, f.q()[(0, 0)]))
}

/// Second-order subdifferential of a 1-D penalty at `(x, y)`: the
/// coderivative of its subgradient graph.
pub fn second_subdiff_1d(
    f: &PlqFunction,
    x: f64,
    y: f64,
    v: f64,
) -> Result<IntervalSet, SecondOrderError> {
    let g = subgradient_graph(f)?;
    if !g.on_graph([x, y], GEOM_TOL) {
        return Err(SecondOrderError::NotASubgradient);
    }
    Ok(coderivative(&g, [x, y], v))
}

/// Second-order subdifferential of the indicator of `[lo, hi]` at a pair
/// `(y, w)` on the normal-cone graph; off-graph pairs give the empty set.
pub fn nys_interval(lo: f64, hi: f64, y: f64, w: f64, v: f64) -> IntervalSet {
    let g = PolylineGraph::normal_cone_graph_interval(lo, hi);
    if !g.on_graph([y, w], GEOM_TOL) {
        return IntervalSet::empty();
    }
    coderivative(&g, [y, w], v)
}

// ---------------------------------------------------------------------------
// tilt stability
// ---------------------------------------------------------------------------

/// Twice-smooth case at a stationary point: tilt-stable iff the Hessian is
/// positive definite.
pub fn tilt_stable_smooth(hess: &DMatrix<f64>) -> Result<bool, SecondOrderError> {
    if !linalg::is_symmetric(hess, 1e-10 * (1.0 + linalg::amax(hess))) {
        return Err(SecondOrderError::Asymmetric);
    }
    Ok(linalg::min_eigenvalue(hess) > 1e-10)
}

/// 1-D convex penalty at a stationary point: tilt-stable iff no
/// `u in d2f(x,0)(v)` with `v != 0` violates `u*v > 0` (empty sets pass
/// vacuously). Positive homogeneity of the graph reduces the check to
/// `v = +1` and `v = -1`.
pub fn tilt_stable_1d(f: &PlqFunction, x: f64) -> Result<bool, SecondOrderError> {
    let g = subgradient_graph(f)?;
    if !g.on_graph([x, 0.0], GEOM_TOL) {
        return Err(SecondOrderError::NotStationary);
    }
    let plus = coderivative(&g, [x, 0.0], 1.0);
    if let Some(lo) = plus.inf() {
        if lo <= 0.0 {
            return Ok(false);
        }
    }
    let minus = coderivative(&g, [x, 0.0], -1.0);
    if let Some(hi) = minus.sup() {
        if hi >= 0.0 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Brute-force check of the tilt-stability definition: for each tilt `y`
/// near zero, minimize `f(x) - y x` over the window `|x - x0| <= delta` on a
/// dense grid and require that the argmin is single-valued (diameter at most
/// one grid cell), equals `x0` at `y = 0`, and moves with a bounded
/// difference ratio across consecutive tilts. Function values come from the
/// QP evaluation path, independent of the graph machinery this oracle
/// cross-checks.
pub fn tilt_oracle_1d(
    f: &PlqFunction,
    x0: f64,
    delta: f64,
    grid_step: f64,
    y_grid: &[f64],
    max_ratio: f64,
) -> Result<bool, SecondOrderError> {
    if f.dim() != 1 {
        return Err(SecondOrderError::NotOneDimensional);
    }
    let npts = ((2.0 * delta) / grid_step).round() as usize + 1;
    let xs: Vec<f64> = (0..npts).map(|i| x0 - delta + i as f64 * grid_step).collect();
    let mut fvals = Vec::with_capacity(npts);
    for &x in &xs {
        let v = f.eval(&DVector::from_element(1, x))?;
        fvals.push(v.as_f64());
    }
    let mut prev: Option<(f64, f64)> = None; // (y, M(y))
    for &y in y_grid {
        let mut best = f64::INFINITY;
        for (i, &x) in xs.iter().enumerate() {
            let v = fvals[i] - y * x;
            if v < best {
                best = v;
            }
        }
        if !best.is_finite() {
            return Ok(false);
        }
        let tol = 1e-9 * (1.0 + best.abs());
        let attain: Vec<usize> =
            (0..npts).filter(|&i| fvals[i] - y * xs[i] <= best + tol).collect();
        let lo = xs[*attain.first().expect("nonempty argmin")];
        let hi = xs[*attain.last().expect("nonempty argmin")];
        if hi - lo > 1.5 * grid_step {
            return Ok(false); // multi-valued
        }
        let m = 0.5 * (lo + hi);
        if y == 0.0 && (m - x0).abs() > 1.5 * grid_step {
            return Ok(false); // M(0) != x0
        }
        if let Some((py, pm)) = prev {
            let ratio = (m - pm).abs() / (y - py).abs();
            if ratio > max_ratio {
                return Ok(false); // empirical Lipschitz bound violated
            }
        }
        prev = Some((y, m));
    }
    Ok(true)
}

/// Verdict of the composite tilt diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub enum TiltVerdict {
    Stable,
    Unstable,
    Unsupported(String),
}

/// Composite diagnostic for `f = h o G` with `n = 1`: combines the weighted
/// Hessian of `<y, G>` with the per-coordinate second-order subdifferentials
/// of a separable `h` (`Y` a box, `Q` diagonal). Anything outside that shape
/// reports `Unsupported` rather than guessing.
pub fn tilt_stable_composite_1d(
    p: &CompositeProblem,
    x: &DVector<f64>,
) -> Result<TiltVerdict, SecondOrderError> {
    if p.input_dim() != 1 {
        return Ok(TiltVerdict::Unsupported("input dimension must be 1".into()));
    }
    let m = p.output_dim();
    // Y must be a box: no equalities, unit inequality rows
    let yset = p.penalty().y_set();
    if yset.num_eq() != 0 {
        return Ok(TiltVerdict::Unsupported("Y must be a box".into()));
    }
    let (d, d_rhs) = yset.ineq_rows();
    let mut lo = vec![f64::NEG_INFINITY; m];
    let mut hi = vec![f64::INFINITY; m];
    for i in 0..d.nrows() {
        let mut coord = None;
        for j in 0..m {
            if d[(i, j)] != 0.0 {
                if coord.is_some() {
                    return Ok(TiltVerdict::Unsupported("Y must be a box".into()));
                }
                coord = Some(j);
            }
        }
        let Some(j) = coord else {
            return Ok(TiltVerdict::Unsupported("Y must be a box".into()));
        };
        let a = d[(i, j)];
        if (a - 1.0).abs() <= GEOM_TOL {
            hi[j] = hi[j].min(d_rhs[i]);
        } else if (a + 1.0).abs() <= GEOM_TOL {
            lo[j] = lo[j].max(-d_rhs[i]);
        } else {
            return Ok(TiltVerdict::Unsupported("Y rows must be unit rows".into()));
        }
    }
    // Q must be diagonal
    let q = p.penalty().q();
    for i in 0..m {
        for j in 0..m {
            if i != j && q[(i, j)].abs() > GEOM_TOL {
                return Ok(TiltVerdict::Unsupported("Q must be diagonal".into()));
            }
        }
    }
    // a unique stationary multiplier is required
    let cs = p.chain_subgradient(x)?;
    if !cs.qualification_ok {
        return Ok(TiltVerdict::Unsupported("qualification not certified".into()));
    }
    if !cs.unique {
        return Ok(TiltVerdict::Unsupported("multiplier is not unique".into()));
    }
    if cs.representative.norm() > 1e-7 {
        return Ok(TiltVerdict::Unsupported("point is not stationary".into()));
    }
    let y_bar = &cs.multiplier;
    let z = p.map().value(x);
    let jac = p.map().jacobian(x); // m x 1
    let hess = p.map().weighted_hessian(x, y_bar)[(0, 0)];

    for v in [1.0f64, -1.0] {
        // u in hess*v + sum_i jac_i * d2h_i(z_i, y_i)(jac_i * v)
        let mut total = IntervalSet::point(hess * v);
        for i in 0..m {
            let g = PolylineGraph::subgradient_graph_1d(lo[i], hi[i], q[(i, i)]);
            if !g.on_graph([z[i], y_bar[i]], 1e-8) {
                return Ok(TiltVerdict::Unsupported(
                    "multiplier is not on the subgradient graph".into(),
                ));
            }
            let s_i = coderivative(&g, [z[i], y_bar[i]], jac[(i, 0)] * v);
            total = total.minkowski_add(&s_i.scale(jac[(i, 0)]));
        }
        if total.is_empty() {
            continue; // vacuous for this v
        }
        let bad = if v > 0.0 {
            total.inf().is_some_and(|u| u <= 0.0)
        } else {
            total.sup().is_some_and(|u| u >= 0.0)
        };
        if bad {
            return Ok(TiltVerdict::Unstable);
        }
    }
    Ok(TiltVerdict::Stable)
}

/// A point where `0` is a subgradient of a 1-D penalty, if one exists.
pub fn stationary_point_1d(f: &PlqFunction) -> Result<Option<f64>, SecondOrderError> {
    if f.dim() != 1 {
        return Err(SecondOrderError::NotOneDimensional);
    }
    let (lo, hi) = interval_of_1d(f.y_set())?;
    if lo > 0.0 || hi < 0.0 {
        return Ok(None);
    }
    // with 0 in [lo,hi] the zero subgradient sits at x = 0 for both the
    // diagonal (q > 0) and vertical-face (q = 0) graphs
    Ok(Some(0.0))
}
