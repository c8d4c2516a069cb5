//! Seeded builders for the example families used across the test corpus:
//! goal optimization, equality-constrained nonlinear programs, superquantile
//! (CVaR) risk minimization, lasso with an optional nonconvex taper, real
//! phase retrieval, and a spatial-equilibrium variational inequality recast
//! through its gap function.
//!
//! Instance randomness is fully determined by the seed through a fixed 64-bit
//! linear congruential generator, so corpora are bit-reproducible.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::composite::{CompositeError, CompositeProblem, SmoothMap};
use crate::plq::{PlqError, PlqFunction};
use crate::polyhedra::{Polyhedron, PolyhedronError};
use crate::qp::{self, QpError, QpProblem, QpStatus};

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("invalid instance parameters: {0}")]
    BadSpec(String),
    #[error("composite assembly failed: {0}")]
    Composite(#[from] CompositeError),
    #[error("penalty assembly failed: {0}")]
    Plq(#[from] PlqError),
    #[error("polyhedron assembly failed: {0}")]
    Polyhedron(#[from] PolyhedronError),
    #[error("qp solver failure: {0}")]
    Solver(#[from] QpError),
    #[error("point must lie in the constraint set")]
    OutsideC,
}

/// Knuth's 64-bit linear congruential generator; the top 53 bits feed the
/// uniform doubles.
#[derive(Debug, Clone)]
pub struct Lcg64 {
    state: u64,
}

impl Lcg64 {
    pub fn new(seed: u64) -> Self {
        Lcg64 { state: seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1) }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self
            .state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        self.state
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64) / ((1u64 << 53) as f64)
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform().max(1e-300);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

/// Which example family an instance comes from, with its parameters.
#[derive(Debug, Clone)]
pub enum InstanceSpec {
    /// `min sum alpha_i max(0, g_i(x) - tau_i)` with affine `g_i`, box `X`.
    Goal { n: usize, m: usize, alphas: Vec<f64>, targets: Vec<f64>, seed: u64 },
    /// `min 1/2||x||^2 s.t. <a,x> = beta` as a composite with the
    /// infinite-penalty multiplier set.
    NlpEquality { n: usize, seed: u64 },
    /// Superquantile (CVaR) minimization of affine scenario costs over a box.
    Cvar { n: usize, m: usize, alpha: f64, probs: Option<Vec<f64>>, seed: u64 },
    /// Least squares with an l1 or tapered regularizer.
    LassoTaper { n: usize, m: usize, theta: f64, taper: bool, seed: u64 },
    /// Real phase retrieval from noiseless planted magnitudes.
    PhaseRetrieval { n: usize, m: usize, seed: u64 },
    /// Spatial price equilibrium recast through the gap function.
    SpatialVi { producers: usize, regions: usize, seed: u64 },
}

impl InstanceSpec {
    fn validate(&self) -> Result<(), CatalogError> {
        match self {
            InstanceSpec::Goal { n, m, alphas, targets, .. } => {
                if *n == 0 || *m == 0 {
                    return Err(CatalogError::BadSpec("dimensions must be positive".into()));
                }
                if alphas.len() != *m || targets.len() != *m {
                    return Err(CatalogError::BadSpec("alpha/target lengths must equal m".into()));
                }
                if alphas.iter().any(|a| *a < 0.0) {
                    return Err(CatalogError::BadSpec("penalties must be nonnegative".into()));
                }
            }
            InstanceSpec::NlpEquality { n, .. } => {
                if *n == 0 {
                    return Err(CatalogError::BadSpec("dimension must be positive".into()));
                }
            }
            InstanceSpec::Cvar { n, m, alpha, probs, .. } => {
                if *n == 0 || *m == 0 {
                    return Err(CatalogError::BadSpec("dimensions must be positive".into()));
                }
                if !(0.0..1.0).contains(alpha) {
                    return Err(CatalogError::BadSpec("alpha must lie in [0,1)".into()));
                }
                if let Some(p) = probs {
                    if p.len() != *m {
                        return Err(CatalogError::BadSpec("probability length must equal m".into()));
                    }
                    if p.iter().any(|v| *v < 0.0) {
                        return Err(CatalogError::BadSpec("probabilities must be nonnegative".into()));
                    }
                    let s: f64 = p.iter().sum();
                    if (s - 1.0).abs() > 1e-12 {
                        return Err(CatalogError::BadSpec("probabilities must sum to 1".into()));
                    }
                }
            }
            InstanceSpec::LassoTaper { n, m, theta, .. } => {
                if *n == 0 || *m == 0 {
                    return Err(CatalogError::BadSpec("dimensions must be positive".into()));
                }
                if *theta <= 0.0 {
                    return Err(CatalogError::BadSpec("theta must be positive".into()));
                }
            }
            InstanceSpec::PhaseRetrieval { n, m, .. } => {
                if *n == 0 || *m == 0 {
                    return Err(CatalogError::BadSpec("dimensions must be positive".into()));
                }
            }
            InstanceSpec::SpatialVi { producers, regions, .. } => {
                if *producers == 0 || *regions == 0 {
                    return Err(CatalogError::BadSpec("dimensions must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

/// Build the composite encoding of the instance.
pub fn build(spec: &InstanceSpec) -> Result<CompositeProblem, CatalogError> {
    spec.validate()?;
    match spec {
        InstanceSpec::Goal { n, m, alphas, targets, seed } => {
            let (a, b) = goal_affine_data(*n, *m, *seed);
            let shift = DVector::from_fn(*m, |i, _| b[i] - targets[i]);
            let g = SmoothMap::affine(a, shift);
            let x = Polyhedron::box_set(&vec![-2.0; *n], &vec![2.0; *n])?;
            let y = Polyhedron::box_set(&vec![0.0; *m], alphas)?;
            let h = PlqFunction::new(y, DMatrix::zeros(*m, *m))?;
            Ok(CompositeProblem::new(x, g, h)?)
        }
        InstanceSpec::NlpEquality { n, seed } => {
            let (a, beta) = nlp_equality_data(*n, *seed);
            let n_ = *n;
            let a2 = a.clone();
            let g = SmoothMap::new(n_, 2, move |x| {
                DVector::from_row_slice(&[0.5 * x.norm_squared(), a2.dot(x) - beta])
            })
            .with_jacobian({
                let a3 = a.clone();
                move |x| {
                    let mut j = DMatrix::zeros(2, n_);
                    for k in 0..n_ {
                        j[(0, k)] = x[k];
                        j[(1, k)] = a3[k];
                    }
                    j
                }
            })
            .with_weighted_hessian(move |_, y| DMatrix::identity(n_, n_) * y[0]);
            let yset = Polyhedron::nlp_multiplier_set(1, 0)?;
            let h = PlqFunction::new(yset, DMatrix::zeros(2, 2))?;
            Ok(CompositeProblem::new(Polyhedron::free(n_), g, h)?)
        }
        InstanceSpec::Cvar { n, m, alpha, probs, seed } => {
            let p = cvar_probs(*m, probs, *seed);
            let (a, b) = cvar_affine_data(*n, *m, *seed);
            let g = SmoothMap::affine(a, b);
            let x = Polyhedron::box_set(&vec![-1.0; *n], &vec![1.0; *n])?;
            let y = cvar_multiplier_set(&p, *alpha)?;
            let h = PlqFunction::new(y, DMatrix::zeros(*m, *m))?;
            Ok(CompositeProblem::new(x, g, h)?)
        }
        InstanceSpec::LassoTaper { n, m, theta, taper, seed } => {
            let (a, b) = lasso_data(*n, *m, *seed);
            let g = lasso_map(a, b, *theta, *taper);
            let yset = Polyhedron::product(&[
                Polyhedron::singleton(&DVector::from_element(1, 1.0))?,
                Polyhedron::box_set(&vec![-1.0; *n], &vec![1.0; *n])?,
            ])?;
            let h = PlqFunction::new(yset, DMatrix::zeros(n + 1, n + 1))?;
            Ok(CompositeProblem::new(Polyhedron::free(*n), g, h)?)
        }
        InstanceSpec::PhaseRetrieval { n, m, seed } => {
            let (vectors, magnitudes, _) = phase_retrieval_data(*n, *m, *seed);
            let g = phase_retrieval_map(vectors, magnitudes);
            let y = Polyhedron::box_set(&vec![-1.0; *m], &vec![1.0; *m])?;
            let h = PlqFunction::new(y, DMatrix::zeros(*m, *m))?;
            Ok(CompositeProblem::new(Polyhedron::free(*n), g, h)?)
        }
        InstanceSpec::SpatialVi { producers, regions, seed } => {
            let data = spatial_vi_data(*producers, *regions, *seed);
            let c = data.constraint_set()?;
            let dim = data.dim();
            let g = data.merit_map();
            let yset = Polyhedron::product(&[
                Polyhedron::singleton(&DVector::from_element(1, 1.0))?,
                c.clone(),
            ])?;
            let h = PlqFunction::new(yset, DMatrix::zeros(dim + 1, dim + 1))?;
            Ok(CompositeProblem::new(c, g, h)?)
        }
    }
}

// ---------------------------------------------------------------------------
// seeded data
// ---------------------------------------------------------------------------

fn goal_affine_data(n: usize, m: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
    let mut rng = Lcg64::new(seed ^ 0x60A1);
    let a = DMatrix::from_fn(m, n, |_, _| rng.range(-1.0, 1.0));
    let b = DVector::from_fn(m, |_, _| rng.range(-0.5, 0.5));
    (a, b)
}

/// `(a, beta)` of the constraint `<a, x> = beta`.
pub fn nlp_equality_data(n: usize, seed: u64) -> (DVector<f64>, f64) {
    let mut rng = Lcg64::new(seed ^ 0x1217);
    let a = DVector::from_fn(n, |_, _| rng.range(0.5, 1.5));
    let beta = rng.range(0.5, 2.0);
    (a, beta)
}

/// Analytic solution of the equality-constrained quadratic instance.
pub fn nlp_equality_solution(n: usize, seed: u64) -> (DVector<f64>, f64) {
    let (a, beta) = nlp_equality_data(n, seed);
    let x = &a * (beta / a.norm_squared());
    let mult = -beta / a.norm_squared();
    (x, mult)
}

fn cvar_probs(m: usize, probs: &Option<Vec<f64>>, seed: u64) -> Vec<f64> {
    match probs {
        Some(p) => p.clone(),
        None => {
            let mut rng = Lcg64::new(seed ^ 0xC4A7);
            let raw: Vec<f64> = (0..m).map(|_| rng.range(0.2, 1.0)).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|v| v / s).collect()
        }
    }
}

fn cvar_affine_data(n: usize, m: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
    let mut rng = Lcg64::new(seed ^ 0xC4A8);
    let a = DMatrix::from_fn(m, n, |_, _| rng.range(-1.0, 1.0));
    let b = DVector::from_fn(m, |_, _| rng.range(-1.0, 1.0));
    (a, b)
}

/// `{y >= 0 | sum y = 1, (1-alpha) y_i <= p_i}`.
pub fn cvar_multiplier_set(probs: &[f64], alpha: f64) -> Result<Polyhedron, CatalogError> {
    let m = probs.len();
    let mut d = DMatrix::zeros(2 * m, m);
    let mut rhs = DVector::zeros(2 * m);
    for i in 0..m {
        d[(i, i)] = 1.0 - alpha;
        rhs[i] = probs[i];
        d[(m + i, i)] = -1.0;
    }
    Ok(Polyhedron::new(
        DMatrix::from_element(1, m, 1.0),
        DVector::from_element(1, 1.0),
        d,
        rhs,
    )?)
}

fn lasso_data(n: usize, m: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
    let mut rng = Lcg64::new(seed ^ 0x1A550);
    let a = DMatrix::from_fn(m, n, |_, _| rng.normal());
    // planted sparse signal with a couple of active coordinates
    let mut xstar = DVector::zeros(n);
    for j in 0..n.min(2) {
        xstar[j] = rng.range(0.5, 1.5);
    }
    let noise = DVector::from_fn(m, |_, _| 0.01 * rng.normal());
    let b = &a * xstar + noise;
    (a, b)
}

/// The tapered regularizer of the regression example: identical to
/// `theta * t` on `[-1, 1]` and exponentially saturating outside, globally
/// C^1.
pub fn taper(theta: f64, t: f64) -> f64 {
    if t > 1.0 {
        2.0 * theta - theta * (1.0 - t).exp()
    } else if t < -1.0 {
        theta * (1.0 + t).exp() - 2.0 * theta
    } else {
        theta * t
    }
}

pub fn taper_derivative(theta: f64, t: f64) -> f64 {
    if t > 1.0 {
        theta * (1.0 - t).exp()
    } else if t < -1.0 {
        theta * (1.0 + t).exp()
    } else {
        theta
    }
}

fn taper_second_derivative(theta: f64, t: f64) -> f64 {
    if t > 1.0 {
        -theta * (1.0 - t).exp()
    } else if t < -1.0 {
        theta * (1.0 + t).exp()
    } else {
        0.0
    }
}

fn lasso_map(a: DMatrix<f64>, b: DVector<f64>, theta: f64, tapered: bool) -> SmoothMap {
    let n = a.ncols();
    let a2 = a.clone();
    let b2 = b.clone();
    let value = move |x: &DVector<f64>| {
        let r = &a2 * x - &b2;
        let mut out = DVector::zeros(n + 1);
        out[0] = r.norm_squared();
        for j in 0..n {
            out[j + 1] = if tapered { taper(theta, x[j]) } else { theta * x[j] };
        }
        out
    };
    let a3 = a.clone();
    let b3 = b.clone();
    let jac = move |x: &DVector<f64>| {
        let r = &a3 * x - &b3;
        let grad0 = 2.0 * a3.transpose() * r;
        let mut j = DMatrix::zeros(n + 1, n);
        for k in 0..n {
            j[(0, k)] = grad0[k];
            j[(k + 1, k)] = if tapered { taper_derivative(theta, x[k]) } else { theta };
        }
        j
    };
    let ata = 2.0 * a.transpose() * &a;
    let wh = move |x: &DVector<f64>, y: &DVector<f64>| {
        let mut hmat = &ata * y[0];
        if tapered {
            for k in 0..n {
                hmat[(k, k)] += y[k + 1] * taper_second_derivative(theta, x[k]);
            }
        }
        hmat
    };
    SmoothMap::new(n, n + 1, value).with_jacobian(jac).with_weighted_hessian(wh)
}

/// Measurement vectors, squared magnitudes, and the planted signal.
pub fn phase_retrieval_data(
    n: usize,
    m: usize,
    seed: u64,
) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
    let mut rng = Lcg64::new(seed ^ 0xFA5E);
    let a = DMatrix::from_fn(m, n, |_, _| rng.normal());
    let xstar = DVector::from_fn(n, |_, _| rng.normal());
    let b = DVector::from_fn(m, |i, _| {
        let ip = a.row(i).transpose().dot(&xstar);
        ip * ip
    });
    (a, b, xstar)
}

/// The planted signal of a phase-retrieval instance.
pub fn phase_retrieval_planted(n: usize, m: usize, seed: u64) -> DVector<f64> {
    phase_retrieval_data(n, m, seed).2
}

fn phase_retrieval_map(a: DMatrix<f64>, b: DVector<f64>) -> SmoothMap {
    let (m, n) = (a.nrows(), a.ncols());
    let a2 = a.clone();
    let b2 = b.clone();
    let value = move |x: &DVector<f64>| {
        DVector::from_fn(m, |i, _| {
            let ip = a2.row(i).transpose().dot(x);
            (ip * ip - b2[i]) / m as f64
        })
    };
    let a3 = a.clone();
    let jac = move |x: &DVector<f64>| {
        let mut j = DMatrix::zeros(m, n);
        for i in 0..m {
            let ip = a3.row(i).transpose().dot(x);
            for k in 0..n {
                j[(i, k)] = 2.0 * ip * a3[(i, k)] / m as f64;
            }
        }
        j
    };
    let a4 = a.clone();
    let wh = move |_x: &DVector<f64>, y: &DVector<f64>| {
        let mut hmat = DMatrix::zeros(n, n);
        for i in 0..m {
            let row = a4.row(i).transpose();
            hmat += (2.0 * y[i] / m as f64) * &row * row.transpose();
        }
        hmat
    };
    SmoothMap::new(n, m, value).with_jacobian(jac).with_weighted_hessian(wh)
}

/// Spectral-flavored starting point: the dominant eigenvector of
/// `sum b_i a_i a_i^T`, scaled to the average magnitude.
pub fn phase_retrieval_spectral_start(n: usize, m: usize, seed: u64) -> DVector<f64> {
    let (a, b, _) = phase_retrieval_data(n, m, seed);
    let mut s = DMatrix::zeros(n, n);
    for i in 0..m {
        let row = a.row(i).transpose();
        s += b[i] * &row * row.transpose();
    }
    let eig = s.symmetric_eigen();
    let mut top = 0;
    for k in 1..n {
        if eig.eigenvalues[k] > eig.eigenvalues[top] {
            top = k;
        }
    }
    let v = eig.eigenvectors.column(top).into_owned();
    // norm estimate: E[<a,x*>^2] ~ ||x*||^2 for unit-variance a
    let norm_est = (b.sum() / m as f64).sqrt();
    v * norm_est
}

// ---------------------------------------------------------------------------
// CVaR reference LP
// ---------------------------------------------------------------------------

/// Reference optimum of a CVaR instance through the quantile-slack LP
/// `min gamma + 1/(1-alpha) sum p_i u_i` s.t. `g_i(x) - gamma <= u_i`,
/// `u >= 0`, `x in X`.
pub fn cvar_ru_reference(spec: &InstanceSpec) -> Result<f64, CatalogError> {
    let InstanceSpec::Cvar { n, m, alpha, probs, seed } = spec else {
        return Err(CatalogError::BadSpec("reference LP needs a risk instance".into()));
    };
    spec.validate()?;
    let p = cvar_probs(*m, probs, *seed);
    let (a, b) = cvar_affine_data(*n, *m, *seed);
    // variables (x, gamma, u) in R^{n+1+m}
    let total = n + 1 + m;
    let mut c = DVector::zeros(total);
    c[*n] = 1.0;
    for i in 0..*m {
        c[n + 1 + i] = p[i] / (1.0 - alpha);
    }
    let mut d = DMatrix::zeros(*m + *m + 2 * n, total);
    let mut rhs = DVector::zeros(*m + *m + 2 * n);
    for i in 0..*m {
        // a_i x + b_i - gamma - u_i <= 0
        for k in 0..*n {
            d[(i, k)] = a[(i, k)];
        }
        d[(i, *n)] = -1.0;
        d[(i, n + 1 + i)] = -1.0;
        rhs[i] = -b[i];
        // -u_i <= 0
        d[(m + i, n + 1 + i)] = -1.0;
    }
    for k in 0..*n {
        // box |x_k| <= 1
        d[(2 * m + 2 * k, k)] = 1.0;
        rhs[2 * m + 2 * k] = 1.0;
        d[(2 * m + 2 * k + 1, k)] = -1.0;
        rhs[2 * m + 2 * k + 1] = 1.0;
    }
    let feas = Polyhedron::new(DMatrix::zeros(0, total), DVector::zeros(0), d, rhs)?;
    let sol = qp::solve(&QpProblem::lp(c, feas)?)?;
    match sol.status {
        QpStatus::Optimal => Ok(sol.obj),
        QpStatus::Infeasible => Err(CatalogError::BadSpec("reference LP infeasible".into())),
        QpStatus::Unbounded => Err(CatalogError::BadSpec("reference LP unbounded".into())),
    }
}

// ---------------------------------------------------------------------------
// spatial variational inequality
// ---------------------------------------------------------------------------

/// Data of the spatial equilibrium: affine prices/costs with positive
/// diagonal slopes make the map monotone and the KKT system a convex QP.
#[derive(Debug, Clone)]
pub struct SpatialViData {
    pub producers: usize,
    pub regions: usize,
    /// Supply price intercepts/slopes.
    pub p0: DVector<f64>,
    pub p1: DVector<f64>,
    /// Demand price intercepts/slopes.
    pub q0: DVector<f64>,
    pub q1: DVector<f64>,
    /// Transport cost intercepts/slopes.
    pub c0: DVector<f64>,
    pub c1: DVector<f64>,
}

pub fn spatial_vi_data(producers: usize, regions: usize, seed: u64) -> SpatialViData {
    let mut rng = Lcg64::new(seed ^ 0x5B1A);
    let nw = producers * regions;
    SpatialViData {
        producers,
        regions,
        p0: DVector::from_fn(producers, |_, _| rng.range(1.0, 2.0)),
        p1: DVector::from_fn(producers, |_, _| rng.range(0.5, 1.5)),
        q0: DVector::from_fn(regions, |_, _| rng.range(6.0, 10.0)),
        q1: DVector::from_fn(regions, |_, _| rng.range(0.5, 1.5)),
        c0: DVector::from_fn(nw, |_, _| rng.range(0.2, 1.0)),
        c1: DVector::from_fn(nw, |_, _| rng.range(0.3, 0.8)),
    }
}

impl SpatialViData {
    pub fn dim(&self) -> usize {
        self.producers + self.regions + self.producers * self.regions
    }

    /// `F(x) = M x + f0` with `x = (s, d, w)`.
    pub fn monotone_map(&self) -> (DMatrix<f64>, DVector<f64>) {
        let (ns, nd) = (self.producers, self.regions);
        let nw = ns * nd;
        let dim = ns + nd + nw;
        let mut mmat = DMatrix::zeros(dim, dim);
        let mut f0 = DVector::zeros(dim);
        for i in 0..ns {
            mmat[(i, i)] = self.p1[i];
            f0[i] = self.p0[i];
        }
        for j in 0..nd {
            mmat[(ns + j, ns + j)] = self.q1[j];
            f0[ns + j] = -self.q0[j];
        }
        for k in 0..nw {
            mmat[(ns + nd + k, ns + nd + k)] = self.c1[k];
            f0[ns + nd + k] = self.c0[k];
        }
        (mmat, f0)
    }

    /// Flow-balance polyhedron `C`: `sum_j w_ij = s_i`, `sum_i w_ij = d_j`,
    /// `w >= 0`.
    pub fn constraint_set(&self) -> Result<Polyhedron, CatalogError> {
        let (ns, nd) = (self.producers, self.regions);
        let nw = ns * nd;
        let dim = ns + nd + nw;
        let mut a = DMatrix::zeros(ns + nd, dim);
        for i in 0..ns {
            a[(i, i)] = -1.0;
            for j in 0..nd {
                a[(i, ns + nd + i * nd + j)] = 1.0;
            }
        }
        for j in 0..nd {
            a[(ns + j, ns + j)] = -1.0;
            for i in 0..ns {
                a[(ns + j, ns + nd + i * nd + j)] = 1.0;
            }
        }
        let mut d = DMatrix::zeros(nw, dim);
        for k in 0..nw {
            d[(k, ns + nd + k)] = -1.0;
        }
        Ok(Polyhedron::new(a, DVector::zeros(ns + nd), d, DVector::zeros(nw))?)
    }

    /// The merit-composite inner map `G(x) = (<F(x),x>, -F(x))`.
    pub fn merit_map(&self) -> SmoothMap {
        let (mmat, f0) = self.monotone_map();
        let dim = self.dim();
        let m2 = mmat.clone();
        let f2 = f0.clone();
        let value = move |x: &DVector<f64>| {
            let fx = &m2 * x + &f2;
            let mut out = DVector::zeros(dim + 1);
            out[0] = fx.dot(x);
            for k in 0..dim {
                out[k + 1] = -fx[k];
            }
            out
        };
        let m3 = mmat.clone();
        let f3 = f0.clone();
        let jac = move |x: &DVector<f64>| {
            let mut j = DMatrix::zeros(dim + 1, dim);
            let top = 2.0 * &m3 * x + &f3;
            for k in 0..dim {
                j[(0, k)] = top[k];
            }
            for r in 0..dim {
                for k in 0..dim {
                    j[(r + 1, k)] = -m3[(r, k)];
                }
            }
            j
        };
        let m4 = mmat.clone();
        let wh = move |_x: &DVector<f64>, y: &DVector<f64>| 2.0 * y[0] * &m4;
        SmoothMap::new(dim, dim + 1, value).with_jacobian(jac).with_weighted_hessian(wh)
    }

    /// A feasible point with uniform shipping level `t`. For large `t`
    /// supply prices dominate demand prices, so no shipment is profitable
    /// and the gap value is finite (the merit composite needs such a start).
    pub fn high_supply_start(&self, t: f64) -> DVector<f64> {
        let (ns, nd) = (self.producers, self.regions);
        let mut x = DVector::zeros(self.dim());
        for i in 0..ns {
            x[i] = nd as f64 * t;
        }
        for j in 0..nd {
            x[ns + j] = ns as f64 * t;
        }
        for k in 0..ns * nd {
            x[ns + nd + k] = t;
        }
        x
    }

    /// Solve the equilibrium through the equivalent convex QP
    /// `min 1/2 x^T M x + f0^T x` over `C` (valid because `M` is symmetric).
    pub fn kkt_oracle(&self) -> Result<DVector<f64>, CatalogError> {
        let (mmat, f0) = self.monotone_map();
        let c = self.constraint_set()?;
        let sol = qp::solve(&QpProblem::new(mmat, f0, c)?)?;
        if sol.status != QpStatus::Optimal {
            return Err(CatalogError::BadSpec("equilibrium QP did not solve".into()));
        }
        Ok(sol.x)
    }

    /// Gap value `sup_{y in C} <F(x), x - y>`; `+inf` when the supremum
    /// diverges, an error when `x` is outside `C`.
    pub fn merit(&self, x: &DVector<f64>) -> Result<f64, CatalogError> {
        let c = self.constraint_set()?;
        if !c.contains(x, crate::polyhedra::ACTIVE_TOL) {
            return Err(CatalogError::OutsideC);
        }
        let (mmat, f0) = self.monotone_map();
        let fx = &mmat * x + &f0;
        let lp = QpProblem::lp(fx.clone(), c)?;
        let sol = qp::solve(&lp)?;
        match sol.status {
            QpStatus::Optimal => Ok(fx.dot(x) - sol.obj),
            QpStatus::Unbounded => Ok(f64::INFINITY),
            QpStatus::Infeasible => Err(CatalogError::BadSpec("C is empty".into())),
        }
    }
}

/// Gap value of a spatial-equilibrium instance at `x`.
pub fn vi_merit(spec: &InstanceSpec, x: &DVector<f64>) -> Result<f64, CatalogError> {
    let InstanceSpec::SpatialVi { producers, regions, seed } = spec else {
        return Err(CatalogError::BadSpec("merit needs a spatial equilibrium instance".into()));
    };
    spatial_vi_data(*producers, *regions, *seed).merit(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ext::ExtReal;
    use approx::assert_relative_eq;

    #[test]
    fn rng_is_deterministic() {
        let mut a = Lcg64::new(7);
        let mut b = Lcg64::new(7);
        for _ in 0..10 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn goal_objective_is_sum_of_hinges() {
        // alpha = 1, tau = 0, affine g: phi(x) = sum max(0, g_i(x))
        let spec = InstanceSpec::Goal {
            n: 2,
            m: 2,
            alphas: vec![1.0, 1.0],
            targets: vec![0.0, 0.0],
            seed: 3,
        };
        let p = build(&spec).unwrap();
        let (a, b) = goal_affine_data(2, 2, 3);
        let mut rng = Lcg64::new(99);
        for _ in 0..20 {
            let x = DVector::from_fn(2, |_, _| rng.range(-2.0, 2.0));
            let g = &a * &x + &b;
            let want: f64 = (0..2).map(|i| g[i].max(0.0)).sum();
            let got = p.phi(&x).unwrap().finite().unwrap();
            assert_relative_eq!(got, want, epsilon = 1e-8);
        }
    }

    #[test]
    fn all_families_pass_dimension_and_jacobian_checks() {
        let specs: Vec<InstanceSpec> = vec![
            InstanceSpec::Goal { n: 2, m: 3, alphas: vec![1.0, 0.5, 2.0], targets: vec![0.0; 3], seed: 1 },
            InstanceSpec::NlpEquality { n: 2, seed: 2 },
            InstanceSpec::Cvar { n: 3, m: 4, alpha: 0.5, probs: None, seed: 3 },
            InstanceSpec::LassoTaper { n: 3, m: 5, theta: 0.3, taper: true, seed: 4 },
            InstanceSpec::LassoTaper { n: 3, m: 5, theta: 0.3, taper: false, seed: 4 },
            InstanceSpec::PhaseRetrieval { n: 3, m: 8, seed: 5 },
            InstanceSpec::SpatialVi { producers: 2, regions: 2, seed: 6 },
        ];
        let mut rng = Lcg64::new(12);
        for spec in specs {
            let p = build(&spec).unwrap();
            assert_eq!(p.domain().dim(), p.input_dim());
            assert_eq!(p.penalty().dim(), p.output_dim());
            let samples: Vec<DVector<f64>> = (0..20)
                .map(|_| DVector::from_fn(p.input_dim(), |_, _| rng.range(-1.5, 1.5)))
                .collect();
            let worst = p.map().jacobian_consistency(&samples);
            assert!(worst <= 1e-4, "jacobian mismatch {worst} for {spec:?}");
        }
    }

    #[test]
    fn taper_is_c1_at_knots() {
        let theta = 0.7;
        for knot in [-1.0, 1.0] {
            let eps = 1e-6;
            let left = (taper(theta, knot) - taper(theta, knot - eps)) / eps;
            let right = (taper(theta, knot + eps) - taper(theta, knot)) / eps;
            assert!((left - right).abs() <= 1e-5, "kink at {knot}");
            let dl = taper_derivative(theta, knot - eps);
            let dr = taper_derivative(theta, knot + eps);
            assert!((dl - dr).abs() <= 1e-5);
        }
    }

    #[test]
    fn phase_retrieval_planted_is_global_min() {
        let spec = InstanceSpec::PhaseRetrieval { n: 3, m: 10, seed: 11 };
        let p = build(&spec).unwrap();
        let xstar = phase_retrieval_planted(3, 10, 11);
        let v = p.phi(&xstar).unwrap().finite().unwrap();
        assert!(v.abs() <= 1e-12, "phi(planted) = {v}");
    }

    #[test]
    fn cvar_alpha_zero_is_expectation() {
        let spec = InstanceSpec::Cvar { n: 2, m: 3, alpha: 0.0, probs: None, seed: 17 };
        let p = build(&spec).unwrap();
        let probs = cvar_probs(3, &None, 17);
        let (a, b) = cvar_affine_data(2, 3, 17);
        let mut rng = Lcg64::new(5);
        for _ in 0..20 {
            let x = DVector::from_fn(2, |_, _| rng.range(-1.0, 1.0));
            let g = &a * &x + &b;
            let expectation: f64 = (0..3).map(|i| probs[i] * g[i]).sum();
            let got = p.phi(&x).unwrap().finite().unwrap();
            assert_relative_eq!(got, expectation, epsilon = 1e-8);
        }
    }

    #[test]
    fn cvar_reference_single_scenario() {
        // m = 1: the superquantile is the cost itself
        let spec = InstanceSpec::Cvar { n: 2, m: 1, alpha: 0.3, probs: Some(vec![1.0]), seed: 23 };
        let reference = cvar_ru_reference(&spec).unwrap();
        let (a, b) = cvar_affine_data(2, 1, 23);
        // min over the box of a x + b
        let direct = -(a[(0, 0)].abs() + a[(0, 1)].abs()) + b[0];
        assert_relative_eq!(reference, direct, epsilon = 1e-8);
    }

    #[test]
    fn cvar_monotone_in_alpha() {
        let mut last = f64::NEG_INFINITY;
        for alpha in [0.0, 0.5, 0.9] {
            let spec = InstanceSpec::Cvar { n: 2, m: 4, alpha, probs: None, seed: 29 };
            let v = cvar_ru_reference(&spec).unwrap();
            assert!(v >= last - 1e-9, "superquantile must grow with alpha");
            last = v;
        }
    }

    #[test]
    fn vi_kkt_oracle_has_zero_merit() {
        let spec = InstanceSpec::SpatialVi { producers: 2, regions: 2, seed: 31 };
        let data = spatial_vi_data(2, 2, 31);
        let xstar = data.kkt_oracle().unwrap();
        let merit = data.merit(&xstar).unwrap();
        assert!(merit.abs() <= 1e-7, "merit at equilibrium {merit}");
        // perturbed point has strictly positive merit
        let mut xp = xstar.clone();
        // move along a feasible direction: increase one flow and its supply
        // and demand accordingly
        let (ns, nd) = (2, 2);
        xp[0] += 0.1; // s_0
        xp[ns] += 0.1; // d_0
        xp[ns + nd] += 0.1; // w_00
        let mp = data.merit(&xp).unwrap();
        assert!(mp > 1e-6, "perturbed merit {mp}");
        let _ = vi_merit(&spec, &xstar).unwrap();
    }

    #[test]
    fn vi_merit_rejects_outside_points() {
        let data = spatial_vi_data(2, 2, 37);
        let x = DVector::from_element(data.dim(), 1.0);
        assert!(matches!(data.merit(&x), Err(CatalogError::OutsideC)));
    }

    #[test]
    fn nlp_equality_solution_is_kkt_point() {
        let (x, mult) = nlp_equality_solution(3, 41);
        let (a, beta) = nlp_equality_data(3, 41);
        assert_relative_eq!(a.dot(&x), beta, epsilon = 1e-12);
        // stationarity: x + mult * a = 0
        assert!((&x + mult * &a).norm() <= 1e-12);
    }

    #[test]
    fn build_rejects_bad_specs() {
        assert!(build(&InstanceSpec::Cvar { n: 2, m: 2, alpha: 1.0, probs: None, seed: 1 }).is_err());
        assert!(build(&InstanceSpec::Cvar {
            n: 2,
            m: 2,
            alpha: 0.5,
            probs: Some(vec![0.7, 0.2]),
            seed: 1
        })
        .is_err());
        assert!(build(&InstanceSpec::LassoTaper { n: 2, m: 2, theta: 0.0, taper: false, seed: 1 })
            .is_err());
        assert!(build(&InstanceSpec::Goal {
            n: 1,
            m: 2,
            alphas: vec![1.0],
            targets: vec![0.0, 0.0],
            seed: 1
        })
        .is_err());
    }

    #[test]
    fn phi_infinite_outside_goal_box() {
        let spec = InstanceSpec::Goal {
            n: 2,
            m: 2,
            alphas: vec![1.0, 1.0],
            targets: vec![0.0, 0.0],
            seed: 3,
        };
        let p = build(&spec).unwrap();
        assert_eq!(p.phi(&DVector::from_row_slice(&[5.0, 0.0])).unwrap(), ExtReal::PosInf);
    }
}
