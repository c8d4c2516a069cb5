//! Lagrangians, dual functions, augmented Lagrangians, exactness checks, and
//! a multiplier-update loop.
//!
//! Two parametrizations of the problem drive everything here: the plain shift
//! `f(u,x) = i_X(x) + h(G(x)+u)` and its quadratic augmentation
//! `f_theta(u,x) = f(u,x) + (theta/2)||u||^2`. The plain one yields the
//! Lagrangian `l(x,y) = i_X(x) + <G(x),y> - 1/2 <y,Qy> - i_Y(y)` (with the
//! minimization convention that `x` outside `X` dominates everything); the
//! augmented one yields a Lagrangian that is smooth in `y`, with gradient
//! `(w_hat - y)/theta` computable from one strictly convex QP.
//!
//! Inner global minimizations used by the verification tools (`dual_sampled`,
//! `exactness_check`) are grid searches over at most three variables with a
//! proximal polish; they return estimates and are flagged as such.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::composite::{CompositeError, CompositeProblem, StationarityTriple};
use crate::ext::ExtReal;
use crate::plq::{PlqError, PlqFunction};
use crate::polyhedra::{Polyhedron, ACTIVE_TOL};
use crate::prox::{self, ProxError, ProxParams};
use crate::qp::{self, QpError, QpProblem, QpStatus};

/// Values below this on an expanding grid certify divergence to `-inf`.
const DIVERGENCE_THRESHOLD: f64 = -1e6;

#[derive(Debug, Error)]
pub enum DualityError {
    #[error("dual sampling supports at most {max} variables, got {got}")]
    GridTooLarge { max: usize, got: usize },
    #[error("grid specification is empty")]
    EmptyGrid,
    #[error("G must be registered as an affine map for the closed-form dual")]
    NotAffine,
    #[error("composite error: {0}")]
    Composite(#[from] CompositeError),
    #[error("penalty error: {0}")]
    Plq(#[from] PlqError),
    #[error("qp solver failure: {0}")]
    Solver(#[from] QpError),
    #[error("prox solver failure: {0}")]
    Prox(#[from] ProxError),
}

/// A multiplier with its dual value.
#[derive(Debug, Clone)]
pub struct DualPoint {
    pub y: DVector<f64>,
    pub value: ExtReal,
    /// Inner minimizer when one was computed.
    pub attained_x: Option<DVector<f64>>,
    /// True when the value came from grid minimization: the grid yields an
    /// upper bound on the true infimum, hence a value at least `psi(y)`.
    pub is_estimate: bool,
}

/// Parameters of the augmented-Lagrangian loop.
#[derive(Debug, Clone)]
pub struct AugParams {
    pub theta: f64,
    /// Multiplier step; the update is `y + (lambda_step/theta)(w_hat - y)`.
    pub lambda_step: f64,
    pub outer_iters: usize,
    pub inner: ProxParams,
}

impl AugParams {
    /// Classical multiplier step: `lambda_step = theta`.
    pub fn new(theta: f64) -> Self {
        AugParams { theta, lambda_step: theta, outer_iters: 50, inner: ProxParams::default() }
    }
}

/// `l(x,y)`; `+inf` off `X` regardless of `y`, `-inf` for `y` off `Y` when
/// `x` is admissible.
pub fn lagrangian(p: &CompositeProblem, x: &DVector<f64>, y: &DVector<f64>) -> ExtReal {
    if !p.domain().contains(x, ACTIVE_TOL) {
        return ExtReal::PosInf;
    }
    if !p.penalty().y_set().contains(y, ACTIVE_TOL) {
        return ExtReal::NegInf;
    }
    let gx = p.map().value(x);
    ExtReal::Finite(gx.dot(y) - 0.5 * y.dot(&(p.penalty().q() * y)))
}

/// Closed-form dual value for affine `G`: with `G(x) = Ax + b`,
/// `psi(y) = <b,y> - 1/2 <y,Qy> - sup_{x in X} <-A^T y, x>`, and `-inf` when
/// the support LP is unbounded or `y` is off `Y`.
pub fn dual_affine(p: &CompositeProblem, y: &DVector<f64>) -> Result<ExtReal, DualityError> {
    let (a, b) = p.map().affine_data().ok_or(DualityError::NotAffine)?;
    if !p.penalty().y_set().contains(y, ACTIVE_TOL) {
        return Ok(ExtReal::NegInf);
    }
    let v = -(a.transpose() * y);
    let lp = QpProblem::lp(-v.clone(), p.domain().clone())?;
    let sol = qp::solve(&lp)?;
    let support = match sol.status {
        QpStatus::Optimal => -sol.obj,
        QpStatus::Unbounded => return Ok(ExtReal::NegInf),
        QpStatus::Infeasible => return Err(DualityError::Composite(CompositeError::EmptyX)),
    };
    Ok(ExtReal::Finite(b.dot(y) - 0.5 * y.dot(&(p.penalty().q() * y)) - support))
}

/// Grid specification for the inner global minimizations.
#[derive(Debug, Clone)]
pub struct GridSpec {
    /// Lattice points per coordinate (at least 2).
    pub points_per_dim: usize,
    /// Expanding half-widths used on coordinates where `X` is unbounded.
    pub radii: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { points_per_dim: 41, radii: vec![1.0, 10.0, 100.0, 1000.0, 2000.0] }
    }
}

/// Estimate `inf phi` by lattice search plus proximal polish. Returns the
/// value and minimizer; `NegInf` when expanding grids dive below the
/// divergence threshold (numerically certified unbounded). The grid value is
/// an upper bound on the true infimum.
pub fn inf_phi_estimate(
    p: &CompositeProblem,
    grid: &GridSpec,
) -> Result<(ExtReal, Option<DVector<f64>>), DualityError> {
    let n = p.input_dim();
    const MAX_DIM: usize = 3;
    if n > MAX_DIM {
        return Err(DualityError::GridTooLarge { max: MAX_DIM, got: n });
    }
    if grid.points_per_dim < 2 || grid.radii.is_empty() {
        return Err(DualityError::EmptyGrid);
    }

    // per-coordinate bounds of X (LPs); infinite sides follow the radii
    let mut lower = vec![f64::NEG_INFINITY; n];
    let mut upper = vec![f64::INFINITY; n];
    for j in 0..n {
        for (sign, slot) in [(1.0, 0), (-1.0, 1)] {
            let mut c = DVector::zeros(n);
            c[j] = sign; // min sign*x_j
            let sol = qp::solve(&QpProblem::lp(c, p.domain().clone())?)?;
            match (sol.status, slot) {
                (QpStatus::Optimal, 0) => lower[j] = sol.obj,
                (QpStatus::Optimal, 1) => upper[j] = -sol.obj,
                _ => {}
            }
        }
    }
    let unbounded = (0..n).any(|j| !lower[j].is_finite() || !upper[j].is_finite());
    let radii: &[f64] = if unbounded { &grid.radii } else { &grid.radii[..1] };

    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut feasible_starts: Vec<DVector<f64>> = Vec::new();
    for &r in radii {
        let lo: Vec<f64> = (0..n).map(|j| lower[j].max(-r)).collect();
        let hi: Vec<f64> = (0..n).map(|j| upper[j].min(r)).collect();
        let k = grid.points_per_dim;
        let total = k.pow(n as u32);
        for flat in 0..total {
            let mut idx = flat;
            let mut x = DVector::zeros(n);
            for j in 0..n {
                let t = (idx % k) as f64 / (k - 1) as f64;
                idx /= k;
                x[j] = lo[j] + t * (hi[j] - lo[j]);
            }
            if !p.domain().contains(&x, ACTIVE_TOL) {
                continue;
            }
            if feasible_starts.len() < 8 {
                feasible_starts.push(x.clone());
            }
            if let ExtReal::Finite(v) = p.phi(&x)? {
                if best.as_ref().is_none_or(|(b, _)| v < *b) {
                    best = Some((v, x));
                }
            }
        }
        if let Some((v, _)) = &best {
            if *v < DIVERGENCE_THRESHOLD {
                return Ok((ExtReal::NegInf, None));
            }
        }
    }

    // polish from the best grid point, or restoration-mode starts when no
    // grid point had finite phi (extended-real penalties)
    let polish_params = ProxParams {
        max_iter: 300,
        stop_tol: 1e-11,
        lambda_max: 100.0,
        ..ProxParams::default()
    };
    let starts: Vec<DVector<f64>> = match &best {
        Some((_, xb)) => vec![xb.clone()],
        None => feasible_starts,
    };
    for s in starts {
        let trace = match prox::solve_allow_infeasible(p, &polish_params, &s) {
            Ok(t) => t,
            Err(ProxError::InfeasibleStart) | Err(ProxError::LinearizedInfeasible) => continue,
            Err(e) => return Err(e.into()),
        };
        let xf = trace.final_x().clone();
        if let ExtReal::Finite(v) = p.phi(&xf)? {
            if v < DIVERGENCE_THRESHOLD {
                return Ok((ExtReal::NegInf, None));
            }
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, xf));
            }
        }
    }
    match best {
        Some((v, x)) => Ok((ExtReal::Finite(v), Some(x))),
        None => Ok((ExtReal::PosInf, None)),
    }
}

/// Estimate `psi(y) = inf_x l(x,y)` by grid plus polish (`n <= 3`). Off `Y`
/// the value is exactly `-inf`.
pub fn dual_sampled(
    p: &CompositeProblem,
    y: &DVector<f64>,
    grid: &GridSpec,
) -> Result<DualPoint, DualityError> {
    if !p.penalty().y_set().contains(y, ACTIVE_TOL) {
        return Ok(DualPoint {
            y: y.clone(),
            value: ExtReal::NegInf,
            attained_x: None,
            is_estimate: false,
        });
    }
    // minimize <y, G(x)> over X as a composite with the singleton penalty
    let m = p.output_dim();
    let hy = PlqFunction::new(Polyhedron::singleton(y).expect("singleton"), DMatrix::zeros(m, m))?;
    let inner = CompositeProblem::new(p.domain().clone(), p.map().clone(), hy)?;
    let (est, attained) = inf_phi_estimate(&inner, grid)?;
    let shift = 0.5 * y.dot(&(p.penalty().q() * y));
    let value = match est {
        ExtReal::Finite(v) => ExtReal::Finite(v - shift),
        other => other,
    };
    let is_estimate = value.is_finite();
    Ok(DualPoint { y: y.clone(), value, attained_x: attained, is_estimate })
}

/// The augmented Lagrangian at `(x, y)` with penalty `theta`.
#[derive(Debug, Clone)]
pub struct AugValue {
    /// `l_theta(x,y)`; `+inf` off `X`.
    pub value: ExtReal,
    /// Minimizer of the inner regularized QP over `Y` (always returned).
    pub w_hat: DVector<f64>,
    /// `grad_y l_theta(x,y) = (w_hat - y)/theta`.
    pub grad_y: DVector<f64>,
}

/// `l_theta(x,y) = i_X(x) - min_{w in Y} { 1/2 <w,Qw> - <G(x),w>
/// + 1/(2 theta) ||w - y||^2 }`; the inner problem is strictly convex, so
/// `w_hat` is unique and `l_theta(x, .)` is smooth.
pub fn aug_lagrangian(
    p: &CompositeProblem,
    x: &DVector<f64>,
    y: &DVector<f64>,
    theta: f64,
) -> Result<AugValue, DualityError> {
    assert!(theta > 0.0, "theta must be positive");
    let m = p.output_dim();
    let gx = p.map().value(x);
    let h = p.penalty().q() + DMatrix::<f64>::identity(m, m) / theta;
    let c = -(&gx + y / theta);
    let sol = qp::solve(&QpProblem::new(h, c, p.penalty().y_set().clone())?)?;
    debug_assert_eq!(sol.status, QpStatus::Optimal, "strictly convex over nonempty Y");
    let inner_min = sol.obj + y.norm_squared() / (2.0 * theta);
    let w_hat = sol.x;
    let grad_y = (&w_hat - y) / theta;
    let value = if p.domain().contains(x, ACTIVE_TOL) {
        ExtReal::Finite(-inner_min)
    } else {
        ExtReal::PosInf
    };
    Ok(AugValue { value, w_hat, grad_y })
}

/// Which parametrization an exactness check runs against.
#[derive(Debug, Clone, Copy)]
pub enum Rockafellian {
    Plain,
    Augmented(f64),
}

#[derive(Debug, Clone)]
pub struct ExactnessSample {
    pub u: DVector<f64>,
    /// `inf_x f(u,x)` (plus the quadratic term for the augmented family).
    pub lhs: ExtReal,
    /// `inf phi + <y_bar, u>` (minus the quadratic term for the
    /// neighborhood variant).
    pub rhs: f64,
    pub margin: f64,
    pub holds: bool,
}

#[derive(Debug, Clone)]
pub struct ExactnessReport {
    pub samples: Vec<ExactnessSample>,
    pub all_hold: bool,
    /// For the augmented family: the local quadratic-minorant condition on a
    /// neighborhood grid of `u = 0`, checked with the plain inner values.
    pub neighborhood: Option<(Vec<ExactnessSample>, bool)>,
}

impl ExactnessReport {
    /// Per-sample table `u_0,..,u_{m-1},lhs,rhs,margin,holds` as CSV.
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        let m = self.samples.first().map_or(0, |s| s.u.len());
        let mut header: Vec<String> = (0..m).map(|i| format!("u_{i}")).collect();
        header.extend(["lhs", "rhs", "margin", "holds"].map(String::from));
        writeln!(out, "{}", header.join(","))?;
        for s in &self.samples {
            let mut row: Vec<String> = s.u.iter().map(|v| v.to_string()).collect();
            row.push(s.lhs.to_string());
            row.push(s.rhs.to_string());
            row.push(s.margin.to_string());
            row.push(s.holds.to_string());
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Verify `inf_x f(u,x) >= inf phi + <y_bar, u>` on each sampled `u`; for the
/// augmented family also check the local quadratic-minorant inequality on a
/// neighborhood grid of the origin.
pub fn exactness_check(
    p: &CompositeProblem,
    rock: Rockafellian,
    y_bar: &DVector<f64>,
    u_samples: &[DVector<f64>],
    inf_phi: f64,
    grid: &GridSpec,
) -> Result<ExactnessReport, DualityError> {
    let inner_at = |u: &DVector<f64>| -> Result<ExtReal, DualityError> {
        let shifted = CompositeProblem::new(
            p.domain().clone(),
            p.map().shifted(u),
            p.penalty().clone(),
        )?;
        Ok(inf_phi_estimate(&shifted, grid)?.0)
    };

    let quad = match rock {
        Rockafellian::Plain => 0.0,
        Rockafellian::Augmented(theta) => theta,
    };
    let mut samples = Vec::with_capacity(u_samples.len());
    for u in u_samples {
        let plain = inner_at(u)?;
        let lhs = match plain {
            ExtReal::Finite(v) => ExtReal::Finite(v + 0.5 * quad * u.norm_squared()),
            other => other,
        };
        let rhs = inf_phi + y_bar.dot(u);
        let margin = lhs.as_f64() - rhs;
        let holds = lhs.as_f64() >= rhs - 1e-8;
        samples.push(ExactnessSample { u: u.clone(), lhs, rhs, margin, holds });
    }
    let all_hold = samples.iter().all(|s| s.holds);

    let neighborhood = match rock {
        Rockafellian::Plain => None,
        Rockafellian::Augmented(theta) => {
            let m = p.output_dim();
            let mut checks = Vec::new();
            let steps = 5usize;
            let radius = 0.25;
            let total = steps.pow(m as u32);
            for flat in 0..total {
                let mut idx = flat;
                let mut u = DVector::zeros(m);
                for j in 0..m {
                    let t = (idx % steps) as f64 / (steps - 1) as f64;
                    idx /= steps;
                    u[j] = -radius + 2.0 * radius * t;
                }
                let plain = inner_at(&u)?;
                let rhs = inf_phi + y_bar.dot(&u) - 0.5 * theta * u.norm_squared();
                let margin = plain.as_f64() - rhs;
                let holds = plain.as_f64() >= rhs - 1e-8;
                checks.push(ExactnessSample { u, lhs: plain, rhs, margin, holds });
            }
            let ok = checks.iter().all(|s| s.holds);
            Some((checks, ok))
        }
    };

    Ok(ExactnessReport { samples, all_hold, neighborhood })
}

/// One outer record of the augmented-Lagrangian loop.
#[derive(Debug, Clone)]
pub struct AlmRecord {
    pub outer: usize,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub phi: ExtReal,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct AlmTrace {
    pub records: Vec<AlmRecord>,
    pub final_triple: StationarityTriple,
}

/// Augmented-Lagrangian loop: inner projected-gradient minimization of
/// `l_theta(., y)` using the envelope gradient `grad_x = grad G(x)^T w_hat`,
/// then the multiplier update `y <- y + (lambda_step/theta)(w_hat - y)`.
pub fn alm_solve(
    p: &CompositeProblem,
    params: &AugParams,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
) -> Result<AlmTrace, DualityError> {
    let theta = params.theta;
    let mut x = qp::project(p.domain(), x0)?;
    let mut y = y0.clone();
    let mut records = Vec::new();

    for outer in 0..params.outer_iters {
        // inner minimization of l_theta(., y) by projected gradient
        let mut step = 1.0f64;
        for _ in 0..params.inner.max_iter {
            let av = aug_lagrangian(p, &x, &y, theta)?;
            let fx = av.value.finite().expect("x in X keeps the value finite");
            let grad = p.map().jacobian(&x).transpose() * &av.w_hat;
            let mut moved = false;
            let mut last_step_norm = 0.0;
            for _ in 0..40 {
                let trial = qp::project(p.domain(), &(&x - step * &grad))?;
                let diff = (&trial - &x).norm_squared();
                if diff == 0.0 {
                    break;
                }
                let ft = aug_lagrangian(p, &trial, &y, theta)?
                    .value
                    .finite()
                    .expect("projection stays in X");
                if ft <= fx - 1e-4 * diff / step {
                    last_step_norm = diff.sqrt();
                    x = trial;
                    moved = true;
                    step = (step * 2.0).min(1e6);
                    break;
                }
                step *= 0.5;
            }
            if !moved || last_step_norm <= params.inner.stop_tol {
                break;
            }
        }
        // multiplier update from the smooth y-gradient
        let av = aug_lagrangian(p, &x, &y, theta)?;
        y += (params.lambda_step / theta) * (&av.w_hat - &y);
        let z = p.map().value(&x);
        let triple = p.stationarity_residual(&x, &y, &z)?;
        records.push(AlmRecord {
            outer,
            x: x.clone(),
            y: y.clone(),
            phi: p.phi(&x)?,
            residual: triple.residual,
        });
        if triple.residual <= params.inner.stop_tol {
            break;
        }
    }
    let z = p.map().value(&x);
    let final_triple = p.stationarity_residual(&x, &y, &z)?;
    Ok(AlmTrace { records, final_triple })
}
