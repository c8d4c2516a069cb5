//! Diagnostic suites behind `plqopt check`: subgradient oracle comparisons,
//! a weak-duality sweep, and tilt-stability verdicts with their brute-force
//! cross-check.

use anyhow::{anyhow, Result};
use nalgebra::DVector;

use plqopt::catalog::Lcg64;
use plqopt::duality::{self, GridSpec};
use plqopt::plq::Subgradients;
use plqopt::prox::{self, ProxParams};
use plqopt::qp::{self, QpProblem};
use plqopt::second_order::{self, TiltVerdict};

use crate::problem_file::BuiltProblem;

/// Outcome of a check: exit code 0 (pass), 2 (fail), or 3 (unsupported).
pub enum CheckOutcome {
    Pass,
    Fail,
    Unsupported(String),
}

impl CheckOutcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            CheckOutcome::Pass => 0,
            CheckOutcome::Fail => 2,
            CheckOutcome::Unsupported(_) => 3,
        }
    }
}

/// Compare the penalty's subgradients against the brute-force active-set
/// oracle at sampled in-domain points.
pub fn subgradient_check(built: &BuiltProblem, seed: u64) -> Result<CheckOutcome> {
    let p = &built.problem;
    let h = p.penalty();
    if h.dim() > 6 {
        return Ok(CheckOutcome::Unsupported(format!(
            "brute-force oracle caps the penalty dimension at 6, got {}",
            h.dim()
        )));
    }
    let mut rng = Lcg64::new(seed ^ 0x5C6C);
    let mut all_ok = true;
    println!("point        objective-gap   verdict");
    for k in 0..20 {
        let x = qp::project(
            p.domain(),
            &DVector::from_fn(p.input_dim(), |_, _| rng.range(-1.5, 1.5)),
        )?;
        let z = p.map().value(&x);
        let info = match h.subgradients(&z)? {
            Subgradients::At(info) => info,
            Subgradients::Empty => {
                println!("{k:>5}        out-of-domain   SKIP");
                continue;
            }
        };
        let oracle = match qp::brute_force_qp(&QpProblem::new(
            h.q().clone(),
            -&z,
            h.y_set().clone(),
        )?) {
            Ok(o) => o,
            Err(qp::QpError::BruteForceUnbounded) => {
                return Ok(CheckOutcome::Unsupported(
                    "brute-force oracle needs a bounded multiplier set".into(),
                ))
            }
            Err(e) => return Err(e.into()),
        };
        let gap = (info.solution.obj - oracle.obj).abs();
        let ok = gap <= 1e-7
            && (!info.unique || (&info.representative - &oracle.x).norm() <= 1e-6);
        println!("{k:>5}        {gap:<15.3e} {}", if ok { "PASS" } else { "FAIL" });
        all_ok &= ok;
    }
    Ok(if all_ok { CheckOutcome::Pass } else { CheckOutcome::Fail })
}

/// Weak-duality sweep: every sampled dual value must stay below every sampled
/// primal value.
pub fn duality_check(built: &BuiltProblem, seed: u64) -> Result<CheckOutcome> {
    let p = &built.problem;
    let affine = p.map().affine_data().is_some();
    if !affine && p.input_dim() > 3 {
        return Ok(CheckOutcome::Unsupported(
            "sampled dual values need an affine map or at most 3 variables".into(),
        ));
    }
    let mut rng = Lcg64::new(seed ^ 0xD0A1);
    let mut min_primal = f64::INFINITY;
    for _ in 0..20 {
        let x = qp::project(
            p.domain(),
            &DVector::from_fn(p.input_dim(), |_, _| rng.range(-1.5, 1.5)),
        )?;
        if let Some(v) = p.phi(&x)?.finite() {
            min_primal = min_primal.min(v);
        }
    }
    let grid = GridSpec::default();
    let mut max_dual = f64::NEG_INFINITY;
    let mut rows = 0;
    println!("dual-sample  value           verdict");
    for k in 0..20 {
        let y = qp::project(
            p.penalty().y_set(),
            &DVector::from_fn(p.output_dim(), |_, _| rng.range(-1.0, 1.0)),
        )?;
        let value = if affine {
            duality::dual_affine(p, &y)?
        } else {
            duality::dual_sampled(p, &y, &grid)?.value
        };
        let v = value.as_f64();
        let ok = v <= min_primal + 1e-9;
        println!("{k:>11}  {v:<15.6e} {}", if ok { "PASS" } else { "FAIL" });
        max_dual = max_dual.max(v);
        rows += 1;
    }
    println!("sweep: max dual {max_dual:.6e} <= min primal {min_primal:.6e} over {rows} samples");
    Ok(if max_dual <= min_primal + 1e-9 { CheckOutcome::Pass } else { CheckOutcome::Fail })
}

/// Tilt-stability verdicts. One-dimensional penalties composed with the
/// identity get the full analysis/oracle pair; one-variable composites get
/// the separable diagnostic; anything else is unsupported.
pub fn tilt_check(built: &BuiltProblem) -> Result<CheckOutcome> {
    let p = &built.problem;
    let identity_map = match p.map().affine_data() {
        Some((a, b)) => {
            a.nrows() == 1 && a.ncols() == 1 && (a[(0, 0)] - 1.0).abs() < 1e-12 && b[0].abs() < 1e-12
        }
        None => false,
    };
    if p.output_dim() == 1 && identity_map {
        let h = p.penalty();
        let xbar = second_order::stationary_point_1d(h)?
            .ok_or_else(|| anyhow!("the penalty has no stationary point"))?;
        let analytic = second_order::tilt_stable_1d(h, xbar)?;
        let y_grid: Vec<f64> = (0..11).map(|i| -0.1 + 0.02 * i as f64).collect();
        let oracle = second_order::tilt_oracle_1d(h, xbar, 0.5, 1e-3, &y_grid, 15.0)?;
        println!(
            "tilt at {xbar}: analysis {} / oracle {}",
            if analytic { "stable" } else { "unstable" },
            if oracle { "stable" } else { "unstable" },
        );
        return Ok(if analytic == oracle { CheckOutcome::Pass } else { CheckOutcome::Fail });
    }
    if p.input_dim() == 1 {
        // find a stationary point first, then run the separable diagnostic
        let x0 = DVector::zeros(1);
        let trace = prox::solve(p, &ProxParams::default(), &x0)?;
        let verdict = second_order::tilt_stable_composite_1d(p, trace.final_x())?;
        return Ok(match verdict {
            TiltVerdict::Stable => {
                println!("tilt at {}: stable", trace.final_x()[0]);
                CheckOutcome::Pass
            }
            TiltVerdict::Unstable => {
                println!("tilt at {}: unstable", trace.final_x()[0]);
                CheckOutcome::Pass
            }
            TiltVerdict::Unsupported(why) => CheckOutcome::Unsupported(why),
        });
    }
    Ok(CheckOutcome::Unsupported(
        "tilt verdicts cover 1-D penalties and single-variable composites".into(),
    ))
}
