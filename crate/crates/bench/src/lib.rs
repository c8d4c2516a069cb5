//! Shared instance builders for the kernel benchmarks.

use nalgebra::{DMatrix, DVector};
use plqopt::catalog::Lcg64;
use plqopt::polyhedra::Polyhedron;
use plqopt::qp::QpProblem;

/// Seeded box-constrained QP with a positive definite Hessian.
pub fn random_box_qp(n: usize, seed: u64) -> QpProblem {
    let mut rng = Lcg64::new(seed);
    let r = DMatrix::from_fn(n, n, |_, _| rng.range(-1.0, 1.0));
    let h = r.transpose() * r + DMatrix::<f64>::identity(n, n) * 0.1;
    let c = DVector::from_fn(n, |_, _| rng.range(-1.0, 1.0));
    let feasible = Polyhedron::box_set(&vec![-1.0; n], &vec![1.0; n]).expect("box");
    QpProblem::new(h, c, feasible).expect("well-formed QP")
}
