//! Property tests for the solver invariants that hold on whole input
//! families rather than single examples.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use plqopt::plq::PlqFunction;
use plqopt::polyhedra::Polyhedron;
use plqopt::qp::{self, QpProblem, QpStatus};

fn box_poly(lower: &[f64], upper: &[f64]) -> Polyhedron {
    Polyhedron::box_set(lower, upper).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    /// Oracle equivalence on random bounded box QPs.
    #[test]
    fn qp_matches_brute_force(
        n in 1usize..4,
        seedc in proptest::collection::vec(-1.0f64..1.0, 4),
        seedh in proptest::collection::vec(-1.0f64..1.0, 16),
        widths in proptest::collection::vec(0.5f64..2.0, 4),
        use_h in any::<bool>(),
    ) {
        let c = DVector::from_fn(n, |i, _| seedc[i]);
        let h = if use_h {
            let r = DMatrix::from_fn(n, n, |i, j| seedh[i * 4 + j]);
            r.transpose() * r
        } else {
            DMatrix::zeros(n, n)
        };
        let lower: Vec<f64> = (0..n).map(|i| -widths[i]).collect();
        let upper: Vec<f64> = (0..n).map(|i| widths[i]).collect();
        let qp_prob = QpProblem::new(h, c, box_poly(&lower, &upper)).unwrap();
        let sol = qp::solve(&qp_prob).unwrap();
        let bf = qp::brute_force_qp(&qp_prob).unwrap();
        prop_assert_eq!(sol.status, QpStatus::Optimal);
        prop_assert!((sol.obj - bf.obj).abs() <= 1e-7, "{} vs {}", sol.obj, bf.obj);
    }

    /// The projection satisfies the variational inequality against every
    /// vertex of the target polyhedron.
    #[test]
    fn projection_variational_inequality(
        n in 1usize..4,
        point in proptest::collection::vec(-3.0f64..3.0, 4),
    ) {
        let p = box_poly(&vec![-1.0; n], &vec![1.0; n]);
        let x = DVector::from_fn(n, |i, _| point[i]);
        let proj = qp::project(&p, &x).unwrap();
        for v in p.vertices().unwrap() {
            let lhs = (&x - &proj).dot(&(&v - &proj));
            prop_assert!(lhs <= 1e-8, "vertex violates the projection inequality: {lhs}");
        }
        // idempotence
        let again = qp::project(&p, &proj).unwrap();
        prop_assert!((again - &proj).norm() <= 1e-9);
    }

    /// Weak duality inside the QP: the Lagrangian value at the returned
    /// multipliers never exceeds the primal objective.
    #[test]
    fn qp_weak_duality(
        n in 1usize..4,
        seedc in proptest::collection::vec(-1.0f64..1.0, 4),
    ) {
        let c = DVector::from_fn(n, |i, _| seedc[i]);
        let h = DMatrix::<f64>::identity(n, n);
        let p = box_poly(&vec![-1.0; n], &vec![1.0; n]);
        let qp_prob = QpProblem::new(h, c, p).unwrap();
        let sol = qp::solve(&qp_prob).unwrap();
        // L(x*, mu, nu) = obj + nu . (D x* - d) <= obj since nu >= 0 and
        // slacks are nonpositive; the bound equals the dual value because
        // x* is stationary for the Lagrangian
        let (d, d_rhs) = qp_prob.feasible.ineq_rows();
        let slack = d * &sol.x - d_rhs;
        let bound = sol.obj + sol.ineq_mult.dot(&slack);
        prop_assert!(bound <= sol.obj + 1e-7);
    }

    /// Moreau smoothing minorizes the penalty and improves with nu.
    #[test]
    fn moreau_minorizes(
        z0 in -3.0f64..3.0,
        z1 in -3.0f64..3.0,
        nu in 1u32..40,
    ) {
        let h = PlqFunction::new(
            Polyhedron::box_set(&[-1.0, 0.0], &[1.0, 2.0]).unwrap(),
            DMatrix::zeros(2, 2),
        )
        .unwrap();
        let z = DVector::from_row_slice(&[z0, z1]);
        let exact = h.eval(&z).unwrap().finite().unwrap();
        let smooth = h.moreau_smoothed(nu).eval(&z).unwrap().finite().unwrap();
        prop_assert!(smooth <= exact + 1e-12);
        // sup_{y in Y} ||y||^2 = 1 + 4
        prop_assert!(exact - smooth <= 5.0 / (2.0 * nu as f64) + 1e-12);
    }

    /// Subgradient inequality of the convex penalty.
    #[test]
    fn plq_subgradient_inequality(
        za in -2.0f64..2.0,
        zb in -2.0f64..2.0,
        xa in -2.0f64..2.0,
        xb in -2.0f64..2.0,
    ) {
        let h = PlqFunction::new(
            Polyhedron::box_set(&[-1.0, -1.0], &[1.0, 1.0]).unwrap(),
            DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0]),
        )
        .unwrap();
        let z = DVector::from_row_slice(&[za, zb]);
        let x = DVector::from_row_slice(&[xa, xb]);
        let g = h.subgradients(&z).unwrap();
        let g = g.representative().expect("real-valued penalty");
        let hz = h.eval(&z).unwrap().finite().unwrap();
        let hx = h.eval(&x).unwrap().finite().unwrap();
        prop_assert!(hx >= hz + g.dot(&(&x - &z)) - 1e-8);
    }
}
