//! Solvers and analysis tools for composite problems of the form
//!
//! ```text
//!     minimize over x in X:   h(G(x)),
//!     h(z) = sup { <y,z> - 1/2 <y,Qy> : y in Y },
//! ```
//!
//! where `X` and `Y` are polyhedra, `Q` is symmetric positive semidefinite,
//! and `G` is a smooth mapping. The penalty `h` is convex piecewise
//! linear-quadratic and may take the value `+inf`, which encodes constraints.
//!
//! The crate is organized bottom-up:
//!
//! - [`polyhedra`]: polyhedral sets, membership, normal cones, cone distances;
//! - [`qp`]: a dense primal active-set solver for convex QPs over polyhedra,
//!   the single computational kernel everything else reduces to;
//! - [`plq`]: the penalty `h` — evaluation, subgradients, dual factorization,
//!   Moreau smoothing;
//! - [`composite`]: the assembled problem, chain-rule subgradients, and the
//!   stationarity residual `dist(0, Phi(x,y,z))`;
//! - [`prox`]: the proximal composite method and a driver that solves a
//!   schedule of approximating problems;
//! - [`duality`]: Lagrangians, dual functions, augmented Lagrangians, and an
//!   augmented-Lagrangian loop;
//! - [`second_order`]: coderivatives of one-dimensional subgradient graphs and
//!   tilt-stability verdicts;
//! - [`catalog`]: seeded builders for the example families used throughout the
//!   test suite.

pub mod catalog;
pub mod composite;
pub mod duality;
pub mod ext;
pub mod linalg;
pub mod plq;
pub mod polyhedra;
pub mod prox;
pub mod qp;
pub mod second_order;

pub use composite::{CompositeProblem, SmoothMap, StationarityTriple};
pub use ext::ExtReal;
pub use plq::PlqFunction;
pub use polyhedra::{ConeDescription, NormalCone, Polyhedron};
pub use prox::{ApproxSchedule, ProxParams, SolveTrace};
pub use qp::{QpProblem, QpSolution, QpStatus};
