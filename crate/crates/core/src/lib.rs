//! Linear complementarity problems studied through their complementary cones.
//!
//! An LCP(M, q) asks for `z, w >= 0` with `w = M z + q` and `z'w = 0`. Writing
//! `x = w - z` turns it into the piecewise-linear equation `f_M(x) = q`, where
//! `f_M` acts as the complementary matrix `C_{-M}(alpha)` on the orthant indexed
//! by `alpha`. Everything in this crate is built on that correspondence:
//!
//! * [`algebra`]: index sets, complementary matrices, `f_M` and the `x <-> (z, w)` maps.
//! * [`cone`]: planar ray arrangements and the cyclic cone signature.
//! * [`solver`]: complete enumeration of isolated solutions and continua.
//! * [`singularity`]: Clarke generalized Jacobian and regularity of solutions.
//! * [`equivalence`]: stability, sufficient sign conditions, signature classes.
//! * [`bifurcation`]: closed-form branch tracing along piecewise-linear paths.
//! * [`interconnect`]: feedback interconnection and the pleat/pitchfork scenario.
//! * [`export`]: CSV writers for diagrams and surfaces.

pub mod algebra;
pub mod bifurcation;
pub mod cone;
pub mod equivalence;
pub mod error;
pub mod export;
pub mod interconnect;
pub mod io;
pub mod singularity;
pub mod solver;
pub mod tol;

pub use algebra::{IndexSet, LcpProblem, Sign};
pub use error::{LcpError, Result};
pub use tol::Tolerance;

pub use nalgebra::{DMatrix, DVector};
