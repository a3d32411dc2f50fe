//! Decomposition solvers for bilinear saddle-point problems and affine
//! monotone variational inequalities whose domains are only accessible
//! through linear minimization oracles.
//!
//! A huge problem of interest is embedded as the "dual" side of a bilinear
//! master problem whose "primal" side lives in a handful of dimensions. The
//! small primal problem is solved by a first-order method that records an
//! execution protocol; accuracy certificates over that protocol are then
//! transferred into sparse, provably accurate solutions of the huge problem.
//!
//! Module map:
//!
//! * [`domain`]: convex sets with linear minimization oracles.
//! * [`certificates`]: execution protocols, accuracy certificates, residuals.
//! * [`oracles`]: implicit "simple" matrices (dense, knapsack, dynamic programming).
//! * [`solvers`]: ellipsoid and mirror descent with certificates.
//! * [`saddle`]: matrix-game decomposition and exact gap evaluation.
//! * [`vi`]: affine and skew-symmetric VIs, Nash equilibria with pairwise interactions.
//! * [`blotto`]: the Attacker-vs-Defender application.

// `!(x > 0.0)` deliberately rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blotto;
pub mod certificates;
pub mod domain;
pub mod error;
pub mod linalg;
pub mod oracles;
pub mod par;
pub mod saddle;
pub mod solvers;
pub mod vi;

pub use error::{Error, Result};
