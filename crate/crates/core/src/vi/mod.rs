//! Decomposition of affine monotone variational inequalities.
//!
//! A VI with operator `F(η) = Sη + s` on an LMO-represented set `H` is solved
//! through a primal field `Ψ` on a ball `Ξ ⊇ H` (see [`affine`]). When the
//! linear part factors as `2QᵀP` with `QᵀP` skew-symmetric, the primal lives
//! in `K + K` dimensions regardless of the size of `H` (see [`skew`]). Nash
//! equilibria of games with pairwise bilinear interactions reduce to the skew
//! case (see [`nash`]).
//!
//! Approximate solutions `η^t = Σ λ_i η̄(ξ_i)` come with the certified bound
//! `ε_VI(η^t) ≤ Res(I_t, λ | Ξ)`.

pub mod affine;
pub mod nash;
pub mod skew;

use serde::{Deserialize, Serialize};

use crate::certificates::{AccuracyCertificate, ExecutionProtocol};
use crate::solvers::{HistoryRecord, RoundView, Status};
use crate::Result;

pub use affine::{solve_affine_vi, solve_affine_vi_with, AffineField, AffineViSpec, LinearOperator};
pub use nash::{eps_nash, nash_to_skew, NashPlayer, NashSpec};
pub use skew::{
    eps_vi_skew, solve_skew_vi, solve_skew_vi_with, BlockAtoms, SkewBlock, SkewDense, SkewField, SkewStep, SkewViSpec,
};

/// Result of a VI decomposition run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ViOutcome<E> {
    /// Recovered approximate solution of the VI on `H`.
    pub eta: E,
    /// Certified bound `Res(I_t, λ | Ξ)` on its dual gap.
    pub eps_bound: f64,
    /// Exact dual gap, when computable.
    pub eps_exact: Option<f64>,
    pub status: Status,
    pub steps: usize,
    pub history: Vec<HistoryRecord>,
    #[serde(skip)]
    pub protocol: Option<ExecutionProtocol>,
    #[serde(skip)]
    pub certificate: Option<AccuracyCertificate>,
}

/// What a VI observer sees at each certificate round.
pub struct ViRound<'a, P, E> {
    pub view: &'a RoundView<'a, P>,
    pub eta: &'a E,
    pub eps_exact: Option<f64>,
}

/// Observer callback for VI runs.
pub type ViObserver<'c, P, E> = dyn for<'a> FnMut(&ViRound<'a, P, E>) -> Result<()> + 'c;

/// Keeps the round with the smallest exact gap, or failing that the smallest
/// certified bound.
pub(crate) struct BestRound<E> {
    best: Option<(E, f64, Option<f64>)>,
}

impl<E> BestRound<E> {
    pub fn new() -> Self {
        BestRound { best: None }
    }

    pub fn offer(&mut self, eta: E, bound: f64, exact: Option<f64>) {
        let key = |b: f64, e: Option<f64>| e.unwrap_or(b);
        let better = self.best.as_ref().is_none_or(|(_, b, e)| key(bound, exact) <= key(*b, *e));
        if better {
            self.best = Some((eta, bound, exact));
        }
    }

    pub fn take(self) -> Option<(E, f64, Option<f64>)> {
        self.best
    }
}
