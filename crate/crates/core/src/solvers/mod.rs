//! Certificate-producing first-order solvers for small monotone problems on
//! products of Euclidean balls.
//!
//! Both solvers record the points where the field was evaluated inside the
//! domain (the productive steps) into an [`ExecutionProtocol`], periodically
//! attach an [`AccuracyCertificate`] and report to a caller-supplied callback,
//! which may return an externally computed gap to stop on.

mod certopt;
mod ellipsoid;
mod md;

use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use certopt::{optimize_certificate, optimize_certificate_split, CertOptimizer, CertificateOptions};
pub use ellipsoid::{ellipsoid_run, log_volume_decrement, EllipsoidState};
pub use md::md_run;

use crate::certificates::{AccuracyCertificate, ExecutionProtocol};
use crate::domain::BallProduct;
use crate::error::{Error, Result};

/// A vector field `x ↦ F(x)` with an optional side payload per evaluation.
pub trait VectorField {
    type Payload: Clone;

    fn dim(&self) -> usize;

    fn eval(&self, x: &[f64]) -> Result<(Vec<f64>, Self::Payload)>;
}

/// Adapts a plain closure into a [`VectorField`] without payload.
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> Vec<f64>> FnField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnField { dim, f }
    }
}

impl<F: Fn(&[f64]) -> Vec<f64>> VectorField for FnField<F> {
    type Payload = ();
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64]) -> Result<(Vec<f64>, ())> {
        Ok(((self.f)(x), ()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Ellipsoid,
    #[serde(rename = "md")]
    MirrorDescent,
}

impl FromStr for SolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ellipsoid" => Ok(SolverKind::Ellipsoid),
            "md" | "mirror-descent" => Ok(SolverKind::MirrorDescent),
            other => Err(Error::InvalidSpec(format!("unknown solver '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Stop once the certified residual is at most this.
    pub eps_target: f64,
    pub max_steps: usize,
    /// Steps between certificate rounds; `None` means `4 n²` for the
    /// ellipsoid method and `100` for mirror descent.
    pub cert_period: Option<usize>,
    /// Stop once the gap returned by the round callback is at most this.
    pub gap_threshold: f64,
    /// Iteration budget of the entropic mirror-descent certificate optimizer.
    pub inner_iters: usize,
    pub seed: u64,
    pub cert_optimizer: CertOptimizer,
    /// Mirror-descent starting point; defaults to the domain center.
    pub start: Option<Vec<f64>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eps_target: 1e-6,
            max_steps: 10_000,
            cert_period: None,
            gap_threshold: 1e-4,
            inner_iters: 2000,
            seed: 0,
            cert_optimizer: CertOptimizer::default(),
            start: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_target > 0.0) {
            return Err(Error::InvalidSpec("eps_target must be positive".into()));
        }
        if self.cert_period == Some(0) {
            return Err(Error::InvalidSpec("cert_period must be at least 1".into()));
        }
        if self.gap_threshold.is_nan() {
            return Err(Error::InvalidSpec("gap_threshold is NaN".into()));
        }
        Ok(())
    }

    pub(crate) fn certificate_options(&self) -> CertificateOptions {
        CertificateOptions { method: self.cert_optimizer, inner_iters: self.inner_iters, ..Default::default() }
    }
}

/// One certificate round, as written to the history stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub step: usize,
    /// Productive steps so far.
    pub productive: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gap: Option<f64>,
}

/// History as JSON lines.
pub fn history_jsonl(history: &[HistoryRecord]) -> String {
    let mut out = String::new();
    for h in history {
        out.push_str(&serde_json::to_string(h).expect("history records serialize"));
        out.push('\n');
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// The callback's gap fell to the threshold.
    GapReached,
    /// The certified residual fell to `eps_target`.
    ResidualReached,
    /// The field vanished at a productive point: it is an exact solution.
    ExactSolution,
    StepBudget,
    /// The ellipsoid shape matrix degenerated; the last certificate stands.
    IllConditioned { ratio: f64 },
}

impl Status {
    pub fn converged(&self) -> bool {
        matches!(self, Status::GapReached | Status::ResidualReached | Status::ExactSolution)
    }
}

/// What the round callback sees.
pub struct RoundView<'a, P> {
    pub step: usize,
    pub protocol: &'a ExecutionProtocol,
    pub certificate: &'a AccuracyCertificate,
    pub residual: f64,
    /// Payloads of the productive steps, aligned with the protocol.
    pub payloads: &'a [P],
}

#[derive(Clone, Debug)]
pub struct RunOutput<P> {
    pub protocol: ExecutionProtocol,
    /// Best certificate found (lowest residual).
    pub certificate: AccuracyCertificate,
    pub residual: f64,
    pub payloads: Vec<P>,
    pub history: Vec<HistoryRecord>,
    pub status: Status,
    pub steps: usize,
}

/// Callback invoked at every certificate round; may return a gap to stop on.
pub type RoundCallback<'c, P> = dyn FnMut(&RoundView<'_, P>) -> Result<Option<f64>> + 'c;

/// Runs the selected solver.
pub fn run<F: VectorField>(
    kind: SolverKind,
    field: &F,
    domain: &BallProduct,
    config: &SolverConfig,
    on_round: &mut RoundCallback<'_, F::Payload>,
) -> Result<RunOutput<F::Payload>> {
    match kind {
        SolverKind::Ellipsoid => ellipsoid_run(field, domain, config, on_round),
        SolverKind::MirrorDescent => md_run(field, domain, config, on_round),
    }
}

/// Shared bookkeeping for certificate rounds.
pub(crate) struct Rounds<P> {
    pub protocol: ExecutionProtocol,
    pub payloads: Vec<P>,
    pub history: Vec<HistoryRecord>,
    pub best: Option<(AccuracyCertificate, f64)>,
}

impl<P> Rounds<P> {
    pub fn new(dim: usize) -> Self {
        Rounds { protocol: ExecutionProtocol::new(dim), payloads: Vec::new(), history: Vec::new(), best: None }
    }

    /// Records a certificate round; returns a stopping status if one applies.
    pub fn round(
        &mut self,
        step: usize,
        cert: AccuracyCertificate,
        residual: f64,
        config: &SolverConfig,
        on_round: &mut RoundCallback<'_, P>,
    ) -> Result<Option<Status>> {
        let view = RoundView {
            step,
            protocol: &self.protocol,
            certificate: &cert,
            residual,
            payloads: &self.payloads,
        };
        let gap = on_round(&view)?;
        self.history.push(HistoryRecord { step, productive: self.protocol.len(), residual: Some(residual), gap });
        if self.best.as_ref().is_none_or(|(_, r)| residual <= *r) {
            self.best = Some((cert, residual));
        }
        if gap.is_some_and(|g| g <= config.gap_threshold) {
            return Ok(Some(Status::GapReached));
        }
        if residual <= config.eps_target {
            return Ok(Some(Status::ResidualReached));
        }
        Ok(None)
    }

    pub fn empty_round(&mut self, step: usize) {
        self.history.push(HistoryRecord { step, productive: 0, residual: None, gap: None });
    }

    pub fn finish(self, status: Status, steps: usize) -> Result<RunOutput<P>> {
        let (certificate, residual) = self
            .best
            .ok_or_else(|| Error::Solver("no productive step: the domain center was never feasible".into()))?;
        let certificate = certificate.extended(self.protocol.len());
        Ok(RunOutput {
            protocol: self.protocol,
            certificate,
            residual,
            payloads: self.payloads,
            history: self.history,
            status,
            steps,
        })
    }
}
