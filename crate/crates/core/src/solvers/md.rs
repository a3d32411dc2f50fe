//! Euclidean mirror descent (projected subgradient) with step-size weighted
//! certificates.

use super::{Rounds, RoundCallback, RunOutput, SolverConfig, Status, VectorField};
use crate::certificates::{residual_over_balls, AccuracyCertificate};
use crate::domain::BallProduct;
use crate::error::{check_dim, check_finite, Error, Result};
use crate::linalg::norm;

/// Runs `ξ_{i+1} = Proj(ξ_i - γ_i F(ξ_i))` with `γ_i = R / (L̂ √i)`, where `R`
/// is the domain's enclosing radius and `L̂` the largest `‖F‖` seen so far.
/// Every step is productive; the certificate is `λ_i ∝ γ_i`.
pub fn md_run<F: VectorField>(
    field: &F,
    domain: &BallProduct,
    config: &SolverConfig,
    on_round: &mut RoundCallback<'_, F::Payload>,
) -> Result<RunOutput<F::Payload>> {
    config.validate()?;
    let n = domain.dim();
    check_dim(n, field.dim())?;
    if config.max_steps == 0 {
        return Err(Error::InvalidSpec("max_steps must be at least 1".into()));
    }
    let radius = domain.enclosing_radius();
    let period = config.cert_period.unwrap_or(100).max(1);
    let mut x = match &config.start {
        Some(s) => {
            check_dim(n, s.len())?;
            check_finite(s, "start point")?;
            s.clone()
        }
        None => domain.center(),
    };
    domain.project(&mut x);

    let mut rounds = Rounds::new(n);
    let mut gammas = Vec::new();
    let mut lhat = 0.0f64;
    for i in 1..=config.max_steps {
        let (f, payload) = field.eval(&x)?;
        check_dim(n, f.len())?;
        check_finite(&f, "field value")?;
        lhat = lhat.max(norm(&f));
        let gamma = if lhat > 0.0 { radius / (lhat * (i as f64).sqrt()) } else { radius / (i as f64).sqrt() };
        gammas.push(gamma);
        let next: Vec<f64> = x.iter().zip(&f).map(|(a, g)| a - gamma * g).collect();
        rounds.protocol.push(i, std::mem::replace(&mut x, next), f)?;
        rounds.payloads.push(payload);
        domain.project(&mut x);

        if i % period == 0 || i == config.max_steps {
            let cert = AccuracyCertificate::normalized(gammas.clone())?;
            let res = residual_over_balls(&rounds.protocol, &cert, domain)?;
            if let Some(status) = rounds.round(i, cert, res, config, on_round)? {
                return rounds.finish(status, i);
            }
        }
    }
    rounds.finish(Status::StepBudget, config.max_steps)
}
