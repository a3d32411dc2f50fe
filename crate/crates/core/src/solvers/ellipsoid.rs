//! Central-cut ellipsoid method with periodically optimized certificates.

use nalgebra::{DMatrix, DVector};

use super::certopt::optimize_certificate;
use super::{Rounds, RoundCallback, RunOutput, SolverConfig, Status, VectorField};
use crate::certificates::AccuracyCertificate;
use crate::domain::BallProduct;
use crate::error::{check_dim, check_finite, Error, Result};

/// Shape matrices with `σ_min / σ_max` below this abort the run.
pub const MIN_CONDITIONING: f64 = 1e-14;

/// `log(vol E⁺ / vol E) = log(n/(n+1)) + ((n-1)/2) log(n²/(n²-1))`.
pub fn log_volume_decrement(n: usize) -> f64 {
    let n = n as f64;
    (n / (n + 1.0)).ln() + 0.5 * (n - 1.0) * (n * n / (n * n - 1.0)).ln()
}

/// The ellipsoid `{c + B u : ‖u‖ ≤ 1}`.
#[derive(Clone, Debug)]
pub struct EllipsoidState {
    center: DVector<f64>,
    shape: DMatrix<f64>,
    log_det: f64,
    step: usize,
}

impl EllipsoidState {
    pub fn ball(center: &[f64], radius: f64) -> Result<Self> {
        let n = center.len();
        if n < 2 {
            return Err(Error::InvalidDomain(format!("ellipsoid method needs dimension ≥ 2, got {n}")));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidDomain(format!("bad starting radius {radius}")));
        }
        Ok(EllipsoidState {
            center: DVector::from_column_slice(center),
            shape: DMatrix::identity(n, n) * radius,
            log_det: n as f64 * radius.ln(),
            step: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[f64] {
        self.center.as_slice()
    }

    pub fn shape(&self) -> &DMatrix<f64> {
        &self.shape
    }

    /// `log |det B|`, tracked through the updates.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn steps(&self) -> usize {
        self.step
    }

    /// Replaces the ellipsoid by the smallest one containing its half
    /// `{x : <g, x - c> ≤ 0}`.
    pub fn cut(&mut self, g: &[f64]) -> Result<()> {
        check_dim(self.dim(), g.len())?;
        check_finite(g, "cut direction")?;
        let n = self.dim() as f64;
        let bg = self.shape.tr_mul(&DVector::from_column_slice(g));
        let nb = bg.norm();
        if !(nb > 0.0) || !nb.is_finite() {
            return Err(Error::Solver(format!("degenerate cut at step {}", self.step)));
        }
        let p = bg / nb;
        let bp = &self.shape * &p;
        let alpha = n / (n * n - 1.0).sqrt();
        let gamma = n / (n + 1.0);
        self.center -= &bp / (n + 1.0);
        self.shape *= alpha;
        self.shape.ger(gamma - alpha, &bp, &p, 1.0);
        self.log_det += gamma.ln() + (n - 1.0) * alpha.ln();
        self.step += 1;
        Ok(())
    }

    /// `σ_min(B) / σ_max(B)`.
    pub fn conditioning(&self) -> f64 {
        let sv = self.shape.clone().svd(false, false).singular_values;
        let max = sv.max();
        if max > 0.0 {
            sv.min() / max
        } else {
            0.0
        }
    }
}

/// Runs the ellipsoid method on a monotone field over a product of balls.
///
/// The search starts from the smallest ball around the domain center that
/// contains the domain. Centers inside the domain are cut with the field value
/// and recorded; centers outside are cut with a separating hyperplane. Every
/// `cert_period` steps the best certificate for the protocol so far is
/// computed and handed to `on_round`.
pub fn ellipsoid_run<F: VectorField>(
    field: &F,
    domain: &BallProduct,
    config: &SolverConfig,
    on_round: &mut RoundCallback<'_, F::Payload>,
) -> Result<RunOutput<F::Payload>> {
    config.validate()?;
    let n = domain.dim();
    check_dim(n, field.dim())?;
    let mut state = EllipsoidState::ball(&domain.center(), domain.enclosing_radius())?;
    let period = config.cert_period.unwrap_or(4 * n * n).max(1);
    let check_every = n.div_ceil(8).max(1);
    let opts = config.certificate_options();
    let mut rounds = Rounds::new(n);
    let mut last_round = 0;

    let do_round = |rounds: &mut Rounds<F::Payload>, step: usize, on_round: &mut RoundCallback<'_, F::Payload>| {
        if rounds.protocol.is_empty() {
            rounds.empty_round(step);
            return Ok(None);
        }
        let warm = rounds.best.as_ref().map(|(c, _)| c.clone());
        let (cert, res) = optimize_certificate(&rounds.protocol, domain, warm.as_ref(), &opts)?;
        rounds.round(step, cert, res, config, on_round)
    };

    for step in 1..=config.max_steps {
        let c = state.center().to_vec();
        let g = if domain.contains(&c, 0.0) {
            let (f, payload) = field.eval(&c)?;
            check_dim(n, f.len())?;
            check_finite(&f, "field value")?;
            let zero = f.iter().all(|&v| v == 0.0);
            rounds.protocol.push(step, c, f.clone())?;
            rounds.payloads.push(payload);
            if zero {
                let t = rounds.protocol.len();
                let cert = AccuracyCertificate::vertex(t, t - 1)?;
                rounds.round(step, cert, 0.0, config, on_round)?;
                return rounds.finish(Status::ExactSolution, step);
            }
            f
        } else {
            domain.separate(&c).expect("center outside the domain has a separator")
        };
        state.cut(&g)?;

        if step % check_every == 0 {
            let ratio = state.conditioning();
            if ratio < MIN_CONDITIONING {
                if rounds.protocol.is_empty() {
                    return Err(Error::IllConditioned { step, ratio });
                }
                if last_round != step {
                    do_round(&mut rounds, step, on_round)?;
                }
                return rounds.finish(Status::IllConditioned { ratio }, step);
            }
        }
        if step % period == 0 {
            last_round = step;
            if let Some(status) = do_round(&mut rounds, step, on_round)? {
                return rounds.finish(status, step);
            }
        }
    }
    let steps = config.max_steps;
    if last_round != steps {
        if let Some(status) = do_round(&mut rounds, steps, on_round)? {
            return rounds.finish(status, steps);
        }
    }
    rounds.finish(Status::StepBudget, steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::FnField;

    #[test]
    fn decrement_below_bound() {
        for n in [2usize, 3, 4, 8, 16, 64] {
            let d = log_volume_decrement(n);
            assert!(d < -1.0 / (2.0 * n as f64), "n = {n}");
        }
    }

    #[test]
    fn cut_shrinks_log_det_exactly() {
        let mut e = EllipsoidState::ball(&[0.0, 0.0, 0.0], 2.0).unwrap();
        let gs = [[1.0, 0.0, 0.0], [0.3, -2.0, 0.5], [-1.0, 1.0, 1.0], [0.0, 0.0, -4.0]];
        for g in gs {
            let before = e.shape().clone().determinant().abs().ln();
            e.cut(&g).unwrap();
            let after = e.shape().clone().determinant().abs().ln();
            assert!((after - before - log_volume_decrement(3)).abs() < 1e-12);
            assert!((e.log_det() - after).abs() < 1e-12);
        }
    }

    #[test]
    fn half_space_is_kept() {
        // Points of the old ellipsoid on the kept side stay inside the new one.
        let mut e = EllipsoidState::ball(&[0.0, 0.0], 1.0).unwrap();
        e.cut(&[1.0, 0.0]).unwrap();
        let inv = e.shape().clone().try_inverse().unwrap();
        for k in 0..64 {
            let th = k as f64 / 64.0 * std::f64::consts::TAU;
            let x = DVector::from_vec(vec![th.cos().min(0.0), th.sin()]);
            let u = &inv * (x - DVector::from_column_slice(e.center()));
            assert!(u.norm() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn identity_field_converges_to_origin() {
        let domain = BallProduct::origin(&[(2, 1.0)]).unwrap();
        let field = FnField::new(2, |x: &[f64]| x.to_vec());
        let cfg = SolverConfig { eps_target: 1e-6, max_steps: 2000, cert_period: Some(16), ..Default::default() };
        let out = ellipsoid_run(&field, &domain, &cfg, &mut |_| Ok(None)).unwrap();
        assert!(out.status.converged(), "{:?}", out.status);
        let w = crate::certificates::weighted_point(&out.protocol, &out.certificate).unwrap();
        assert!(crate::linalg::norm(&w) < 1e-3);
        for p in out.protocol.points() {
            assert!(domain.contains(p, 1e-10));
        }
    }

    #[test]
    fn rejects_one_dimensional_domains() {
        let domain = BallProduct::origin(&[(1, 1.0)]).unwrap();
        let field = FnField::new(1, |x: &[f64]| x.to_vec());
        assert!(ellipsoid_run(&field, &domain, &SolverConfig::default(), &mut |_| Ok(None)).is_err());
    }
}
