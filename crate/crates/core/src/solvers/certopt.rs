//! Best accuracy certificate for a given protocol over a product of balls.
//!
//! Writing `c_i = <F_i, w_i - center>` the residual of weights `λ` is
//!
//! ```text
//! f(λ) = Σ λ_i c_i + Σ_b R_b ‖Σ λ_i F_i^b‖
//! ```
//!
//! which is convex in `λ`. Its minimum over the simplex equals the value of
//! `max_{‖z_b‖ ≤ R_b} min_i (c_i - <F_i, z>)`. Two optimizers are provided:
//! entropic mirror descent on `λ` directly, and a log-barrier interior-point
//! method on the max-min problem whose barrier multipliers give `λ`. Whatever
//! the method, the returned weights are never worse than the uniform ones or
//! the warm start.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::certificates::{residual_over_balls, AccuracyCertificate, ExecutionProtocol};
use crate::domain::BallProduct;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, norm};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertOptimizer {
    MirrorDescent,
    #[default]
    InteriorPoint,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CertificateOptions {
    pub method: CertOptimizer,
    /// Mirror-descent iterations.
    pub inner_iters: usize,
    /// Interior-point stopping tolerance on the duality gap, relative to the
    /// protocol's scale.
    pub tol: f64,
    /// Cap on interior-point Newton steps.
    pub max_newton: usize,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        CertificateOptions { method: CertOptimizer::InteriorPoint, inner_iters: 2000, tol: 1e-12, max_newton: 400 }
    }
}

/// Residual data in centered form.
struct Problem<'a> {
    c: Vec<f64>,
    fields: &'a [Vec<f64>],
    balls: &'a BallProduct,
}

impl Problem<'_> {
    fn value(&self, lambda: &[f64]) -> f64 {
        let n = self.balls.dim();
        let mut g = vec![0.0; n];
        let mut lin = 0.0;
        for ((l, f), c) in lambda.iter().zip(self.fields).zip(&self.c) {
            if *l != 0.0 {
                lin += l * c;
                crate::linalg::axpy(&mut g, *l, f);
            }
        }
        lin + self.balls.blocks().iter().map(|b| b.radius * norm(&g[b.range()])).sum::<f64>()
    }

    fn subgradient(&self, lambda: &[f64]) -> Vec<f64> {
        let n = self.balls.dim();
        let mut g = vec![0.0; n];
        for (l, f) in lambda.iter().zip(self.fields) {
            if *l != 0.0 {
                crate::linalg::axpy(&mut g, *l, f);
            }
        }
        // Scaled unit direction per block; zero where the aggregate vanishes.
        let mut dir = vec![0.0; n];
        for b in self.balls.blocks() {
            let nb = norm(&g[b.range()]);
            if nb > 0.0 {
                for k in b.range() {
                    dir[k] = b.radius * g[k] / nb;
                }
            }
        }
        self.fields.iter().zip(&self.c).map(|(f, c)| c + dot(f, &dir)).collect()
    }

    /// Lower bound `min_i (c_i - <F_i, z>)` for a feasible `z`.
    fn dual(&self, z: &[f64]) -> f64 {
        self.fields.iter().zip(&self.c).map(|(f, c)| c - dot(f, z)).fold(f64::INFINITY, f64::min)
    }
}

fn entropic_md(p: &Problem, start: &[f64], iters: usize) -> Vec<f64> {
    let t = start.len();
    let mut lambda = start.to_vec();
    let mut best = (p.value(&lambda), lambda.clone());
    let log_t = (t as f64).ln().max(1.0);
    for k in 1..=iters {
        let g = p.subgradient(&lambda);
        let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gmax == 0.0 {
            break;
        }
        let eta = (2.0 * log_t).sqrt() / (gmax * (k as f64).sqrt());
        let gmin = g.iter().copied().fold(f64::INFINITY, f64::min);
        let mut s = 0.0;
        for (l, gi) in lambda.iter_mut().zip(&g) {
            // Floor keeps zero-weight entries reachable.
            *l = l.max(1e-300) * (-eta * (gi - gmin)).exp();
            s += *l;
        }
        for l in &mut lambda {
            *l /= s;
        }
        let v = p.value(&lambda);
        if v < best.0 {
            best = (v, lambda.clone());
        }
    }
    best.1
}

/// Log-barrier path following on `max s` subject to `s ≤ c_i - <F_i, z>` and
/// `‖z_b‖ < R_b`, in variables `(z, s)`. Multipliers `1/(t σ_i)` of the
/// linear constraints are the certificate.
fn interior_point(p: &Problem, opts: &CertificateOptions) -> Option<Vec<f64>> {
    let n = p.balls.dim();
    let m = p.c.len();
    let scale = p
        .fields
        .iter()
        .zip(&p.c)
        .map(|(f, c)| c.abs() + norm(f) * p.balls.enclosing_radius())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        return Some(vec![1.0 / m as f64; m]);
    }
    let c: Vec<f64> = p.c.iter().map(|v| v / scale).collect();
    let f: Vec<Vec<f64>> = p.fields.iter().map(|v| v.iter().map(|x| x / scale).collect()).collect();
    let blocks = p.balls.blocks();

    let slacks = |z: &[f64], s: f64| -> Option<(Vec<f64>, Vec<f64>)> {
        let sig: Vec<f64> = c.iter().zip(&f).map(|(ci, fi)| ci - dot(fi, z) - s).collect();
        let rho: Vec<f64> = blocks.iter().map(|b| b.radius * b.radius - norm(&z[b.range()]).powi(2)).collect();
        (sig.iter().all(|&v| v > 0.0) && rho.iter().all(|&v| v > 0.0)).then_some((sig, rho))
    };
    let barrier = |t: f64, s: f64, sig: &[f64], rho: &[f64]| -> f64 {
        -t * s - sig.iter().map(|v| v.ln()).sum::<f64>() - rho.iter().map(|v| v.ln()).sum::<f64>()
    };

    let mut z = vec![0.0; n];
    let mut s = c.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
    let mut t = (m as f64).max(1.0);
    let mut newton = 0;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let norm_problem = Problem { c: c.clone(), fields: &f, balls: p.balls };

    while newton < opts.max_newton {
        // Centering.
        loop {
            let (sig, rho) = slacks(&z, s)?;
            let dim = n + 1;
            let mut grad = DVector::<f64>::zeros(dim);
            let mut hess = DMatrix::<f64>::zeros(dim, dim);
            grad[n] = -t;
            let mut v = vec![0.0; dim];
            for (fi, si) in f.iter().zip(&sig) {
                let inv = 1.0 / si;
                v[..n].copy_from_slice(fi);
                v[n] = 1.0;
                for a in 0..dim {
                    grad[a] += v[a] * inv;
                    let va = v[a] * inv * inv;
                    if va == 0.0 {
                        continue;
                    }
                    for bcol in 0..=a {
                        hess[(a, bcol)] += va * v[bcol];
                    }
                }
            }
            for (b, r) in blocks.iter().zip(&rho) {
                let zb = &z[b.range()];
                for (ia, a) in b.range().enumerate() {
                    grad[a] += 2.0 * zb[ia] / r;
                    hess[(a, a)] += 2.0 / r;
                    for (ib, bcol) in b.range().enumerate().take(ia + 1) {
                        hess[(a, bcol)] += 4.0 * zb[ia] * zb[ib] / (r * r);
                    }
                }
            }
            for a in 0..dim {
                for bcol in 0..a {
                    hess[(bcol, a)] = hess[(a, bcol)];
                }
            }
            let chol = match hess.clone().cholesky() {
                Some(ch) => ch,
                None => {
                    let tr = hess.trace().abs().max(1.0);
                    (hess + DMatrix::identity(dim, dim) * (1e-13 * tr)).cholesky()?
                }
            };
            let dir = -chol.solve(&grad);
            let decrement = -grad.dot(&dir);
            newton += 1;
            if !decrement.is_finite() {
                return best.map(|b| b.1);
            }
            if decrement <= 1e-10 || newton >= opts.max_newton {
                break;
            }
            let phi0 = barrier(t, s, &sig, &rho);
            let mut alpha = 1.0;
            let mut moved = false;
            while alpha > 1e-12 {
                let zn: Vec<f64> = z.iter().zip(dir.iter()).map(|(a, d)| a + alpha * d).collect();
                let sn = s + alpha * dir[n];
                if let Some((sg, rh)) = slacks(&zn, sn) {
                    if barrier(t, sn, &sg, &rh) <= phi0 - 0.25 * alpha * decrement {
                        z = zn;
                        s = sn;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
        }
        let (sig, _) = slacks(&z, s)?;
        let w: Vec<f64> = sig.iter().map(|v| 1.0 / v).collect();
        let total: f64 = w.iter().sum();
        let lambda: Vec<f64> = w.iter().map(|v| v / total).collect();
        let primal = norm_problem.value(&lambda);
        let gap = primal - norm_problem.dual(&z);
        if best.as_ref().is_none_or(|(v, _)| primal < *v) {
            best = Some((primal, lambda));
        }
        if gap <= opts.tol || t > 1e16 {
            break;
        }
        t *= 20.0;
    }
    best.map(|b| b.1)
}

/// Certificate minimizing the residual over a product of balls, together
/// with that residual.
pub fn optimize_certificate(
    protocol: &ExecutionProtocol,
    balls: &BallProduct,
    warm_start: Option<&AccuracyCertificate>,
    opts: &CertificateOptions,
) -> Result<(AccuracyCertificate, f64)> {
    let t = protocol.len();
    if t == 0 {
        return Err(Error::EmptyProtocol);
    }
    check_dim(balls.dim(), protocol.dim())?;
    let center = balls.center();
    let c: Vec<f64> = protocol
        .points()
        .iter()
        .zip(protocol.field_values())
        .map(|(w, f)| dot(f, w) - dot(f, &center))
        .collect();
    let problem = Problem { c, fields: protocol.field_values(), balls };

    let mut candidates = vec![AccuracyCertificate::uniform(t)?];
    if let Some(w) = warm_start {
        if w.len() <= t {
            candidates.push(w.extended(t));
        }
    }
    if t > 1 {
        let computed = match opts.method {
            CertOptimizer::MirrorDescent => {
                let start = candidates.last().map(|c| c.weights().to_vec()).unwrap_or_default();
                Some(entropic_md(&problem, &start, opts.inner_iters))
            }
            CertOptimizer::InteriorPoint => interior_point(&problem, opts),
        };
        if let Some(l) = computed {
            if let Ok(cert) = AccuracyCertificate::normalized(l) {
                candidates.push(cert);
            }
        }
    }
    let mut best: Option<(AccuracyCertificate, f64)> = None;
    for cand in candidates {
        let r = residual_over_balls(protocol, &cand, balls)?;
        if best.as_ref().is_none_or(|(_, b)| r < *b) {
            best = Some((cand, r));
        }
    }
    Ok(best.expect("at least the uniform candidate"))
}

/// [`optimize_certificate`] over `ball(0, R_U) × ball(0, R_V)` split at
/// `split`.
pub fn optimize_certificate_split(
    protocol: &ExecutionProtocol,
    radii: (f64, f64),
    split: usize,
    warm_start: Option<&AccuracyCertificate>,
    opts: &CertificateOptions,
) -> Result<(AccuracyCertificate, f64)> {
    let d = protocol.dim();
    if split == 0 || split >= d {
        return Err(Error::InvalidDomain(format!("split index {split} must lie in 1..{d}")));
    }
    let balls = BallProduct::origin(&[(split, radii.0), (d - split, radii.1)])?;
    optimize_certificate(protocol, &balls, warm_start, opts)
}
