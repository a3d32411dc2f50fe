//! Execution protocols, accuracy certificates and residuals.
//!
//! A protocol is the list of search points `w_i` a first-order method visited
//! together with the vector field values `F_i = M(w_i)` it observed there. A
//! certificate is a probability vector `λ` over the protocol entries. The pair
//! yields the approximate solution `Σ λ_i w_i` and the residual
//!
//! ```text
//! Res = max_{w ∈ W} Σ λ_i <F_i, w_i - w>
//! ```
//!
//! which upper-bounds the saddle-point gap (for fields induced by a
//! convex-concave function) and the dual VI gap (for monotone fields) of the
//! approximate solution.

use serde::{Deserialize, Serialize};

use crate::domain::{BallProduct, DomainDescriptor};
use crate::error::{check_dim, check_finite, check_len, Error, Result};
use crate::linalg::{dot, norm, pairwise_sum, weighted_sum};

/// Tolerance on `Σ λ_i = 1`.
pub const CERTIFICATE_SUM_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExecutionProtocol {
    dim: usize,
    points: Vec<Vec<f64>>,
    field_values: Vec<Vec<f64>>,
    step_ids: Vec<usize>,
}

impl ExecutionProtocol {
    pub fn new(dim: usize) -> Self {
        ExecutionProtocol { dim, ..Default::default() }
    }

    pub fn from_parts(dim: usize, points: Vec<Vec<f64>>, field_values: Vec<Vec<f64>>) -> Result<Self> {
        check_len(points.len(), field_values.len())?;
        let mut p = Self::new(dim);
        for (i, (w, f)) in points.into_iter().zip(field_values).enumerate() {
            p.push(i, w, f)?;
        }
        Ok(p)
    }

    pub fn push(&mut self, step: usize, point: Vec<f64>, field: Vec<f64>) -> Result<()> {
        check_dim(self.dim, point.len())?;
        check_dim(self.dim, field.len())?;
        check_finite(&point, "protocol point")?;
        check_finite(&field, "protocol field value")?;
        self.points.push(point);
        self.field_values.push(field);
        self.step_ids.push(step);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn field_values(&self) -> &[Vec<f64>] {
        &self.field_values
    }

    pub fn step_ids(&self) -> &[usize] {
        &self.step_ids
    }

    /// `<F_i, w_i>` for every entry.
    pub fn inner_products(&self) -> Vec<f64> {
        self.points.iter().zip(&self.field_values).map(|(w, f)| dot(w, f)).collect()
    }

    /// The first `t` entries as a new protocol.
    pub fn prefix(&self, t: usize) -> ExecutionProtocol {
        let t = t.min(self.len());
        ExecutionProtocol {
            dim: self.dim,
            points: self.points[..t].to_vec(),
            field_values: self.field_values[..t].to_vec(),
            step_ids: self.step_ids[..t].to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCertificate {
    weights: Vec<f64>,
}

impl AccuracyCertificate {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidCertificate("no weights".into()));
        }
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidCertificate("weights must be finite and nonnegative".into()));
        }
        let s = pairwise_sum(&weights);
        if (s - 1.0).abs() > CERTIFICATE_SUM_TOL {
            return Err(Error::InvalidCertificate(format!("weights sum to {s}, not 1")));
        }
        Ok(AccuracyCertificate { weights })
    }

    /// Rescales nonnegative weights to sum to one.
    pub fn normalized(mut weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidCertificate("weights must be finite and nonnegative".into()));
        }
        let s = pairwise_sum(&weights);
        if !(s > 0.0) {
            return Err(Error::InvalidCertificate("weights sum to zero".into()));
        }
        for w in &mut weights {
            *w /= s;
        }
        Ok(AccuracyCertificate { weights })
    }

    pub fn uniform(t: usize) -> Result<Self> {
        if t == 0 {
            return Err(Error::EmptyProtocol);
        }
        Ok(AccuracyCertificate { weights: vec![1.0 / t as f64; t] })
    }

    /// Point mass on entry `i` of a `t`-entry protocol.
    pub fn vertex(t: usize, i: usize) -> Result<Self> {
        if i >= t {
            return Err(Error::LengthMismatch { expected: t, got: i + 1 });
        }
        let mut w = vec![0.0; t];
        w[i] = 1.0;
        Ok(AccuracyCertificate { weights: w })
    }

    /// Pads with zero weights up to length `t` (a certificate for a longer
    /// protocol with the same residual).
    pub fn extended(&self, t: usize) -> AccuracyCertificate {
        let mut w = self.weights.clone();
        w.resize(t.max(w.len()), 0.0);
        AccuracyCertificate { weights: w }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport {
    pub residual: f64,
    /// Minimizer over `W` of the aggregated field; it realizes the max in the
    /// residual's definition.
    pub witness: Vec<f64>,
    /// `min_{w ∈ W} <Σ λ_i F_i, w>`.
    pub lmo_value: f64,
}

fn check_pair(protocol: &ExecutionProtocol, cert: &AccuracyCertificate) -> Result<()> {
    check_len(protocol.len(), cert.len())
}

/// `Σ λ_i <F_i, w_i>`, summed pairwise.
pub fn weighted_inner(protocol: &ExecutionProtocol, cert: &AccuracyCertificate) -> f64 {
    let terms: Vec<f64> = protocol
        .points
        .iter()
        .zip(&protocol.field_values)
        .zip(&cert.weights)
        .map(|((w, f), l)| l * dot(w, f))
        .collect();
    pairwise_sum(&terms)
}

/// `Σ λ_i F_i`.
pub fn aggregated_field(protocol: &ExecutionProtocol, cert: &AccuracyCertificate) -> Vec<f64> {
    weighted_sum(&protocol.field_values, &cert.weights, protocol.dim)
}

/// Residual of a certified protocol over an LMO-represented domain, using a
/// single LMO call on the aggregated field.
pub fn residual(
    protocol: &ExecutionProtocol,
    cert: &AccuracyCertificate,
    domain: &DomainDescriptor,
) -> Result<ResidualReport> {
    check_pair(protocol, cert)?;
    check_dim(domain.dim(), protocol.dim())?;
    let agg = aggregated_field(protocol, cert);
    let (witness, lmo_value) = domain.lmo_argmin(&agg)?;
    let residual = weighted_inner(protocol, cert) - lmo_value;
    Ok(ResidualReport { residual, witness, lmo_value })
}

/// `Σ λ_i w_i`.
pub fn weighted_point(protocol: &ExecutionProtocol, cert: &AccuracyCertificate) -> Result<Vec<f64>> {
    check_pair(protocol, cert)?;
    Ok(weighted_sum(&protocol.points, &cert.weights, protocol.dim))
}

/// Closed-form residual over a product of balls: for each block `b` the LMO
/// value is `<ḡ_b, c_b> - R_b ‖ḡ_b‖` with `ḡ_b` the aggregated field block.
pub fn residual_over_balls(
    protocol: &ExecutionProtocol,
    cert: &AccuracyCertificate,
    balls: &BallProduct,
) -> Result<f64> {
    check_pair(protocol, cert)?;
    check_dim(balls.dim(), protocol.dim())?;
    let agg = aggregated_field(protocol, cert);
    Ok(weighted_inner(protocol, cert) - ball_lmo_value(&agg, balls))
}

pub(crate) fn ball_lmo_value(agg: &[f64], balls: &BallProduct) -> f64 {
    balls
        .blocks()
        .iter()
        .map(|b| {
            let g = &agg[b.range()];
            dot(g, &b.center) - b.radius * norm(g)
        })
        .sum()
}

/// Residual over `ball(0, R_U) × ball(0, R_V)` where each field value splits
/// as `[G_i; H_i]` at index `split`:
/// `Σ λ_i <F_i, z_i> + R_U ‖Σ λ_i G_i‖ + R_V ‖Σ λ_i H_i‖`.
pub fn residual_ball_product(
    protocol: &ExecutionProtocol,
    cert: &AccuracyCertificate,
    radii: (f64, f64),
    split: usize,
) -> Result<f64> {
    let d = protocol.dim();
    if split == 0 || split >= d {
        return Err(Error::InvalidDomain(format!("split index {split} must lie in 1..{d}")));
    }
    let balls = BallProduct::origin(&[(split, radii.0), (d - split, radii.1)])?;
    residual_over_balls(protocol, cert, &balls)
}

/// One record of a certified protocol, as written to report files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolRecord {
    pub step: usize,
    pub point: Vec<f64>,
    pub field: Vec<f64>,
    pub weight: f64,
}

pub fn protocol_records(protocol: &ExecutionProtocol, cert: &AccuracyCertificate) -> Result<Vec<ProtocolRecord>> {
    check_pair(protocol, cert)?;
    Ok((0..protocol.len())
        .map(|i| ProtocolRecord {
            step: protocol.step_ids[i],
            point: protocol.points[i].clone(),
            field: protocol.field_values[i].clone(),
            weight: cert.weights[i],
        })
        .collect())
}

/// Rebuilds a protocol and certificate from records.
pub fn from_records(records: &[ProtocolRecord]) -> Result<(ExecutionProtocol, AccuracyCertificate)> {
    let first = records.first().ok_or(Error::EmptyProtocol)?;
    let mut p = ExecutionProtocol::new(first.point.len());
    for r in records {
        p.push(r.step, r.point.clone(), r.field.clone())?;
    }
    let cert = AccuracyCertificate::new(records.iter().map(|r| r.weight).collect())?;
    Ok((p, cert))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn proto(points: &[&[f64]], fields: &[&[f64]]) -> ExecutionProtocol {
        ExecutionProtocol::from_parts(
            points[0].len(),
            points.iter().map(|p| p.to_vec()).collect(),
            fields.iter().map(|f| f.to_vec()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn residual_on_simplex_single_point() {
        let p = proto(&[&[1.0, 0.0]], &[&[1.0, 0.0]]);
        let r = residual(&p, &AccuracyCertificate::uniform(1).unwrap(), &DomainDescriptor::simplex(2)).unwrap();
        assert_eq!(r.residual, 1.0);
        assert_eq!(r.witness, vec![0.0, 1.0]);
    }

    #[test]
    fn residual_of_zero_field_is_zero() {
        let p = proto(&[&[0.3, 0.7], &[1.0, 0.0]], &[&[0.0, 0.0], &[0.0, 0.0]]);
        let r = residual(&p, &AccuracyCertificate::uniform(2).unwrap(), &DomainDescriptor::simplex(2)).unwrap();
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn residual_on_ball() {
        let p = proto(&[&[0.0, 0.0]], &[&[0.0, 1.0]]);
        let r = residual(&p, &AccuracyCertificate::uniform(1).unwrap(), &DomainDescriptor::origin_ball(2, 1.0)).unwrap();
        assert!((r.residual - 1.0).abs() < 1e-15);
        assert_eq!(r.witness, vec![0.0, -1.0]);
    }

    #[test]
    fn weighted_point_examples() {
        let p = proto(&[&[1.0, 0.0], &[0.0, 1.0]], &[&[0.0, 0.0], &[0.0, 0.0]]);
        let half = AccuracyCertificate::uniform(2).unwrap();
        assert_eq!(weighted_point(&p, &half).unwrap(), vec![0.5, 0.5]);

        let single = proto(&[&[2.5, -1.0]], &[&[0.0, 0.0]]);
        assert_eq!(weighted_point(&single, &AccuracyCertificate::uniform(1).unwrap()).unwrap(), vec![2.5, -1.0]);

        let e = proto(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]], &[&[0.0; 3], &[0.0; 3], &[0.0; 3]]);
        let c = AccuracyCertificate::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(weighted_point(&e, &c).unwrap(), vec![0.2, 0.3, 0.5]);
    }

    #[test]
    fn ball_product_closed_form_examples() {
        let p = proto(&[&[0.0, 0.0], &[0.0, 0.0]], &[&[1.0, 0.0], &[-1.0, 0.0]]);
        let half = AccuracyCertificate::uniform(2).unwrap();
        assert_eq!(residual_ball_product(&p, &half, (1.0, 1.0), 1).unwrap(), 0.0);

        let p = proto(&[&[0.0, 0.0], &[0.0, 0.0]], &[&[1.0, 0.0], &[1.0, 0.0]]);
        for w in [0.1, 0.5, 0.9] {
            let c = AccuracyCertificate::new(vec![w, 1.0 - w]).unwrap();
            assert!((residual_ball_product(&p, &c, (1.0, 1.0), 1).unwrap() - 1.0).abs() < 1e-15);
        }

        let p = proto(&[&[0.0; 4]], &[&[3.0, 4.0, 0.0, 0.0]]);
        let one = AccuracyCertificate::uniform(1).unwrap();
        assert_eq!(residual_ball_product(&p, &one, (2.0, 1.0), 2).unwrap(), 10.0);
    }

    #[test]
    fn errors_are_reported() {
        let p = proto(&[&[1.0, 0.0]], &[&[1.0, 0.0]]);
        let two = AccuracyCertificate::uniform(2).unwrap();
        assert!(matches!(residual(&p, &two, &DomainDescriptor::simplex(2)), Err(Error::LengthMismatch { .. })));
        let one = AccuracyCertificate::uniform(1).unwrap();
        assert!(matches!(residual(&p, &one, &DomainDescriptor::simplex(3)), Err(Error::DimensionMismatch { .. })));
        assert!(residual_ball_product(&p, &one, (1.0, 1.0), 2).is_err());
        assert!(weighted_point(&p, &two).is_err());
        assert!(AccuracyCertificate::new(vec![0.5, 0.6]).is_err());
        assert!(AccuracyCertificate::new(vec![-0.5, 1.5]).is_err());
    }

    #[test]
    fn records_round_trip() {
        let p = proto(&[&[1.0, 0.0], &[0.0, 1.0]], &[&[0.5, 0.0], &[0.0, -2.0]]);
        let c = AccuracyCertificate::new(vec![0.25, 0.75]).unwrap();
        let json = serde_json::to_string(&protocol_records(&p, &c).unwrap()).unwrap();
        assert!(json.starts_with("[{\"step\":0,\"point\":[1.0,0.0],\"field\":[0.5,0.0],\"weight\":0.25}"));
        let back: Vec<ProtocolRecord> = serde_json::from_str(&json).unwrap();
        let (p2, c2) = from_records(&back).unwrap();
        assert_eq!(p2, p);
        assert_eq!(c2, c);
    }
}
