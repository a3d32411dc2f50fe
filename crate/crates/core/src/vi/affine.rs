//! Affine monotone VIs `F(η) = Sη + s` on an LMO-represented set `H`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BestRound, ViObserver, ViOutcome, ViRound};
use crate::domain::{BallProduct, DomainDescriptor};
use crate::error::{check_dim, check_finite, Error, Result};
use crate::linalg::{dot, norm, sub, weighted_sum};
use crate::oracles::DenseMatrix;
use crate::solvers::{self, RoundView, SolverConfig, SolverKind, VectorField};

/// A square linear map given by its action and the action of its transpose.
pub trait LinearOperator: Send + Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    fn apply_t(&self, y: &[f64]) -> Vec<f64>;
}

impl LinearOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.mul_vec(x)
    }
    fn apply_t(&self, y: &[f64]) -> Vec<f64> {
        self.tr_mul_vec(y)
    }
}

const SAMPLES: usize = 64;
const SAMPLE_SEED: u64 = 0x5eed;

/// `F(η) = Sη + s` on `H`, with the primal ball `Ξ = ball(0, ξ_radius) ⊇ H`.
#[derive(Clone)]
pub struct AffineViSpec {
    op: Arc<dyn LinearOperator>,
    s: Vec<f64>,
    h: DomainDescriptor,
    xi_radius: f64,
    skew: bool,
}

impl fmt::Debug for AffineViSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AffineViSpec")
            .field("dim", &self.s.len())
            .field("h", &self.h)
            .field("xi_radius", &self.xi_radius)
            .field("skew", &self.skew)
            .finish()
    }
}

impl AffineViSpec {
    /// Validates the data. `xi_radius` defaults to the enclosing radius of `H`
    /// and must not be smaller. Monotonicity and skewness of `S` are checked
    /// on seeded random samples.
    pub fn new(
        op: Arc<dyn LinearOperator>,
        s: Vec<f64>,
        h: DomainDescriptor,
        xi_radius: Option<f64>,
    ) -> Result<Self> {
        h.validate()?;
        let n = op.dim();
        check_dim(n, s.len())?;
        check_dim(n, h.dim())?;
        check_finite(&s, "s")?;
        if n == 0 {
            return Err(Error::InvalidSpec("empty VI".into()));
        }
        let enclosing = h.enclosing_radius();
        let xi_radius = match xi_radius {
            None => enclosing.max(f64::MIN_POSITIVE),
            Some(r) if r.is_finite() && r > 0.0 && r >= enclosing * (1.0 - 1e-12) => r,
            Some(r) => {
                return Err(Error::InvalidSpec(format!("Xi radius {r} does not cover H (needs {enclosing})")))
            }
        };
        let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED);
        let mut skew = true;
        for _ in 0..SAMPLES {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let sx = op.apply(&x);
            check_dim(n, sx.len())?;
            check_finite(&sx, "S x")?;
            let st = op.apply_t(&x);
            check_dim(n, st.len())?;
            let q = dot(&sx, &x);
            let xx = dot(&x, &x);
            if q < -1e-9 * xx.max(norm(&sx) * norm(&x)) {
                return Err(Error::InvalidSpec(format!("operator is not monotone: <Sx, x> = {q}")));
            }
            if q.abs() > 1e-9 * (norm(&sx) * norm(&x)).max(f64::MIN_POSITIVE) {
                skew = false;
            }
        }
        Ok(AffineViSpec { op, s, h, xi_radius, skew })
    }

    pub fn dense(s_matrix: DenseMatrix, s: Vec<f64>, h: DomainDescriptor, xi_radius: Option<f64>) -> Result<Self> {
        if s_matrix.nrows() != s_matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: s_matrix.nrows(), got: s_matrix.ncols() });
        }
        Self::new(Arc::new(s_matrix), s, h, xi_radius)
    }

    pub fn dim(&self) -> usize {
        self.s.len()
    }

    pub fn operator(&self) -> &dyn LinearOperator {
        self.op.as_ref()
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn h(&self) -> &DomainDescriptor {
        &self.h
    }

    pub fn xi_radius(&self) -> f64 {
        self.xi_radius
    }

    /// Whether `S + Sᵀ = 0` (up to sampling tolerance).
    pub fn is_skew(&self) -> bool {
        self.skew
    }

    /// `F(η) = Sη + s`.
    pub fn field(&self, eta: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), eta.len())?;
        let mut f = self.op.apply(eta);
        for (a, b) in f.iter_mut().zip(&self.s) {
            *a += b;
        }
        Ok(f)
    }

    pub fn domain(&self) -> Result<BallProduct> {
        BallProduct::origin(&[(self.dim(), self.xi_radius)])
    }

    /// Exact dual gap `sup_{η'∈H} <F(η'), η - η'>`.
    ///
    /// For skew `S` the quadratic term vanishes and the supremum equals
    /// `<s, η> - min_{η'∈H} <Sη + s, η'>`. Otherwise the supremum is a
    /// concave maximization not supported here.
    pub fn eps_vi(&self, eta: &[f64]) -> Result<f64> {
        if !self.skew {
            return Err(Error::Unavailable("exact dual gap needs a skew-symmetric operator"));
        }
        let g = self.field(eta)?;
        let (_, min) = self.h.lmo_argmin(&g)?;
        Ok(dot(&self.s, eta) - min)
    }
}

/// Primal field `Ψ(ξ) = Sᵀ[ξ - η̄(ξ)]`, `η̄(ξ) ∈ Argmin_H <Sξ + s, ·>`.
/// The payload is `η̄(ξ)`.
pub struct AffineField<'a> {
    spec: &'a AffineViSpec,
}

impl<'a> AffineField<'a> {
    pub fn new(spec: &'a AffineViSpec) -> Self {
        AffineField { spec }
    }
}

impl VectorField for AffineField<'_> {
    type Payload = Vec<f64>;

    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn eval(&self, xi: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_finite(xi, "xi")?;
        let g = self.spec.field(xi)?;
        check_finite(&g, "S xi + s")?;
        let (eta, _) = self.spec.h.lmo_argmin(&g)?;
        let psi = self.spec.op.apply_t(&sub(xi, &eta));
        check_finite(&psi, "primal field")?;
        Ok((psi, eta))
    }
}

pub fn solve_affine_vi(spec: &AffineViSpec, kind: SolverKind, config: &SolverConfig) -> Result<ViOutcome<Vec<f64>>> {
    solve_affine_vi_with(spec, kind, config, &mut |_| Ok(()))
}

/// Runs the solver on `Ψ` and recovers `η^t = Σ λ_i η̄(ξ_i)`.
pub fn solve_affine_vi_with(
    spec: &AffineViSpec,
    kind: SolverKind,
    config: &SolverConfig,
    observer: &mut ViObserver<'_, Vec<f64>, Vec<f64>>,
) -> Result<ViOutcome<Vec<f64>>> {
    let field = AffineField::new(spec);
    let domain = spec.domain()?;
    let mut best = BestRound::new();
    let mut callback = |view: &RoundView<Vec<f64>>| -> Result<Option<f64>> {
        let eta = weighted_sum(view.payloads, view.certificate.weights(), spec.dim());
        let exact = if spec.is_skew() { Some(spec.eps_vi(&eta)?) } else { None };
        observer(&ViRound { view, eta: &eta, eps_exact: exact })?;
        best.offer(eta, view.residual, exact);
        Ok(exact)
    };
    let out = solvers::run(kind, &field, &domain, config, &mut callback)?;
    let (eta, eps_bound, eps_exact) = best.take().ok_or_else(|| Error::Solver("no certificate round completed".into()))?;
    Ok(ViOutcome {
        eta,
        eps_bound,
        eps_exact,
        status: out.status,
        steps: out.steps,
        history: out.history,
        protocol: Some(out.protocol),
        certificate: Some(out.certificate),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rot() -> DenseMatrix {
        DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap()
    }

    #[test]
    fn skew_example_field_value() {
        let spec = AffineViSpec::dense(rot(), vec![0.0, 0.0], DomainDescriptor::simplex(2), None).unwrap();
        assert!(spec.is_skew());
        let (psi, eta) = AffineField::new(&spec).eval(&[1.0, 0.0]).unwrap();
        assert_eq!(eta, vec![0.0, 1.0]);
        assert_eq!(psi, vec![1.0, 1.0]);
    }

    #[test]
    fn unique_minimizer_is_the_vertex() {
        let m = DenseMatrix::from_rows(&[vec![2.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 3.0]]).unwrap();
        let spec = AffineViSpec::dense(m, vec![0.0, -5.0, 0.0], DomainDescriptor::simplex(3), None).unwrap();
        assert!(!spec.is_skew());
        let (_, eta) = AffineField::new(&spec).eval(&[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(eta, vec![0.0, 1.0, 0.0]);
        assert!(matches!(spec.eps_vi(&eta), Err(Error::Unavailable(_))));
    }

    #[test]
    fn constant_field_is_solved_by_linear_minimization() {
        let c = vec![0.3, -0.2, 0.5];
        let spec = AffineViSpec::dense(DenseMatrix::zeros(3, 3), c.clone(), DomainDescriptor::simplex(3), None).unwrap();
        let (psi, _) = AffineField::new(&spec).eval(&[0.4, -0.1, 0.2]).unwrap();
        assert!(psi.iter().all(|&v| v == 0.0));
        for kind in [SolverKind::Ellipsoid, SolverKind::MirrorDescent] {
            let cfg = SolverConfig { max_steps: 50, cert_period: Some(1), ..Default::default() };
            let out = solve_affine_vi(&spec, kind, &cfg).unwrap();
            assert_eq!(out.eta, DomainDescriptor::simplex(3).lmo_argmin(&c).unwrap().0);
            assert_eq!(out.eps_exact, Some(0.0));
            assert_eq!(out.history.len(), 1);
        }
    }

    #[test]
    fn rejects_non_monotone_and_small_radius() {
        let neg = DenseMatrix::from_rows(&[vec![-1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        assert!(AffineViSpec::dense(neg, vec![0.0; 2], DomainDescriptor::simplex(2), None).is_err());
        assert!(AffineViSpec::dense(rot(), vec![0.0; 2], DomainDescriptor::simplex(2), Some(0.5)).is_err());
        assert!(AffineViSpec::dense(rot(), vec![0.0; 3], DomainDescriptor::simplex(2), None).is_err());
    }

    #[test]
    fn skew_rotation_on_simplex_converges() {
        let spec = AffineViSpec::dense(rot(), vec![0.0, 0.0], DomainDescriptor::simplex(2), None).unwrap();
        let cfg = SolverConfig { max_steps: 400, gap_threshold: 1e-6, cert_period: Some(8), ..Default::default() };
        let mut checked = 0;
        let out = solve_affine_vi_with(&spec, SolverKind::Ellipsoid, &cfg, &mut |r| {
            let e = r.eps_exact.unwrap();
            assert!(e >= -1e-10 && e <= r.view.residual + 1e-9);
            checked += 1;
            Ok(())
        })
        .unwrap();
        assert!(checked > 0);
        assert!(out.eps_exact.unwrap() <= 1e-6, "{out:?}");
        // ε((a, 1-a)) = a, so the unique solution is the second vertex.
        assert!(out.eta[0] <= 1e-6 && (out.eta[1] - 1.0).abs() <= 1e-6);
    }
}
