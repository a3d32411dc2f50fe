//! Bilinear saddle-point problems solved through a small master problem.
//!
//! The problem of interest is
//!
//! ```text
//! min_{w ∈ Δ_N} max_{z ∈ Δ_M}  ψ(w, z) = <w, p> + <z, q> + <A z, D w>
//! ```
//!
//! with `A` (`K × M`) and `D` (`K × N`) simple matrices. It is the dual of the
//! master problem
//!
//! ```text
//! Φ(u, w; v, z) = <w, p + Dᵀv> + <z, q + Aᵀu> - <v, R u>
//! ```
//!
//! whose primal `φ(u, v) = min_w <w, p + Dᵀv> + max_z <z, q + Aᵀu> - <v, R u>`
//! lives on two small balls and is solved by a certificate-producing method.
//! Every field evaluation yields one pure strategy per side; the certificate
//! weights of those strategies form sparse near-optimal mixed strategies.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::certificates::{residual, AccuracyCertificate, ExecutionProtocol};
use crate::domain::{BallProduct, DomainDescriptor};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, norm, sub, weighted_sum};
use crate::oracles::{ColumnHit, DenseMatrix, Direction, OffsetOracle, SimpleMatrix, SimpleMatrixOracle, MAX_MATERIALIZED};
use crate::par;
use crate::solvers::{self, RoundView, SolverConfig, SolverKind, Status, VectorField};

/// Linear term of `ψ` in one of the variables.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Offset {
    #[default]
    Zero,
    Explicit(Vec<f64>),
}

impl Offset {
    pub fn into_option(self) -> Option<Vec<f64>> {
        match self {
            Offset::Zero => None,
            Offset::Explicit(v) => Some(v),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Offset::Zero => true,
            Offset::Explicit(v) => v.iter().all(|&x| x == 0.0),
        }
    }
}

/// `ψ(w, z) = <w, p> + <z, q> + <A z, D w>` over `Δ_N × Δ_M`, where the
/// columns of `D` index `w` and the columns of `A` index `z`.
#[derive(Clone, Debug, PartialEq)]
pub struct BilinearSpSpec {
    a: OffsetOracle,
    d: OffsetOracle,
}

impl BilinearSpSpec {
    pub fn new(a: SimpleMatrixOracle, d: SimpleMatrixOracle, p: Offset, q: Offset) -> Result<Self> {
        check_dim(a.rows(), d.rows())?;
        if a.rows() == 0 {
            return Err(Error::InvalidSpec("factor matrices have no rows".into()));
        }
        Ok(BilinearSpSpec { a: OffsetOracle::new(a, q.into_option())?, d: OffsetOracle::new(d, p.into_option())? })
    }

    /// Matrix game `min_w max_z <z, S w>` with a dense payoff `S` (`M × N`),
    /// factored with the smaller inner dimension: `S = (Sᵀ)ᵀ I_N` or
    /// `S = I_Mᵀ S`.
    pub fn dense_game(s: &DenseMatrix) -> Result<Self> {
        let (m, n) = (s.nrows(), s.ncols());
        if n <= m {
            Self::new(s.transpose().into(), DenseMatrix::identity(n).into(), Offset::Zero, Offset::Zero)
        } else {
            Self::new(DenseMatrix::identity(m).into(), s.clone().into(), Offset::Zero, Offset::Zero)
        }
    }

    pub fn a(&self) -> &SimpleMatrixOracle {
        self.a.oracle()
    }

    pub fn d(&self) -> &SimpleMatrixOracle {
        self.d.oracle()
    }

    pub fn p(&self) -> Offset {
        self.d.offset().map_or(Offset::Zero, |v| Offset::Explicit(v.to_vec()))
    }

    pub fn q(&self) -> Offset {
        self.a.offset().map_or(Offset::Zero, |v| Offset::Explicit(v.to_vec()))
    }

    /// Inner dimension `K`.
    pub fn rows(&self) -> usize {
        self.a.oracle().rows()
    }

    /// Domain descriptors of `W` and `Z` when the column counts fit in
    /// memory.
    pub fn domains(&self) -> Option<(DomainDescriptor, DomainDescriptor)> {
        let n = self.d.oracle().small_count(usize::MAX)?;
        let m = self.a.oracle().small_count(usize::MAX)?;
        Some((DomainDescriptor::simplex(n), DomainDescriptor::simplex(m)))
    }

    /// `ψ` at pure strategies.
    pub fn psi_pure(&self, w: &[usize], z: &[usize]) -> Result<f64> {
        let dw = self.d.oracle().column(w)?;
        let az = self.a.oracle().column(z)?;
        Ok(self.d.offset_at(w)? + self.a.offset_at(z)? + dot(&az, &dw))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    /// `D = Aᵀ = R = S` with `u`, `v` copies of `w`, `z`.
    Example1,
    /// `S = AᵀD`, `R = I_K`, `u`, `v` images `Dw`, `Az`.
    Example2,
}

/// How the two ball radii relate in the factored construction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusPolicy {
    /// Common radius for implicit matrices, separate exact ones for dense.
    #[default]
    Auto,
    Separate,
    Common,
}

/// The master problem: operators of `Φ` and the balls `U`, `V`.
#[derive(Clone, Debug)]
pub struct MasterProblem {
    spec: BilinearSpSpec,
    construction: Construction,
    /// Column oracles of the master's `A` (`n × M`) and `D` (`m × N`).
    master_a: SimpleMatrixOracle,
    master_d: SimpleMatrixOracle,
    /// `None` means the identity.
    r: Option<DenseMatrix>,
    r_u: f64,
    r_v: f64,
}

fn radius_from_bound(b: f64) -> f64 {
    if b > 0.0 && b.is_finite() {
        b
    } else {
        1.0
    }
}

/// Master with `D = Aᵀ = R = S` for `ψ(w, z) = <w, p> + <z, q> + <z, S w>`.
/// The balls have radii `max(1, largest column norm)` of `S` and `Sᵀ`, so they
/// contain the simplices as well as their images.
pub fn build_master_example1(s: &DenseMatrix, p: Offset, q: Offset) -> Result<MasterProblem> {
    let (m, n) = (s.nrows(), s.ncols());
    if let Offset::Explicit(v) = &p {
        check_dim(n, v.len())?;
    }
    if let Offset::Explicit(v) = &q {
        check_dim(m, v.len())?;
    }
    let spec = BilinearSpSpec::new(DenseMatrix::identity(m).into(), s.clone().into(), p, q)?;
    let st = s.transpose();
    let r_u = s.max_column_norm().max(1.0);
    let r_v = st.max_column_norm().max(1.0);
    Ok(MasterProblem {
        spec,
        construction: Construction::Example1,
        master_a: st.into(),
        master_d: s.clone().into(),
        r: Some(s.clone()),
        r_u,
        r_v,
    })
}

/// Master with `R = I_K` for a factored spec `S = AᵀD`.
pub fn build_master_example2(spec: BilinearSpSpec) -> Result<MasterProblem> {
    build_master_example2_with(spec, RadiusPolicy::Auto)
}

pub fn build_master_example2_with(spec: BilinearSpSpec, policy: RadiusPolicy) -> Result<MasterProblem> {
    check_dim(spec.a.oracle().rows(), spec.d.oracle().rows())?;
    let bu = radius_from_bound(spec.d.oracle().column_norm_bound());
    let bv = radius_from_bound(spec.a.oracle().column_norm_bound());
    let dense = spec.a.oracle().as_dense().is_some() && spec.d.oracle().as_dense().is_some();
    let common = match policy {
        RadiusPolicy::Auto => !dense,
        RadiusPolicy::Separate => false,
        RadiusPolicy::Common => true,
    };
    let (r_u, r_v) = if common { (bu.max(bv), bu.max(bv)) } else { (bu, bv) };
    Ok(MasterProblem {
        master_a: spec.a.oracle().clone(),
        master_d: spec.d.oracle().clone(),
        spec,
        construction: Construction::Example2,
        r: None,
        r_u,
        r_v,
    })
}

/// First-order information of the primal `φ` at `(u, v)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimalEval {
    pub phi: f64,
    pub g_u: Vec<f64>,
    pub g_v: Vec<f64>,
    /// Best response `w` (a column of the spec's `D`).
    pub w_hit: ColumnHit,
    /// Best response `z` (a column of the spec's `A`).
    pub z_hit: ColumnHit,
}

/// Data kept for each productive step: the two pure strategies and their
/// columns in the spec's factor matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct SpStep {
    pub w_index: Vec<usize>,
    pub z_index: Vec<usize>,
    /// Column of `D` at `w_index`.
    pub d_column: Vec<f64>,
    /// Column of `A` at `z_index`.
    pub a_column: Vec<f64>,
}

impl MasterProblem {
    pub fn spec(&self) -> &BilinearSpSpec {
        &self.spec
    }

    pub fn construction(&self) -> Construction {
        self.construction
    }

    pub fn radii(&self) -> (f64, f64) {
        (self.r_u, self.r_v)
    }

    /// Dimensions `(n, m)` of `u` and `v`.
    pub fn dims(&self) -> (usize, usize) {
        (self.master_a.rows(), self.master_d.rows())
    }

    pub fn dim(&self) -> usize {
        let (n, m) = self.dims();
        n + m
    }

    /// `U × V` as a product of origin-centered balls.
    pub fn domain(&self) -> BallProduct {
        let (n, m) = self.dims();
        BallProduct::origin(&[(n, self.r_u), (m, self.r_v)]).expect("positive radii")
    }

    fn r_mul(&self, u: &[f64]) -> Vec<f64> {
        match &self.r {
            Some(r) => r.mul_vec(u),
            None => u.to_vec(),
        }
    }

    fn r_tr_mul(&self, v: &[f64]) -> Vec<f64> {
        match &self.r {
            Some(r) => r.tr_mul_vec(v),
            None => v.to_vec(),
        }
    }

    /// `φ(u, v)` with its sub- and supergradient and the best responses.
    pub fn primal_value_grad(&self, u: &[f64], v: &[f64]) -> Result<PrimalEval> {
        let (n, m) = self.dims();
        check_dim(n, u.len())?;
        check_dim(m, v.len())?;
        let (a_side, d_side) = (&self.spec.a, &self.spec.d);
        let (zr, wr) = par::join(
            || match self.construction {
                Construction::Example2 => a_side.extreme(u, Direction::Max),
                // Max over rows of `q + S u`: columns of `Sᵀ`, offsets `q`.
                Construction::Example1 => {
                    let scores = self.master_a.col_extreme(u, Direction::Max);
                    match a_side.offset() {
                        None => scores.map(|h| (h, 0.0)),
                        Some(q) => explicit_extreme(&self.master_a, q, u, Direction::Max),
                    }
                }
            },
            || d_side.extreme(v, Direction::Min),
        );
        let (z_master, q_off) = zr?;
        let (w_hit, p_off) = wr?;
        let ru = self.r_mul(u);
        let rtv = self.r_tr_mul(v);
        let (z_hit, a_col_master) = match self.construction {
            Construction::Example2 => (z_master.clone(), z_master.column.clone()),
            Construction::Example1 => {
                let column = self.spec.a.oracle().column(&z_master.index)?;
                let hit = ColumnHit { index: z_master.index.clone(), column, value: z_master.value };
                (hit, z_master.column.clone())
            }
        };
        let d_col_master = &w_hit.column;
        let phi = (q_off + dot(&a_col_master, u)) + (p_off + dot(d_col_master, v)) - dot(v, &ru);
        let g_u = sub(&a_col_master, &rtv);
        let g_v = sub(d_col_master, &ru);
        Ok(PrimalEval { phi, g_u, g_v, w_hit, z_hit })
    }

    /// Dense copies of the master operators `(A, D, R)`; `R = None` is the
    /// identity.
    pub fn dense_operators(&self, limit: usize) -> Result<(DenseMatrix, DenseMatrix, Option<DenseMatrix>)> {
        let to_dense = |o: &SimpleMatrixOracle| -> Result<DenseMatrix> {
            let cols = o.columns(limit)?;
            let k = o.rows();
            let mut data = vec![0.0; k * cols.len()];
            for (j, (_, c)) in cols.iter().enumerate() {
                for i in 0..k {
                    data[i * cols.len() + j] = c[i];
                }
            }
            DenseMatrix::new(k, cols.len(), data)
        };
        Ok((to_dense(&self.master_a)?, to_dense(&self.master_d)?, self.r.clone()))
    }
}

fn explicit_extreme(
    oracle: &SimpleMatrixOracle,
    offset: &[f64],
    x: &[f64],
    dir: Direction,
) -> Result<(ColumnHit, f64)> {
    let cols = oracle.columns(MAX_MATERIALIZED)?;
    check_dim(cols.len(), offset.len())?;
    let mut best: Option<(usize, f64)> = None;
    for (j, (_, c)) in cols.iter().enumerate() {
        let v = offset[j] + dot(x, c);
        if best.is_none_or(|(_, b)| dir.improves(v, b)) {
            best = Some((j, v));
        }
    }
    let (j, _) = best.expect("nonempty matrix");
    let (index, column) = cols[j].clone();
    let value = dot(x, &column);
    Ok((ColumnHit { index, column, value }, offset[j]))
}

/// The monotone field `F(u, v) = [φ'_u; -φ'_v]` of the primal problem.
pub struct PrimalField<'a> {
    master: &'a MasterProblem,
}

impl<'a> PrimalField<'a> {
    pub fn new(master: &'a MasterProblem) -> Self {
        PrimalField { master }
    }
}

impl VectorField for PrimalField<'_> {
    type Payload = SpStep;

    fn dim(&self) -> usize {
        self.master.dim()
    }

    fn eval(&self, x: &[f64]) -> Result<(Vec<f64>, SpStep)> {
        let (n, _) = self.master.dims();
        let ev = self.master.primal_value_grad(&x[..n], &x[n..])?;
        let mut f = ev.g_u;
        f.extend(ev.g_v.iter().map(|g| -g));
        let step = SpStep {
            w_index: ev.w_hit.index,
            z_index: ev.z_hit.index,
            d_column: ev.w_hit.column,
            a_column: ev.z_hit.column,
        };
        Ok((f, step))
    }
}

/// A weighted pure strategy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub index: Vec<usize>,
    pub weight: f64,
    /// The strategy's column in the corresponding factor matrix.
    #[serde(skip)]
    pub column: Option<Vec<f64>>,
}

/// Sparse mixed strategies recovered from a certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseAtomSolution {
    pub w_atoms: Vec<Atom>,
    pub z_atoms: Vec<Atom>,
    /// Certified residual bounding the saddle-point gap.
    pub gap_bound: f64,
    pub gap_exact: Option<f64>,
    pub value_estimate: f64,
    /// Best proven bounds on the game value so far.
    pub lower: f64,
    pub upper: f64,
}

pub(crate) fn merge_atoms(items: impl Iterator<Item = (Vec<usize>, f64, Vec<f64>)>) -> Vec<Atom> {
    let mut map: BTreeMap<Vec<usize>, (f64, Vec<f64>)> = BTreeMap::new();
    for (index, weight, column) in items {
        if weight > 0.0 {
            map.entry(index).or_insert_with(|| (0.0, column)).0 += weight;
        }
    }
    map.into_iter().map(|(index, (weight, column))| Atom { index, weight, column: Some(column) }).collect()
}

/// Atoms `w^t = Σ λ_i δ_{w_i}` and `z^t = Σ λ_i δ_{z_i}`.
pub fn recover_atoms(cert: &AccuracyCertificate, steps: &[SpStep]) -> Result<(Vec<Atom>, Vec<Atom>)> {
    crate::error::check_len(steps.len(), cert.len())?;
    let l = cert.weights();
    let w = merge_atoms(steps.iter().zip(l).map(|(s, &x)| (s.w_index.clone(), x, s.d_column.clone())));
    let z = merge_atoms(steps.iter().zip(l).map(|(s, &x)| (s.z_index.clone(), x, s.a_column.clone())));
    Ok((w, z))
}

/// Exact gap of atom strategies with its two bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapReport {
    /// `max_z ψ(w̄, z)`, an upper bound on the game value.
    pub upper: f64,
    /// `min_w ψ(w, z̄)`, a lower bound on the game value.
    pub lower: f64,
}

impl GapReport {
    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }
}

fn aggregate(atoms: &[Atom], k: usize) -> Result<Vec<f64>> {
    let mut cols = Vec::with_capacity(atoms.len());
    for a in atoms {
        cols.push(a.column.as_ref().ok_or(Error::Unavailable("atom without stored column"))?);
    }
    let weights: Vec<f64> = atoms.iter().map(|a| a.weight).collect();
    let out = weighted_sum(&cols, &weights, k);
    Ok(out)
}

/// `max_z ψ(w̄, z) - min_w ψ(w, z̄)` by two column searches on the
/// aggregated columns `Σ λ D^i` and `Σ λ A^i`.
pub fn exact_gap_report(spec: &BilinearSpSpec, w_atoms: &[Atom], z_atoms: &[Atom]) -> Result<GapReport> {
    let k = spec.rows();
    let dw = aggregate(w_atoms, k)?;
    let az = aggregate(z_atoms, k)?;
    let pw: f64 = w_atoms.iter().map(|a| Ok(a.weight * spec.d.offset_at(&a.index)?)).sum::<Result<f64>>()?;
    let qz: f64 = z_atoms.iter().map(|a| Ok(a.weight * spec.a.offset_at(&a.index)?)).sum::<Result<f64>>()?;
    let (up, lo) = par::join(|| spec.a.extreme(&dw, Direction::Max), || spec.d.extreme(&az, Direction::Min));
    let (zh, qo) = up?;
    let (wh, po) = lo?;
    Ok(GapReport { upper: pw + qo + zh.value, lower: qz + po + wh.value })
}

pub fn exact_gap(spec: &BilinearSpSpec, sol: &SparseAtomSolution) -> Result<f64> {
    Ok(exact_gap_report(spec, &sol.w_atoms, &sol.z_atoms)?.gap())
}

/// Per-round data passed to [`solve_sp_with`] observers.
pub struct SpRound<'a, 'b> {
    pub view: &'a RoundView<'b, SpStep>,
    pub solution: &'a SparseAtomSolution,
}

#[derive(Clone, Debug)]
pub struct SpOutcome {
    pub solution: SparseAtomSolution,
    pub status: Status,
    pub steps: usize,
    pub history: Vec<solvers::HistoryRecord>,
    pub protocol: ExecutionProtocol,
    pub certificate: AccuracyCertificate,
    pub payloads: Vec<SpStep>,
}

pub fn solve_sp(master: &MasterProblem, kind: SolverKind, config: &SolverConfig) -> Result<SpOutcome> {
    solve_sp_with(master, kind, config, &mut |_| Ok(()))
}

/// Runs the solver on the primal field. At every certificate round the atoms
/// are recovered, their gap is evaluated exactly and handed back to the
/// solver as its stopping gap. The reported solution is the round with the
/// smallest exact gap.
pub fn solve_sp_with(
    master: &MasterProblem,
    kind: SolverKind,
    config: &SolverConfig,
    observer: &mut dyn FnMut(&SpRound) -> Result<()>,
) -> Result<SpOutcome> {
    let field = PrimalField::new(master);
    let domain = master.domain();
    let mut best: Option<SparseAtomSolution> = None;
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    let mut callback = |view: &RoundView<SpStep>| -> Result<Option<f64>> {
        let (w_atoms, z_atoms) = recover_atoms(view.certificate, view.payloads)?;
        let rep = exact_gap_report(&master.spec, &w_atoms, &z_atoms)?;
        lower = lower.max(rep.lower);
        upper = upper.min(rep.upper);
        let sol = SparseAtomSolution {
            w_atoms,
            z_atoms,
            gap_bound: view.residual,
            gap_exact: Some(rep.gap()),
            value_estimate: 0.5 * (lower + upper),
            lower,
            upper,
        };
        debug_assert!(rep.gap() <= view.residual + 1e-9 * (1.0 + rep.upper.abs() + rep.lower.abs()));
        observer(&SpRound { view, solution: &sol })?;
        if best.as_ref().is_none_or(|b| rep.gap() <= b.gap_exact.unwrap_or(f64::INFINITY)) {
            best = Some(sol);
        }
        Ok(Some(upper - lower))
    };
    let out = solvers::run(kind, &field, &domain, config, &mut callback)?;
    let mut solution = best.ok_or_else(|| Error::Solver("no certificate round completed".into()))?;
    solution.lower = lower;
    solution.upper = upper;
    solution.value_estimate = 0.5 * (lower + upper);
    Ok(SpOutcome {
        solution,
        status: out.status,
        steps: out.steps,
        history: out.history,
        protocol: out.protocol,
        certificate: out.certificate,
        payloads: out.payloads,
    })
}

/// Position of every column index in lexicographic enumeration order.
fn positions(o: &SimpleMatrixOracle, limit: usize) -> Result<BTreeMap<Vec<usize>, usize>> {
    Ok(o.columns(limit)?.into_iter().enumerate().map(|(j, (i, _))| (i, j)).collect())
}

/// The protocol of the full master problem associated with a primal
/// protocol: points `[u; w; v; z]` with the best responses as vertices of
/// the simplices and fields `[φ'_u; p + Dᵀv; -φ'_v; -q - Aᵀu]`. Only for
/// matrices with at most `limit` columns.
pub fn master_protocol(
    master: &MasterProblem,
    protocol: &ExecutionProtocol,
    steps: &[SpStep],
    limit: usize,
) -> Result<(ExecutionProtocol, DomainDescriptor)> {
    crate::error::check_len(protocol.len(), steps.len())?;
    let (n, m) = master.dims();
    let (a, d, _) = master.dense_operators(limit)?;
    let (big_m, big_n) = (a.ncols(), d.ncols());
    let wpos = positions(master.spec.d(), limit)?;
    let zpos = positions(master.spec.a(), limit)?;
    let p = master.spec.p();
    let q = master.spec.q();
    let dim = n + big_n + m + big_m;
    let mut out = ExecutionProtocol::new(dim);
    for ((x, f), (s, &step)) in
        protocol.points().iter().zip(protocol.field_values()).zip(steps.iter().zip(protocol.step_ids()))
    {
        let (u, v) = x.split_at(n);
        let (gu, mgv) = f.split_at(n);
        let mut point = Vec::with_capacity(dim);
        point.extend_from_slice(u);
        let mut ew = vec![0.0; big_n];
        ew[*wpos.get(&s.w_index).ok_or_else(|| Error::InvalidIndex(s.w_index.clone()))?] = 1.0;
        point.extend_from_slice(&ew);
        point.extend_from_slice(v);
        let mut ez = vec![0.0; big_m];
        ez[*zpos.get(&s.z_index).ok_or_else(|| Error::InvalidIndex(s.z_index.clone()))?] = 1.0;
        point.extend_from_slice(&ez);

        let mut field = Vec::with_capacity(dim);
        field.extend_from_slice(gu);
        let mut alpha = d.tr_mul_vec(v);
        if let Offset::Explicit(pv) = &p {
            for (x, y) in alpha.iter_mut().zip(pv) {
                *x += y;
            }
        }
        field.extend_from_slice(&alpha);
        field.extend_from_slice(mgv);
        let mut beta: Vec<f64> = a.tr_mul_vec(u).iter().map(|x| -x).collect();
        if let Offset::Explicit(qv) = &q {
            for (x, y) in beta.iter_mut().zip(qv) {
                *x -= y;
            }
        }
        field.extend_from_slice(&beta);
        out.push(step, point, field)?;
    }
    let domain = DomainDescriptor::Product(vec![
        DomainDescriptor::origin_ball(n, master.r_u),
        DomainDescriptor::simplex(big_n),
        DomainDescriptor::origin_ball(m, master.r_v),
        DomainDescriptor::simplex(big_m),
    ]);
    Ok((out, domain))
}

/// Residual of the master protocol over `U × W × V × Z`.
pub fn master_residual(
    master: &MasterProblem,
    protocol: &ExecutionProtocol,
    cert: &AccuracyCertificate,
    steps: &[SpStep],
    limit: usize,
) -> Result<f64> {
    let (mp, dom) = master_protocol(master, protocol, steps, limit)?;
    Ok(residual(&mp, cert, &dom)?.residual)
}

/// Saddle-point gap of a master point `(u, w; v, z)` under `Φ`, with `w`, `z`
/// dense mixed strategies over enumerable column sets.
pub fn master_gap(master: &MasterProblem, u: &[f64], w: &[f64], v: &[f64], z: &[f64], limit: usize) -> Result<f64> {
    let (a, d, _) = master.dense_operators(limit)?;
    check_dim(d.ncols(), w.len())?;
    check_dim(a.ncols(), z.len())?;
    let p = match master.spec.p() {
        Offset::Explicit(v) => v,
        Offset::Zero => vec![0.0; w.len()],
    };
    let q = match master.spec.q() {
        Offset::Explicit(v) => v,
        Offset::Zero => vec![0.0; z.len()],
    };
    // sup over (v', z') of <w, p> + <v', D w - R u> + <z', q + Aᵀu>.
    let dw_ru = sub(&d.mul_vec(w), &master.r_mul(u));
    let q_atu: Vec<f64> = a.tr_mul_vec(u).iter().zip(&q).map(|(x, y)| x + y).collect();
    let sup = dot(w, &p) + master.r_v * norm(&dw_ru) + q_atu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // inf over (u', w') of <z, q> + <u', A z - Rᵀv> + <w', p + Dᵀv>.
    let az_rtv = sub(&a.mul_vec(z), &master.r_tr_mul(v));
    let p_dtv: Vec<f64> = d.tr_mul_vec(v).iter().zip(&p).map(|(x, y)| x + y).collect();
    let inf = dot(z, &q) - master.r_u * norm(&az_rtv) + p_dtv.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(sup - inf)
}

/// Saddle-point gap of dense mixed strategies under `ψ` (small instances).
pub fn psi_gap_dense(spec: &BilinearSpSpec, w: &[f64], z: &[f64], limit: usize) -> Result<f64> {
    let wc = spec.d().columns(limit)?;
    let zc = spec.a().columns(limit)?;
    check_dim(wc.len(), w.len())?;
    check_dim(zc.len(), z.len())?;
    let to_atoms = |x: &[f64], cols: &[(Vec<usize>, Vec<f64>)]| -> Vec<Atom> {
        x.iter()
            .zip(cols)
            .filter(|(wt, _)| **wt != 0.0)
            .map(|(wt, (i, c))| Atom { index: i.clone(), weight: *wt, column: Some(c.clone()) })
            .collect()
    };
    Ok(exact_gap_report(spec, &to_atoms(w, &wc), &to_atoms(z, &zc))?.gap())
}
