//! Skew-symmetric VIs `F(η) = 2QᵀPη + f` on a product of simplices.
//!
//! `P` and `Q` are `K × N` with `QᵀP` skew-symmetric. The primal field lives
//! on `Ξ₁ × Ξ₂`, two balls in `R^K` with `QH ⊂ Ξ₁` and `-PH ⊂ Ξ₂`, so its
//! dimension does not depend on `N`. `H` is a product of simplices, one per
//! block of columns, and the LMO over `H` is one column search per block.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BestRound, ViObserver, ViOutcome, ViRound};
use crate::certificates::ExecutionProtocol;
use crate::domain::{BallProduct, DomainDescriptor};
use crate::error::{check_dim, check_finite, check_len, Error, Result};
use crate::linalg::{axpy, dot, norm, weighted_sum};
use crate::oracles::{DenseMatrix, Direction, OffsetOracle, SimpleMatrix, SimpleMatrixOracle};
use crate::saddle::Atom;
use crate::solvers::{self, RoundView, SolverConfig, SolverKind, VectorField};

/// How the columns of a block's oracle map to columns of `P` and `Q`.
#[derive(Clone, Debug, PartialEq)]
enum Lift {
    /// The oracle's columns are `[P_j; Q_j]`.
    Stacked,
    /// Player `player` of a Nash game: oracle columns are `d = D_ℓ e_j`,
    /// `P_j` stacks `M^{ℓ''ℓ} d` over all players `ℓ''` and `Q_j` is `d / 2`
    /// placed in the player's own rows.
    Nash { player: usize, offsets: Vec<usize>, loss_in: Vec<DenseMatrix> },
}

/// One simplex factor of `H` with its columns of `P`, `Q` and `f`.
#[derive(Clone, Debug, PartialEq)]
pub struct SkewBlock {
    k: usize,
    oracle: OffsetOracle,
    lift: Lift,
}

/// The columns of `P`, `Q` and the entry of `f` for one column index.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockColumn {
    pub index: Vec<usize>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub f: f64,
}

impl SkewBlock {
    /// A block whose oracle has `2K` rows holding `[P_j; Q_j]`.
    pub fn stacked(k: usize, pq: SimpleMatrixOracle, f: Option<Vec<f64>>) -> Result<Self> {
        check_dim(2 * k, pq.rows())?;
        Ok(SkewBlock { k, oracle: OffsetOracle::new(pq, f)?, lift: Lift::Stacked })
    }

    pub(crate) fn nash(
        player: usize,
        offsets: Vec<usize>,
        loss_in: Vec<DenseMatrix>,
        encoding: SimpleMatrixOracle,
        f: Option<Vec<f64>>,
    ) -> Result<Self> {
        let k = *offsets.last().expect("offsets end with K");
        check_len(offsets.len() - 1, loss_in.len())?;
        for (l, m) in loss_in.iter().enumerate() {
            check_dim(offsets[l + 1] - offsets[l], m.nrows())?;
            check_dim(encoding.rows(), m.ncols())?;
        }
        check_dim(offsets[player + 1] - offsets[player], encoding.rows())?;
        Ok(SkewBlock { k, oracle: OffsetOracle::new(encoding, f)?, lift: Lift::Nash { player, offsets, loss_in } })
    }

    pub fn oracle(&self) -> &SimpleMatrixOracle {
        self.oracle.oracle()
    }

    pub fn count_columns(&self) -> BigUint {
        self.oracle.oracle().count_columns()
    }

    /// `y` with `<column_j, y> = <P_j, x1> + <Q_j, x2>`.
    fn query(&self, x1: &[f64], x2: &[f64]) -> Vec<f64> {
        match &self.lift {
            Lift::Stacked => [x1, x2].concat(),
            Lift::Nash { player, offsets, loss_in } => {
                let mut y: Vec<f64> = x2[offsets[*player]..offsets[*player + 1]].iter().map(|v| 0.5 * v).collect();
                for (l, m) in loss_in.iter().enumerate() {
                    axpy(&mut y, 1.0, &m.tr_mul_vec(&x1[offsets[l]..offsets[l + 1]]));
                }
                y
            }
        }
    }

    fn lift_column(&self, d: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match &self.lift {
            Lift::Stacked => (d[..self.k].to_vec(), d[self.k..].to_vec()),
            Lift::Nash { player, offsets, loss_in } => {
                let p = loss_in.iter().flat_map(|m| m.mul_vec(d)).collect();
                let mut q = vec![0.0; self.k];
                for (o, v) in q[offsets[*player]..offsets[*player + 1]].iter_mut().zip(d) {
                    *o = 0.5 * v;
                }
                (p, q)
            }
        }
    }

    /// Column minimizing `f_j - <P_j, x1> - <Q_j, x2>`, with that value.
    pub fn lmo(&self, x1: &[f64], x2: &[f64]) -> Result<(BlockColumn, f64)> {
        let y: Vec<f64> = self.query(x1, x2).iter().map(|v| -v).collect();
        let (hit, f) = self.oracle.extreme(&y, Direction::Min)?;
        let (p, q) = self.lift_column(&hit.column);
        Ok((BlockColumn { index: hit.index, p, q, f }, f + hit.value))
    }

    pub fn column(&self, index: &[usize]) -> Result<BlockColumn> {
        let d = self.oracle.oracle().column(index)?;
        let (p, q) = self.lift_column(&d);
        Ok(BlockColumn { index: index.to_vec(), p, q, f: self.oracle.offset_at(index)? })
    }

    /// Upper bounds on `max_j ‖P_j‖` and `max_j ‖Q_j‖`.
    fn norm_bounds(&self) -> (f64, f64) {
        let o = self.oracle.oracle();
        match (&self.lift, o.as_dense()) {
            (_, Some(m)) => (0..m.ncols()).fold((0.0, 0.0), |(bp, bq), j| {
                let (p, q) = self.lift_column(&m.col(j));
                (f64::max(bp, norm(&p)), f64::max(bq, norm(&q)))
            }),
            (Lift::Stacked, None) => (o.column_norm_bound(), o.column_norm_bound()),
            (Lift::Nash { loss_in, .. }, None) => {
                let frob = loss_in.iter().flat_map(|m| m.data().iter()).map(|v| v * v).sum::<f64>().sqrt();
                (frob * o.column_norm_bound(), 0.5 * o.column_norm_bound())
            }
        }
    }
}

/// `F(η) = 2QᵀPη + f` on a product of simplices, with primal radii.
#[derive(Clone, Debug, PartialEq)]
pub struct SkewViSpec {
    k: usize,
    blocks: Vec<SkewBlock>,
    xi1_radius: f64,
    xi2_radius: f64,
}

/// Per-block atoms of a point of `H`.
pub type BlockAtoms = Vec<Vec<Atom>>;

impl SkewViSpec {
    /// Assembles the spec. Radii default to the triangle bounds
    /// `Σ_ℓ max_j ‖Q_j‖` and `Σ_ℓ max_j ‖P_j‖` (a zero bound becomes 1);
    /// explicit radii must not be smaller.
    pub fn new(k: usize, blocks: Vec<SkewBlock>, radii: Option<(f64, f64)>) -> Result<Self> {
        if k == 0 || blocks.is_empty() {
            return Err(Error::InvalidSpec("skew VI needs K ≥ 1 and at least one block".into()));
        }
        for b in &blocks {
            check_dim(k, b.k)?;
        }
        let (bp, bq) = blocks.iter().map(SkewBlock::norm_bounds).fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
        let (r1, r2) = match radii {
            None => (if bq > 0.0 { bq } else { 1.0 }, if bp > 0.0 { bp } else { 1.0 }),
            Some((r1, r2)) => {
                let ok = |r: f64, need: f64| r.is_finite() && r > 0.0 && r >= need * (1.0 - 1e-12);
                if !ok(r1, bq) || !ok(r2, bp) {
                    return Err(Error::InvalidSpec(format!(
                        "radii ({r1}, {r2}) do not cover QH and -PH (need {bq}, {bp})"
                    )));
                }
                (r1, r2)
            }
        };
        Ok(SkewViSpec { k, blocks, xi1_radius: r1, xi2_radius: r2 })
    }

    /// Dense `P`, `Q` (`K × N`) with `H = Δ_{n_1} × … × Δ_{n_L}` given by
    /// `block_sizes`. `QᵀP` must be skew-symmetric up to `1e-9` relative to
    /// its largest entry.
    pub fn from_dense(p: &DenseMatrix, q: &DenseMatrix, f: Option<Vec<f64>>, block_sizes: &[usize]) -> Result<Self> {
        let (k, n) = (p.nrows(), p.ncols());
        check_dim(k, q.nrows())?;
        check_dim(n, q.ncols())?;
        check_dim(n, block_sizes.iter().sum())?;
        if let Some(f) = &f {
            check_dim(n, f.len())?;
        }
        if block_sizes.contains(&0) {
            return Err(Error::InvalidSpec("empty simplex block".into()));
        }
        let m = q.transpose().matmul(p)?;
        let scale = m.data().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for i in 0..n {
            for j in 0..=i {
                let d = (m.get(i, j) + m.get(j, i)).abs();
                if d > 1e-9 * scale.max(f64::MIN_POSITIVE) {
                    return Err(Error::InvalidSpec(format!("QᵀP is not skew-symmetric at ({i}, {j}): defect {d}")));
                }
            }
        }
        let mut blocks = Vec::with_capacity(block_sizes.len());
        let mut start = 0;
        for &len in block_sizes {
            let mut rows: Vec<Vec<f64>> = Vec::with_capacity(2 * k);
            for src in [p, q] {
                for r in 0..k {
                    rows.push((start..start + len).map(|j| src.get(r, j)).collect());
                }
            }
            let fb = f.as_ref().map(|f| f[start..start + len].to_vec());
            blocks.push(SkewBlock::stacked(k, DenseMatrix::from_rows(&rows)?.into(), fb)?);
            start += len;
        }
        Self::new(k, blocks, None)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn blocks(&self) -> &[SkewBlock] {
        &self.blocks
    }

    pub fn radii(&self) -> (f64, f64) {
        (self.xi1_radius, self.xi2_radius)
    }

    pub fn domain(&self) -> Result<BallProduct> {
        BallProduct::origin(&[(self.k, self.xi1_radius), (self.k, self.xi2_radius)])
    }

    /// Total column count `N`.
    pub fn count_columns(&self) -> BigUint {
        self.blocks.iter().map(SkewBlock::count_columns).sum()
    }

    /// `Σ_ℓ min_j [f_j - <P_j, x1> - <Q_j, x2>]` and its minimizers.
    pub fn lmo(&self, x1: &[f64], x2: &[f64]) -> Result<(Vec<BlockColumn>, f64)> {
        check_dim(self.k, x1.len())?;
        check_dim(self.k, x2.len())?;
        let mut cols = Vec::with_capacity(self.blocks.len());
        let mut total = 0.0;
        for b in &self.blocks {
            let (c, v) = b.lmo(x1, x2)?;
            cols.push(c);
            total += v;
        }
        Ok((cols, total))
    }

    /// `(Qη, <f, η>)` for `η` given by per-block atoms.
    pub fn q_and_f(&self, eta: &[Vec<Atom>]) -> Result<(Vec<f64>, f64)> {
        check_len(self.blocks.len(), eta.len())?;
        let mut qe = vec![0.0; self.k];
        let mut fe = 0.0;
        for (b, atoms) in self.blocks.iter().zip(eta) {
            for a in atoms {
                let c = b.column(&a.index)?;
                axpy(&mut qe, a.weight, &c.q);
                fe += a.weight * c.f;
            }
        }
        Ok((qe, fe))
    }

    /// `ε_VI` from `Qη` and `<f, η>`: since the quadratic term vanishes,
    /// `sup_{η'} <F(η'), η - η'> = <f, η> - min_{η'} <f - 2PᵀQη, η'>`.
    pub fn eps_from_aggregates(&self, q_eta: &[f64], f_eta: f64) -> Result<f64> {
        let x1: Vec<f64> = q_eta.iter().map(|v| 2.0 * v).collect();
        let (_, min) = self.lmo(&x1, &vec![0.0; self.k])?;
        Ok(f_eta - min)
    }

    /// Materializes `P`, `Q` and `f` when `N ≤ limit`.
    pub fn materialize(&self, limit: usize) -> Result<SkewDense> {
        let mut pcols = Vec::new();
        let mut qcols = Vec::new();
        let mut f = Vec::new();
        let mut indices = Vec::new();
        for b in &self.blocks {
            let mut idx = Vec::new();
            for (index, _) in b.oracle.oracle().columns(limit.saturating_sub(f.len()))? {
                let c = b.column(&index)?;
                pcols.push(c.p);
                qcols.push(c.q);
                f.push(c.f);
                idx.push(index);
            }
            indices.push(idx);
        }
        let to_matrix = |cols: &[Vec<f64>]| {
            let rows: Vec<Vec<f64>> = (0..self.k).map(|r| cols.iter().map(|c| c[r]).collect()).collect();
            DenseMatrix::from_rows(&rows)
        };
        let positions = indices
            .iter()
            .map(|idx| idx.iter().enumerate().map(|(j, i)| (i.clone(), j)).collect())
            .collect();
        Ok(SkewDense { p: to_matrix(&pcols)?, q: to_matrix(&qcols)?, f, indices, positions })
    }
}

/// Exact `ε_VI(η)` for `η` given by per-block atoms.
pub fn eps_vi_skew(spec: &SkewViSpec, eta: &[Vec<Atom>]) -> Result<f64> {
    let (qe, fe) = spec.q_and_f(eta)?;
    spec.eps_from_aggregates(&qe, fe)
}

/// What one evaluation of the primal field selected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkewStep {
    /// `η̄(ξ)`: one column index per block.
    pub indices: Vec<Vec<usize>>,
    pub p_eta: Vec<f64>,
    pub q_eta: Vec<f64>,
    pub f_eta: f64,
}

/// `Ψ(ξ₁, ξ₂) = [ξ₂ + Pη̄; -ξ₁ + Qη̄]` with
/// `η̄ ∈ Argmin_H <f - Pᵀξ₁ - Qᵀξ₂, ·>`.
pub struct SkewField<'a> {
    spec: &'a SkewViSpec,
}

impl<'a> SkewField<'a> {
    pub fn new(spec: &'a SkewViSpec) -> Self {
        SkewField { spec }
    }
}

impl VectorField for SkewField<'_> {
    type Payload = SkewStep;

    fn dim(&self) -> usize {
        2 * self.spec.k
    }

    fn eval(&self, xi: &[f64]) -> Result<(Vec<f64>, SkewStep)> {
        let k = self.spec.k;
        check_dim(2 * k, xi.len())?;
        check_finite(xi, "xi")?;
        let (x1, x2) = xi.split_at(k);
        let (cols, _) = self.spec.lmo(x1, x2)?;
        let mut p_eta = vec![0.0; k];
        let mut q_eta = vec![0.0; k];
        let mut f_eta = 0.0;
        for c in &cols {
            axpy(&mut p_eta, 1.0, &c.p);
            axpy(&mut q_eta, 1.0, &c.q);
            f_eta += c.f;
        }
        let mut psi = Vec::with_capacity(2 * k);
        psi.extend(x2.iter().zip(&p_eta).map(|(a, b)| a + b));
        psi.extend(x1.iter().zip(&q_eta).map(|(a, b)| b - a));
        let indices = cols.into_iter().map(|c| c.index).collect();
        Ok((psi, SkewStep { indices, p_eta, q_eta, f_eta }))
    }
}

/// Per-block atoms `η^t = Σ λ_i η̄(ξ_i)`.
pub fn recover_block_atoms(weights: &[f64], steps: &[SkewStep], blocks: usize) -> Result<BlockAtoms> {
    check_len(steps.len(), weights.len())?;
    let mut maps: Vec<BTreeMap<Vec<usize>, f64>> = vec![BTreeMap::new(); blocks];
    for (s, &w) in steps.iter().zip(weights) {
        check_len(blocks, s.indices.len())?;
        if w > 0.0 {
            for (m, i) in maps.iter_mut().zip(&s.indices) {
                *m.entry(i.clone()).or_insert(0.0) += w;
            }
        }
    }
    Ok(maps
        .into_iter()
        .map(|m| m.into_iter().map(|(index, weight)| Atom { index, weight, column: None }).collect())
        .collect())
}

pub fn solve_skew_vi(spec: &SkewViSpec, kind: SolverKind, config: &SolverConfig) -> Result<ViOutcome<BlockAtoms>> {
    solve_skew_vi_with(spec, kind, config, &mut |_| Ok(()))
}

/// Runs the solver on `Ψ`; every certificate round recovers `η^t` and its
/// exact dual gap, which also serves as the stopping gap.
pub fn solve_skew_vi_with(
    spec: &SkewViSpec,
    kind: SolverKind,
    config: &SolverConfig,
    observer: &mut ViObserver<'_, SkewStep, BlockAtoms>,
) -> Result<ViOutcome<BlockAtoms>> {
    let field = SkewField::new(spec);
    let domain = spec.domain()?;
    let mut best = BestRound::new();
    let mut callback = |view: &RoundView<SkewStep>| -> Result<Option<f64>> {
        let w = view.certificate.weights();
        let qs: Vec<&[f64]> = view.payloads.iter().map(|s| s.q_eta.as_slice()).collect();
        let q_eta = weighted_sum(&qs, w, spec.k);
        let f_eta: f64 = view.payloads.iter().zip(w).map(|(s, l)| l * s.f_eta).sum();
        let eps = spec.eps_from_aggregates(&q_eta, f_eta)?;
        let eta = recover_block_atoms(w, view.payloads, spec.blocks.len())?;
        observer(&ViRound { view, eta: &eta, eps_exact: Some(eps) })?;
        best.offer(eta, view.residual, Some(eps));
        Ok(Some(eps))
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

/// A materialized skew VI, used to evaluate the full operator and the
/// master problem on small instances.
#[derive(Clone, Debug, PartialEq)]
pub struct SkewDense {
    pub p: DenseMatrix,
    pub q: DenseMatrix,
    pub f: Vec<f64>,
    /// Column indices of each block in enumeration order.
    pub indices: Vec<Vec<Vec<usize>>>,
    positions: Vec<BTreeMap<Vec<usize>, usize>>,
}

impl SkewDense {
    pub fn k(&self) -> usize {
        self.p.nrows()
    }

    pub fn n(&self) -> usize {
        self.f.len()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.indices.iter().map(Vec::len).collect()
    }

    pub fn h(&self) -> DomainDescriptor {
        DomainDescriptor::Product(self.block_sizes().into_iter().map(DomainDescriptor::Simplex).collect())
    }

    /// Dense vector of per-block atoms.
    pub fn densify(&self, eta: &[Vec<Atom>]) -> Result<Vec<f64>> {
        check_len(self.indices.len(), eta.len())?;
        let mut out = vec![0.0; self.n()];
        let mut start = 0;
        for ((atoms, pos), idx) in eta.iter().zip(&self.positions).zip(&self.indices) {
            for a in atoms {
                let j = pos.get(&a.index).ok_or_else(|| Error::InvalidIndex(a.index.clone()))?;
                out[start + j] += a.weight;
            }
            start += idx.len();
        }
        Ok(out)
    }

    /// Per-block atoms of a dense point of `H` (zero entries dropped).
    pub fn atoms(&self, eta: &[f64]) -> Result<BlockAtoms> {
        check_dim(self.n(), eta.len())?;
        let mut start = 0;
        Ok(self
            .indices
            .iter()
            .map(|idx| {
                let out = idx
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| eta[start + j] != 0.0)
                    .map(|(j, i)| Atom { index: i.clone(), weight: eta[start + j], column: None })
                    .collect();
                start += idx.len();
                out
            })
            .collect())
    }

    /// `F(η) = 2Qᵀ(Pη) + f`.
    pub fn field(&self, eta: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n(), eta.len())?;
        let pe = self.p.mul_vec(eta);
        let mut out = self.q.tr_mul_vec(&pe);
        for (o, f) in out.iter_mut().zip(&self.f) {
            *o = 2.0 * *o + f;
        }
        Ok(out)
    }

    /// Exact `ε_VI(η) = <f, η> - min_{η'∈H} <F(η), η'>`, valid for skew `QᵀP`.
    pub fn eps_vi(&self, eta: &[f64]) -> Result<f64> {
        let g = self.field(eta)?;
        let (_, min) = self.h().lmo_argmin(&g)?;
        Ok(dot(&self.f, eta) - min)
    }

    /// Largest `|<η, QᵀPη>| / (‖Pη‖ ‖Qη‖)` over `samples` random points of
    /// `H` drawn with the given seed.
    pub fn skewness_defect(&self, samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes = self.block_sizes();
        let mut worst = 0.0f64;
        for _ in 0..samples {
            let mut eta = Vec::with_capacity(self.n());
            for &n in &sizes {
                let raw: Vec<f64> = (0..n).map(|_| -rng.gen::<f64>().max(f64::MIN_POSITIVE).ln()).collect();
                let s: f64 = raw.iter().sum();
                eta.extend(raw.iter().map(|v| v / s));
            }
            let pe = self.p.mul_vec(&eta);
            let qe = self.q.mul_vec(&eta);
            let scale = norm(&pe) * norm(&qe);
            if scale > 0.0 {
                worst = worst.max(dot(&pe, &qe).abs() / scale);
            }
        }
        worst
    }

    /// `Θ = Ξ₁ × Ξ₂ × H`.
    pub fn theta(&self, radii: (f64, f64)) -> DomainDescriptor {
        let k = self.k();
        let mut parts = vec![DomainDescriptor::origin_ball(k, radii.0), DomainDescriptor::origin_ball(k, radii.1)];
        parts.extend(self.block_sizes().into_iter().map(DomainDescriptor::Simplex));
        DomainDescriptor::Product(parts)
    }

    /// Master operator
    /// `Φ(ξ₁, ξ₂, η) = [ξ₂ + Pη; -ξ₁ + Qη; f - Pᵀξ₁ - Qᵀξ₂]`.
    pub fn master_field(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let k = self.k();
        check_dim(2 * k + self.n(), theta.len())?;
        let (x1, rest) = theta.split_at(k);
        let (x2, eta) = rest.split_at(k);
        let pe = self.p.mul_vec(eta);
        let qe = self.q.mul_vec(eta);
        let mut out = Vec::with_capacity(theta.len());
        out.extend(x2.iter().zip(&pe).map(|(a, b)| a + b));
        out.extend(x1.iter().zip(&qe).map(|(a, b)| b - a));
        let ptx = self.p.tr_mul_vec(x1);
        let qtx = self.q.tr_mul_vec(x2);
        out.extend((0..self.n()).map(|j| self.f[j] - ptx[j] - qtx[j]));
        Ok(out)
    }

    /// `ε_VI(θ | Φ, Θ)`. `Φ` is affine with a skew linear part, so the gap is
    /// `<f, η> - min_{θ'∈Θ} <Φ(θ), θ'>`.
    pub fn master_eps_vi(&self, theta: &[f64], radii: (f64, f64)) -> Result<f64> {
        let g = self.master_field(theta)?;
        let (_, min) = self.theta(radii).lmo_argmin(&g)?;
        Ok(dot(&self.f, &theta[2 * self.k()..]) - min)
    }

    /// The protocol `J` on `Θ` associated with a primal protocol: points
    /// `θ_i = [ξ_i; η̄(ξ_i)]` and values `Φ(θ_i)`.
    pub fn master_protocol(&self, protocol: &ExecutionProtocol, steps: &[SkewStep]) -> Result<ExecutionProtocol> {
        check_len(protocol.len(), steps.len())?;
        let dim = 2 * self.k() + self.n();
        let mut out = ExecutionProtocol::new(dim);
        for ((&id, xi), s) in protocol.step_ids().iter().zip(protocol.points()).zip(steps) {
            let atoms: BlockAtoms = s
                .indices
                .iter()
                .map(|i| vec![Atom { index: i.clone(), weight: 1.0, column: None }])
                .collect();
            let mut theta = xi.clone();
            theta.extend(self.densify(&atoms)?);
            let g = self.master_field(&theta)?;
            out.push(id, theta, g)?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificates::{residual, weighted_point};

    /// Matching pennies as a two-block skew VI: `Q = I/2`, `P` holds the
    /// payoff matrix `B` and `-Bᵀ` off the diagonal, so `F = 2QᵀP = P`.
    fn rotation_spec() -> SkewViSpec {
        let p = DenseMatrix::from_rows(&[
            vec![0.0, 0.0, 1.0, -1.0],
            vec![0.0, 0.0, -1.0, 1.0],
            vec![-1.0, 1.0, 0.0, 0.0],
            vec![1.0, -1.0, 0.0, 0.0],
        ])
        .unwrap();
        let q = DenseMatrix::from_rows(&[
            vec![0.5, 0.0, 0.0, 0.0],
            vec![0.0, 0.5, 0.0, 0.0],
            vec![0.0, 0.0, 0.5, 0.0],
            vec![0.0, 0.0, 0.0, 0.5],
        ])
        .unwrap();
        SkewViSpec::from_dense(&p, &q, None, &[2, 2]).unwrap()
    }

    #[test]
    fn zero_query_picks_tie_break_vertices() {
        let spec = rotation_spec();
        let (psi, step) = SkewField::new(&spec).eval(&[0.0; 8]).unwrap();
        assert_eq!(step.indices, vec![vec![0], vec![0]]);
        let dense = spec.materialize(100).unwrap();
        let eta = [1.0, 0.0, 1.0, 0.0];
        let mut expect = dense.p.mul_vec(&eta);
        expect.extend(dense.q.mul_vec(&eta));
        assert_eq!(psi, expect);
    }

    #[test]
    fn rejects_non_skew_data() {
        let p = DenseMatrix::identity(2);
        let q = DenseMatrix::identity(2);
        assert!(SkewViSpec::from_dense(&p, &q, None, &[2]).is_err());
    }

    #[test]
    fn skew_gap_matches_vertex_enumeration() {
        // For skew QᵀP, <F(η'), η - η'> is affine in η', so the sup over H is
        // attained at a vertex.
        let spec = rotation_spec();
        let dense = spec.materialize(100).unwrap();
        let h = dense.h();
        let verts = h.vertices(100).unwrap();
        for eta in [[1.0, 0.0, 1.0, 0.0], [0.5, 0.5, 0.5, 0.5], [0.2, 0.8, 0.7, 0.3]] {
            let brute = verts
                .iter()
                .map(|v| {
                    let fv = dense.field(v).unwrap();
                    dot(&fv, &eta) - dot(&fv, v)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            let exact = dense.eps_vi(&eta).unwrap();
            assert!((exact - brute).abs() < 1e-12, "{exact} vs {brute}");
            let via_atoms = eps_vi_skew(&spec, &dense.atoms(&eta).unwrap()).unwrap();
            assert!((via_atoms - exact).abs() < 1e-12);
        }
        assert_eq!(dense.eps_vi(&[0.5, 0.5, 0.5, 0.5]).unwrap(), 0.0);
        assert_eq!(dense.eps_vi(&[1.0, 0.0, 1.0, 0.0]).unwrap(), 2.0);
    }

    #[test]
    fn solve_reaches_equilibrium_and_transfers_residuals() {
        let spec = rotation_spec();
        let dense = spec.materialize(100).unwrap();
        let radii = spec.radii();
        let cfg = SolverConfig { max_steps: 4000, gap_threshold: 1e-7, cert_period: Some(16), ..Default::default() };
        let mut rounds = 0;
        let out = solve_skew_vi_with(&spec, SolverKind::Ellipsoid, &cfg, &mut |r| {
            let eps = r.eps_exact.unwrap();
            let eta = dense.densify(r.eta).unwrap();
            assert!((eps - dense.eps_vi(&eta).unwrap()).abs() < 1e-9);
            let j = dense.master_protocol(r.view.protocol, r.view.payloads).unwrap();
            let res_j = residual(&j, r.view.certificate, &dense.theta(radii)).unwrap().residual;
            let theta = weighted_point(&j, r.view.certificate).unwrap();
            let eps_master = dense.master_eps_vi(&theta, radii).unwrap();
            assert!(eps <= eps_master + 1e-9);
            assert!(eps_master <= res_j + 1e-9);
            assert!(res_j <= r.view.residual + 1e-9, "{res_j} > {}", r.view.residual);
            rounds += 1;
            Ok(())
        })
        .unwrap();
        assert!(rounds > 0);
        assert!(out.eps_exact.unwrap() <= 1e-7, "{:?}", out.eps_exact);
        assert_eq!(out.status, crate::solvers::Status::GapReached);
        let eta = dense.densify(&out.eta).unwrap();
        for v in eta {
            assert!((v - 0.5).abs() < 1e-3);
        }
    }
}
