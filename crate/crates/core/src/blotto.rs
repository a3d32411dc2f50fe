//! Attacker vs. Defender: a Colonel Blotto type matrix game.
//!
//! Attacker and Defender deploy integer numbers of units on `m` battlefields
//! under per-field caps and a linear budget. Deploying `a_s` attackers against
//! `d_s` defenders on field `s` costs Defender `Ω^s[a_s, d_s]`; the total loss
//! is the sum over fields. Factoring each `Ω^s = Σ_i f^{is} (g^{is})ᵀ` makes the
//! payoff matrix `S = AᵀD` with knapsack-generated `A` (Attacker) and `D`
//! (Defender), both with `K = Σ_s rank(Ω^s)` rows.

use std::path::Path;
use std::time::Instant;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::certificates::{AccuracyCertificate, ExecutionProtocol};
use crate::error::{check_finite, Error, Result};
use crate::oracles::{DenseMatrix, KnapsackOracle, KnapsackSpec, SimpleMatrix, SimpleMatrixOracle};
use crate::saddle::{build_master_example2, solve_sp_with, Atom, BilinearSpSpec, Offset, SpRound};
use crate::solvers::{HistoryRecord, SolverConfig, SolverKind, Status};

/// Relative pivot tolerance of [`rank_factor`].
pub const RANK_TOL: f64 = 1e-9;

/// Rank-revealing factorization `Ω = Σ_i f_i g_iᵀ` by Gaussian elimination
/// with complete pivoting. Elimination stops once the largest remaining
/// entry is at most `RANK_TOL` times the largest entry of `Ω`, so the number
/// of terms is the numerical rank.
pub fn rank_factor(omega: &DenseMatrix) -> Vec<(Vec<f64>, Vec<f64>)> {
    let (r, c) = (omega.nrows(), omega.ncols());
    let mut e = omega.to_rows();
    let scale = omega.data().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut terms = Vec::new();
    loop {
        let mut best = (0, 0, 0.0f64);
        for (i, row) in e.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if v.abs() > best.2 {
                    best = (i, j, v.abs());
                }
            }
        }
        let (pi, pj, mag) = best;
        if mag == 0.0 || mag <= RANK_TOL * scale || terms.len() == r.min(c) {
            return terms;
        }
        let pivot = e[pi][pj];
        let f: Vec<f64> = (0..r).map(|i| e[i][pj]).collect();
        let g: Vec<f64> = e[pi].iter().map(|v| v / pivot).collect();
        for (row, fi) in e.iter_mut().zip(&f) {
            for (x, gj) in row.iter_mut().zip(&g) {
                *x -= fi * gj;
            }
        }
        // Pivot row and column are exactly zero after elimination.
        for row in e.iter_mut() {
            row[pj] = 0.0;
        }
        e[pi].iter_mut().for_each(|x| *x = 0.0);
        terms.push((f, g));
    }
}

/// Per-field loss matrices, given explicitly or generated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OmegaSpec {
    Explicit(Vec<DenseMatrix>),
    /// Rank-one `Ω^s = f gᵀ` with `f`, `g` uniform on `[0, 1]`, drawn from a
    /// ChaCha8 stream with this seed.
    Rank1 { rank1_seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlottoSpec {
    pub m: usize,
    pub caps_a: Vec<usize>,
    pub caps_d: Vec<usize>,
    pub costs_a: Vec<usize>,
    pub costs_d: Vec<usize>,
    pub budget_a: usize,
    pub budget_d: usize,
    pub omega: OmegaSpec,
}

impl BlottoSpec {
    /// Same caps, unit costs and budgets on both sides, rank-one seeded `Ω`.
    pub fn uniform(m: usize, cap: usize, budget: usize, seed: u64) -> Self {
        BlottoSpec {
            m,
            caps_a: vec![cap; m],
            caps_d: vec![cap; m],
            costs_a: vec![1; m],
            costs_d: vec![1; m],
            budget_a: budget,
            budget_d: budget,
            omega: OmegaSpec::Rank1 { rank1_seed: seed },
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: BlottoSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.m;
        if m == 0 {
            return Err(Error::InvalidSpec("at least one battlefield is needed".into()));
        }
        for (name, v) in [("caps_a", &self.caps_a), ("caps_d", &self.caps_d), ("costs_a", &self.costs_a), ("costs_d", &self.costs_d)] {
            if v.len() != m {
                return Err(Error::InvalidSpec(format!("{name} has {} entries, expected {m}", v.len())));
            }
        }
        if self.costs_a.contains(&0) || self.costs_d.contains(&0) {
            return Err(Error::InvalidSpec("unit costs must be positive".into()));
        }
        if self.budget_a == 0 || self.budget_d == 0 {
            return Err(Error::InvalidSpec("budgets must be positive".into()));
        }
        if let OmegaSpec::Explicit(om) = &self.omega {
            if om.len() != m {
                return Err(Error::InvalidSpec(format!("{} loss matrices for {m} battlefields", om.len())));
            }
            for (s, o) in om.iter().enumerate() {
                if o.nrows() != self.caps_a[s] + 1 || o.ncols() != self.caps_d[s] + 1 {
                    return Err(Error::InvalidSpec(format!(
                        "field {s}: loss matrix is {}×{}, expected {}×{}",
                        o.nrows(),
                        o.ncols(),
                        self.caps_a[s] + 1,
                        self.caps_d[s] + 1
                    )));
                }
                check_finite(o.data(), "loss matrix")?;
            }
        }
        Ok(())
    }

    /// The loss matrices `Ω^s`, generating them if seeded.
    pub fn omegas(&self) -> Result<Vec<DenseMatrix>> {
        match &self.omega {
            OmegaSpec::Explicit(om) => Ok(om.clone()),
            OmegaSpec::Rank1 { rank1_seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*rank1_seed);
                (0..self.m)
                    .map(|s| {
                        let f: Vec<f64> = (0..=self.caps_a[s]).map(|_| rng.gen::<f64>()).collect();
                        let g: Vec<f64> = (0..=self.caps_d[s]).map(|_| rng.gen::<f64>()).collect();
                        let data = f.iter().flat_map(|x| g.iter().map(move |y| x * y)).collect();
                        DenseMatrix::new(f.len(), g.len(), data)
                    })
                    .collect()
            }
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self.omega {
            OmegaSpec::Rank1 { rank1_seed } => Some(rank1_seed),
            OmegaSpec::Explicit(_) => None,
        }
    }

    /// Loss `S_{a,d} = Σ_s Ω^s[a_s, d_s]` of a pair of pure strategies.
    pub fn loss(&self, omegas: &[DenseMatrix], a: &[usize], d: &[usize]) -> f64 {
        omegas.iter().zip(a.iter().zip(d)).map(|(o, (&x, &y))| o.get(x, y)).sum()
    }
}

/// The factored game.
#[derive(Clone, Debug)]
pub struct BlottoGame {
    pub attacker: KnapsackSpec,
    pub defender: KnapsackSpec,
    /// Terms per battlefield.
    pub ranks: Vec<usize>,
    pub sp: BilinearSpSpec,
}

impl BlottoGame {
    pub fn k(&self) -> usize {
        self.ranks.iter().sum()
    }
}

/// Factors every `Ω^s` and builds the knapsack-generated `A` and `D`. A field
/// whose loss matrix is zero keeps one zero term so that every stage has a
/// row.
pub fn build_blotto(spec: &BlottoSpec) -> Result<BlottoGame> {
    spec.validate()?;
    let omegas = spec.omegas()?;
    let mut out_a = Vec::with_capacity(spec.m);
    let mut out_d = Vec::with_capacity(spec.m);
    let mut ranks = Vec::with_capacity(spec.m);
    for o in &omegas {
        let mut terms = rank_factor(o);
        if terms.is_empty() {
            terms.push((vec![0.0; o.nrows()], vec![0.0; o.ncols()]));
        }
        ranks.push(terms.len());
        out_a.push((0..o.nrows()).map(|a| terms.iter().map(|(f, _)| f[a]).collect()).collect());
        out_d.push((0..o.ncols()).map(|d| terms.iter().map(|(_, g)| g[d]).collect()).collect());
    }
    let attacker =
        KnapsackSpec { bounds: spec.caps_a.clone(), costs: spec.costs_a.clone(), budget: spec.budget_a, outputs: out_a };
    let defender =
        KnapsackSpec { bounds: spec.caps_d.clone(), costs: spec.costs_d.clone(), budget: spec.budget_d, outputs: out_d };
    let a: SimpleMatrixOracle = KnapsackOracle::new(attacker.clone())?.into();
    let d: SimpleMatrixOracle = KnapsackOracle::new(defender.clone())?.into();
    let sp = BilinearSpSpec::new(a, d, Offset::Zero, Offset::Zero)?;
    Ok(BlottoGame { attacker, defender, ranks, sp })
}

/// Result of a Blotto run. Atom indices are pure strategies: unit counts
/// per battlefield.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlottoReport {
    pub attacker_atoms: Vec<Atom>,
    pub defender_atoms: Vec<Atom>,
    /// Midpoint of the best certified value bracket.
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    /// Exact saddle-point gap of the reported mixed strategies.
    pub gap: f64,
    /// Certified residual bound on that gap.
    pub gap_bound: f64,
    pub steps: usize,
    pub wall_time: f64,
    /// Numbers of Attacker and Defender pure strategies.
    pub dims: (BigUint, BigUint),
    pub k: usize,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub history: Vec<HistoryRecord>,
    #[serde(skip)]
    pub protocol: Option<ExecutionProtocol>,
    #[serde(skip)]
    pub certificate: Option<AccuracyCertificate>,
}

pub fn solve_blotto(spec: &BlottoSpec, kind: SolverKind, config: &SolverConfig) -> Result<BlottoReport> {
    solve_blotto_with(spec, kind, config, &mut |_| Ok(()))
}

/// Builds the factored game and solves it by decomposition.
pub fn solve_blotto_with(
    spec: &BlottoSpec,
    kind: SolverKind,
    config: &SolverConfig,
    observer: &mut dyn FnMut(&SpRound) -> Result<()>,
) -> Result<BlottoReport> {
    let start = Instant::now();
    let game = build_blotto(spec)?;
    let dims = (game.sp.a().count_columns(), game.sp.d().count_columns());
    let k = game.k();
    let master = build_master_example2(game.sp)?;
    let out = solve_sp_with(&master, kind, config, observer)?;
    let sol = out.solution;
    for a in &sol.z_atoms {
        debug_assert!(game.attacker.is_feasible(&a.index));
    }
    for d in &sol.w_atoms {
        debug_assert!(game.defender.is_feasible(&d.index));
    }
    Ok(BlottoReport {
        attacker_atoms: sol.z_atoms,
        defender_atoms: sol.w_atoms,
        value: sol.value_estimate,
        lower: sol.lower,
        upper: sol.upper,
        gap: sol.gap_exact.unwrap_or(f64::INFINITY),
        gap_bound: sol.gap_bound,
        steps: out.steps,
        wall_time: start.elapsed().as_secs_f64(),
        dims,
        k,
        status: out.status,
        seed: spec.seed(),
        history: out.history,
        protocol: Some(out.protocol),
        certificate: Some(out.certificate),
    })
}
