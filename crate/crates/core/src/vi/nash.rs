//! Nash equilibria of games with pairwise bilinear interactions.
//!
//! Player `ℓ` picks `w_ℓ ∈ Δ_{N_ℓ}` and pays
//! `𝓛_ℓ(η) = Σ_{ℓ'} <D_ℓ w_ℓ, M^{ℓℓ'} D_{ℓ'} w_{ℓ'}> + <g_ℓ, w_ℓ>`.
//! With `M^{ℓℓ} = 0` and `M^{ℓℓ'} = -(M^{ℓ'ℓ})ᵀ` the game is zero-sum in
//! aggregate and its equilibria are the solutions of a skew VI with
//! `Q = ½ blockdiag(D_ℓ)` and `P` built from the blocks `M^{ℓℓ'} D_{ℓ'}`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::skew::{BlockAtoms, SkewBlock, SkewViSpec};
use crate::error::{check_dim, check_len, Error, Result};
use crate::linalg::{axpy, dot};
use crate::oracles::{DenseMatrix, Direction, OffsetOracle, SimpleMatrix, SimpleMatrixOracle};
use crate::par;
use crate::saddle::Atom;

/// Antisymmetry tolerance, entrywise.
pub const ANTISYMMETRY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NashPlayer {
    /// `D_ℓ`, an `m_ℓ × N_ℓ` simple matrix encoding the player's strategies.
    pub encoding: SimpleMatrixOracle,
    /// Linear term `g_ℓ` over the player's own strategies (absent means 0).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear: Option<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawNash {
    players: Vec<NashPlayer>,
    /// `loss[ℓ][ℓ']` is `M^{ℓℓ'}`; `null` stands for a zero block.
    loss: Vec<Vec<Option<DenseMatrix>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNash")]
pub struct NashSpec {
    players: Vec<NashPlayer>,
    loss: Vec<Vec<DenseMatrix>>,
    #[serde(skip)]
    sides: Vec<OffsetOracle>,
}

impl TryFrom<RawNash> for NashSpec {
    type Error = Error;
    fn try_from(raw: RawNash) -> Result<Self> {
        let dims: Vec<usize> = raw.players.iter().map(|p| p.encoding.rows()).collect();
        check_len(dims.len(), raw.loss.len())?;
        let mut loss = Vec::with_capacity(dims.len());
        for (l, row) in raw.loss.into_iter().enumerate() {
            check_len(dims.len(), row.len())?;
            loss.push(
                row.into_iter()
                    .enumerate()
                    .map(|(lp, m)| m.unwrap_or_else(|| DenseMatrix::zeros(dims[l], dims[lp])))
                    .collect(),
            );
        }
        NashSpec::new(raw.players, loss)
    }
}

impl NashSpec {
    /// Validates shapes and the antisymmetry identities.
    pub fn new(players: Vec<NashPlayer>, loss: Vec<Vec<DenseMatrix>>) -> Result<Self> {
        let l = players.len();
        if l == 0 {
            return Err(Error::InvalidSpec("a game needs at least one player".into()));
        }
        check_len(l, loss.len())?;
        let dims: Vec<usize> = players.iter().map(|p| p.encoding.rows()).collect();
        for (a, row) in loss.iter().enumerate() {
            check_len(l, row.len())?;
            for (b, m) in row.iter().enumerate() {
                check_dim(dims[a], m.nrows())?;
                check_dim(dims[b], m.ncols())?;
            }
        }
        for a in 0..l {
            for b in 0..=a {
                for i in 0..dims[a] {
                    for j in 0..dims[b] {
                        let d = (loss[a][b].get(i, j) + loss[b][a].get(j, i)).abs();
                        if !(d <= ANTISYMMETRY_TOL) {
                            return Err(Error::InvalidSpec(format!(
                                "M^{{{a}{b}}} + (M^{{{b}{a}}})ᵀ is {d} at ({i}, {j})"
                            )));
                        }
                    }
                }
            }
        }
        let sides = players
            .iter()
            .map(|p| OffsetOracle::new(p.encoding.clone(), p.linear.clone()))
            .collect::<Result<_>>()?;
        Ok(NashSpec { players, loss, sides })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_json_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn players(&self) -> &[NashPlayer] {
        &self.players
    }

    /// `M^{ℓℓ'}`.
    pub fn loss(&self, l: usize, lp: usize) -> &DenseMatrix {
        &self.loss[l][lp]
    }

    /// Row offsets of the players' blocks in `R^K`, ending with `K`.
    pub fn offsets(&self) -> Vec<usize> {
        let mut out = vec![0];
        for p in &self.players {
            out.push(out.last().unwrap() + p.encoding.rows());
        }
        out
    }

    /// `D_ℓ w_ℓ` for atoms of player `ℓ`.
    fn image(&self, l: usize, atoms: &[Atom]) -> Result<(Vec<f64>, f64)> {
        let mut u = vec![0.0; self.players[l].encoding.rows()];
        let mut lin = 0.0;
        for a in atoms {
            let c = self.players[l].encoding.column(&a.index)?;
            axpy(&mut u, a.weight, &c);
            lin += a.weight * self.sides[l].offset_at(&a.index)?;
        }
        Ok((u, lin))
    }

    /// Each player's loss `𝓛_ℓ(η)`.
    pub fn losses(&self, eta: &[Vec<Atom>]) -> Result<Vec<f64>> {
        Ok(self.incentives_inner(eta)?.into_iter().map(|(loss, _)| loss).collect())
    }

    /// `(𝓛_ℓ(η), min_{w'_ℓ} 𝓛_ℓ(.., w'_ℓ, ..))` per player.
    fn incentives_inner(&self, eta: &[Vec<Atom>]) -> Result<Vec<(f64, f64)>> {
        let l = self.players.len();
        check_len(l, eta.len())?;
        let images = (0..l).map(|i| self.image(i, &eta[i])).collect::<Result<Vec<_>>>()?;
        par::map_range(l, 4, |i| {
            let mut y = vec![0.0; self.players[i].encoding.rows()];
            for (j, (u, _)) in images.iter().enumerate() {
                axpy(&mut y, 1.0, &self.loss[i][j].mul_vec(u));
            }
            let loss = dot(&y, &images[i].0) + images[i].1;
            let (hit, off) = self.sides[i].extreme(&y, Direction::Min)?;
            Ok((loss, hit.value + off))
        })
        .into_iter()
        .collect()
    }
}

/// `ε_Nash(η) = Σ_ℓ [𝓛_ℓ(η) - min_{w'_ℓ} 𝓛_ℓ(.., w'_ℓ, ..)]`, the total
/// incentive to deviate unilaterally.
pub fn eps_nash(spec: &NashSpec, eta: &BlockAtoms) -> Result<f64> {
    Ok(spec.incentives_inner(eta)?.into_iter().map(|(l, m)| l - m).sum())
}

/// The equivalent skew VI: `F(η) = 2QᵀPη + f` with `f_ℓ = g_ℓ`, whose weak
/// solutions are the Nash equilibria.
pub fn nash_to_skew(spec: &NashSpec) -> Result<SkewViSpec> {
    let offsets = spec.offsets();
    let k = *offsets.last().unwrap();
    let l = spec.players.len();
    let blocks = (0..l)
        .map(|i| {
            let loss_in = (0..l).map(|j| spec.loss[j][i].clone()).collect();
            SkewBlock::nash(i, offsets.clone(), loss_in, spec.players[i].encoding.clone(), spec.players[i].linear.clone())
        })
        .collect::<Result<_>>()?;
    SkewViSpec::new(k, blocks, None)
}
