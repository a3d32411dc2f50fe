//! Linear minimization oracles and "simple matrix" column oracles.
//!
//! A simple matrix is a `K × N` matrix, possibly with astronomically many
//! columns, for which the column maximizing or minimizing `<x, column>` can be
//! found quickly. Three kinds are provided: dense matrices, knapsack-generated
//! matrices and matrices generated by a finite-state dynamic programming
//! system. Column indices are vectors of integers: a single column number for
//! dense matrices, an action sequence otherwise.

mod dense;
mod dp;
mod knapsack;
mod offset;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

pub use dense::DenseMatrix;
pub use dp::{bellman_backward, bellman_forward, BellmanTables, DpAction, DpStage, DpSystem};
pub use knapsack::{dp_from_knapsack, KnapsackOracle, KnapsackSpec};
pub use offset::{OffsetOracle, MAX_MATERIALIZED};

pub use crate::domain::DomainDescriptor as LmoSet;
use crate::error::Result;
use crate::par::{self, Mode};

/// Linear minimization over a standard set.
pub fn lmo_argmin(set: &LmoSet, c: &[f64]) -> Result<(Vec<f64>, f64)> {
    set.lmo_argmin(c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Max,
    Min,
}

impl Direction {
    /// True when `candidate` strictly improves on `incumbent`.
    #[inline]
    pub fn improves(self, candidate: f64, incumbent: f64) -> bool {
        match self {
            Direction::Max => candidate > incumbent,
            Direction::Min => candidate < incumbent,
        }
    }

    #[inline]
    pub fn worst(self) -> f64 {
        match self {
            Direction::Max => f64::NEG_INFINITY,
            Direction::Min => f64::INFINITY,
        }
    }
}

/// A column found by an extremal search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnHit {
    pub index: Vec<usize>,
    pub column: Vec<f64>,
    pub value: f64,
}

/// Column oracle interface shared by every matrix kind.
pub trait SimpleMatrix: Send + Sync {
    /// Number of rows `K`.
    fn rows(&self) -> usize;

    /// Exact number of columns.
    fn count_columns(&self) -> BigUint;

    /// Column extremizing `<x, column>`; ties go to the lexicographically
    /// smallest index.
    fn col_extreme(&self, x: &[f64], dir: Direction) -> Result<ColumnHit>;

    /// Column with the given index.
    fn column(&self, index: &[usize]) -> Result<Vec<f64>>;

    /// All columns in lexicographic index order, failing if there are more
    /// than `limit` of them.
    fn columns(&self, limit: usize) -> Result<Vec<(Vec<usize>, Vec<f64>)>>;

    /// Upper bound on the Euclidean norm of any column.
    fn column_norm_bound(&self) -> f64;

    fn col_extreme_batch(&self, queries: &[Vec<f64>], dir: Direction, mode: Mode) -> Result<Vec<ColumnHit>> {
        par::map_slice(queries, mode, |x| self.col_extreme(x, dir)).into_iter().collect()
    }
}

/// The three supported simple-matrix kinds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimpleMatrixOracle {
    Dense(DenseMatrix),
    Knapsack(KnapsackOracle),
    Dp(DpSystem),
}

impl SimpleMatrixOracle {
    fn inner(&self) -> &dyn SimpleMatrix {
        match self {
            SimpleMatrixOracle::Dense(m) => m,
            SimpleMatrixOracle::Knapsack(k) => k,
            SimpleMatrixOracle::Dp(d) => d,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SimpleMatrixOracle::Dense(_) => "dense",
            SimpleMatrixOracle::Knapsack(_) => "knapsack",
            SimpleMatrixOracle::Dp(_) => "dp",
        }
    }

    pub fn as_dense(&self) -> Option<&DenseMatrix> {
        match self {
            SimpleMatrixOracle::Dense(m) => Some(m),
            _ => None,
        }
    }

    /// Column count as a machine integer when it fits under `limit`.
    pub fn small_count(&self, limit: usize) -> Option<usize> {
        let c = self.count_columns();
        usize::try_from(&c).ok().filter(|&n| n <= limit)
    }
}

impl From<DenseMatrix> for SimpleMatrixOracle {
    fn from(m: DenseMatrix) -> Self {
        SimpleMatrixOracle::Dense(m)
    }
}

impl From<KnapsackOracle> for SimpleMatrixOracle {
    fn from(k: KnapsackOracle) -> Self {
        SimpleMatrixOracle::Knapsack(k)
    }
}

impl From<DpSystem> for SimpleMatrixOracle {
    fn from(d: DpSystem) -> Self {
        SimpleMatrixOracle::Dp(d)
    }
}

impl SimpleMatrix for SimpleMatrixOracle {
    fn rows(&self) -> usize {
        self.inner().rows()
    }
    fn count_columns(&self) -> BigUint {
        self.inner().count_columns()
    }
    fn col_extreme(&self, x: &[f64], dir: Direction) -> Result<ColumnHit> {
        self.inner().col_extreme(x, dir)
    }
    fn column(&self, index: &[usize]) -> Result<Vec<f64>> {
        self.inner().column(index)
    }
    fn columns(&self, limit: usize) -> Result<Vec<(Vec<usize>, Vec<f64>)>> {
        self.inner().columns(limit)
    }
    fn column_norm_bound(&self) -> f64 {
        self.inner().column_norm_bound()
    }
}

/// Exact column count of an oracle.
pub fn count_columns(oracle: &SimpleMatrixOracle) -> BigUint {
    oracle.count_columns()
}

/// Brute-force extremal column by enumeration; the reference the fast oracles
/// are tested against.
pub fn brute_force_extreme(oracle: &dyn SimpleMatrix, x: &[f64], dir: Direction, limit: usize) -> Result<ColumnHit> {
    crate::error::check_dim(oracle.rows(), x.len())?;
    let mut best: Option<ColumnHit> = None;
    for (index, column) in oracle.columns(limit)? {
        let value = crate::linalg::dot(x, &column);
        if best.as_ref().is_none_or(|b| dir.improves(value, b.value)) {
            best = Some(ColumnHit { index, column, value });
        }
    }
    best.ok_or(crate::error::Error::InvalidSpec("matrix has no columns".into()))
}
