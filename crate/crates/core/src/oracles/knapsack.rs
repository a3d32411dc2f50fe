//! Knapsack-generated matrices.
//!
//! Columns are indexed by integer vectors `p = (p_1, ..., p_m)` with
//! `0 ≤ p_s ≤ p̄_s` and `Σ h_s p_s ≤ H`; column `p` stacks the stage outputs
//! `f_1(p_1), ..., f_m(p_m)`. Column search runs the Bellman recurrence over
//! the remaining budget `0..=H` directly from the knapsack data, without
//! materializing the action lists.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use super::dp::{self, DpAction, DpModel, DpStage, DpSystem};
use super::{ColumnHit, Direction, SimpleMatrix};
use crate::error::{check_finite, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnapsackSpec {
    /// Per-stage caps `p̄_s`.
    pub bounds: Vec<usize>,
    /// Per-stage positive unit costs `h_s`.
    pub costs: Vec<usize>,
    pub budget: usize,
    /// `outputs[s][a]` is `f_s(a)` for `a = 0..=p̄_s`.
    pub outputs: Vec<Vec<Vec<f64>>>,
}

impl KnapsackSpec {
    pub fn validate(&self) -> Result<()> {
        let m = self.bounds.len();
        if m == 0 {
            return Err(Error::InvalidSpec("knapsack needs at least one stage".into()));
        }
        if self.costs.len() != m || self.outputs.len() != m {
            return Err(Error::InvalidSpec(format!(
                "knapsack has {m} bounds but {} costs and {} output tables",
                self.costs.len(),
                self.outputs.len()
            )));
        }
        for s in 0..m {
            if self.costs[s] == 0 {
                return Err(Error::InvalidSpec(format!("stage {s}: cost must be positive")));
            }
            let table = &self.outputs[s];
            if table.len() != self.bounds[s] + 1 {
                return Err(Error::InvalidSpec(format!(
                    "stage {s}: expected {} output rows, got {}",
                    self.bounds[s] + 1,
                    table.len()
                )));
            }
            let r = table[0].len();
            if table.iter().any(|o| o.len() != r) {
                return Err(Error::InvalidSpec(format!("stage {s}: outputs have unequal lengths")));
            }
            for o in table {
                check_finite(o, "knapsack outputs")?;
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.bounds.len()
    }

    /// `Σ_s r_s`.
    pub fn rows(&self) -> usize {
        self.outputs.iter().map(|t| t[0].len()).sum()
    }

    /// Whether an integer vector is a feasible pure strategy.
    pub fn is_feasible(&self, p: &[usize]) -> bool {
        p.len() == self.horizon()
            && p.iter().zip(&self.bounds).all(|(a, b)| a <= b)
            && p.iter().zip(&self.costs).map(|(a, h)| a * h).sum::<usize>() <= self.budget
    }
}

/// Column oracle over a validated knapsack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KnapsackSpec", into = "KnapsackSpec")]
pub struct KnapsackOracle {
    spec: KnapsackSpec,
    offsets: Vec<usize>,
    initial: [usize; 1],
}

impl KnapsackOracle {
    pub fn new(spec: KnapsackSpec) -> Result<Self> {
        spec.validate()?;
        let mut offsets = Vec::with_capacity(spec.horizon() + 1);
        let mut k = 0;
        for t in &spec.outputs {
            offsets.push(k);
            k += t[0].len();
        }
        offsets.push(k);
        let initial = [spec.budget];
        Ok(KnapsackOracle { spec, offsets, initial })
    }

    pub fn spec(&self) -> &KnapsackSpec {
        &self.spec
    }

    fn max_action(&self, s: usize, state: usize) -> usize {
        self.spec.bounds[s].min(state / self.spec.costs[s])
    }
}

impl TryFrom<KnapsackSpec> for KnapsackOracle {
    type Error = Error;
    fn try_from(spec: KnapsackSpec) -> Result<Self> {
        KnapsackOracle::new(spec)
    }
}

impl From<KnapsackOracle> for KnapsackSpec {
    fn from(k: KnapsackOracle) -> Self {
        k.spec
    }
}

impl DpModel for KnapsackOracle {
    fn n_stages(&self) -> usize {
        self.spec.horizon()
    }
    fn n_states(&self, _s: usize) -> usize {
        self.spec.budget + 1
    }
    fn initial(&self) -> &[usize] {
        &self.initial
    }
    fn outputs(&self, s: usize) -> &[Vec<f64>] {
        &self.spec.outputs[s]
    }
    fn offset(&self, s: usize) -> usize {
        self.offsets[s]
    }
    fn n_actions(&self, s: usize, state: usize) -> usize {
        self.max_action(s, state) + 1
    }
    fn action(&self, s: usize, state: usize, pos: usize) -> DpAction {
        DpAction { label: pos, next: state - pos * self.spec.costs[s], output: pos }
    }
    fn find_label(&self, s: usize, state: usize, label: usize) -> Option<usize> {
        (label <= self.max_action(s, state)).then_some(label)
    }
}

impl SimpleMatrix for KnapsackOracle {
    fn rows(&self) -> usize {
        DpModel::rows(self)
    }
    fn count_columns(&self) -> BigUint {
        dp::count(self)
    }
    fn col_extreme(&self, x: &[f64], dir: Direction) -> Result<ColumnHit> {
        dp::extreme(self, x, dir)
    }
    fn column(&self, index: &[usize]) -> Result<Vec<f64>> {
        dp::trajectory_column(self, index)
    }
    fn columns(&self, limit: usize) -> Result<Vec<(Vec<usize>, Vec<f64>)>> {
        dp::enumerate(self, limit)
    }
    fn column_norm_bound(&self) -> f64 {
        dp::norm_bound(self)
    }
}

/// The explicit dynamic programming system of a knapsack: states are the
/// remaining budget `0..=H` at every stage, the action `a` at budget `ξ` is
/// allowed when `a ≤ p̄_s` and `a·h_s ≤ ξ`, leads to `ξ - a·h_s` and emits
/// `f_s(a)`.
pub fn dp_from_knapsack(spec: &KnapsackSpec) -> Result<DpSystem> {
    let oracle = KnapsackOracle::new(spec.clone())?;
    let stages = (0..spec.horizon())
        .map(|s| DpStage {
            outputs: spec.outputs[s].clone(),
            states: (0..=spec.budget)
                .map(|xi| (0..oracle.n_actions(s, xi)).map(|pos| oracle.action(s, xi, pos)).collect())
                .collect(),
        })
        .collect();
    DpSystem::new(stages, vec![spec.budget])
}
