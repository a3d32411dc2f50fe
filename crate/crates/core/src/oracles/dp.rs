//! Matrices generated by finite-state dynamic programming systems.
//!
//! A system has `m` stages. Stage `s` has a finite state set, each state a
//! nonempty list of actions, and each action a successor state in stage
//! `s + 1` together with an output vector in `R^{r_s}`. A trajectory picks one
//! initial state and then an action at every stage; its column is the
//! concatenation of the outputs it emits. Extremal columns are found by the
//! backward Bellman recurrence followed by a forward pass.

use num_bigint::BigUint;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::{ColumnHit, Direction, SimpleMatrix};
use crate::error::{check_dim, check_finite, Error, Result};
use crate::linalg::{dot, norm};
use crate::par;

/// States per stage above which the Bellman sweep goes parallel.
const PAR_STATES: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DpAction {
    pub label: usize,
    pub next: usize,
    /// Row of the stage's output table.
    pub output: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpStage {
    pub outputs: Vec<Vec<f64>>,
    pub states: Vec<Vec<DpAction>>,
}

impl DpStage {
    pub fn block_len(&self) -> usize {
        self.outputs.first().map_or(0, Vec::len)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDp", into = "RawDp")]
pub struct DpSystem {
    stages: Vec<DpStage>,
    initial: Vec<usize>,
    offsets: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawDp {
    stages: Vec<DpStage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial: Option<Vec<usize>>,
}

impl TryFrom<RawDp> for DpSystem {
    type Error = Error;
    fn try_from(raw: RawDp) -> Result<Self> {
        let initial = raw.initial.unwrap_or_else(|| vec![0]);
        DpSystem::new(raw.stages, initial)
    }
}

impl From<DpSystem> for RawDp {
    fn from(d: DpSystem) -> Self {
        RawDp { stages: d.stages, initial: Some(d.initial) }
    }
}

impl DpSystem {
    /// Validates a system. Actions are sorted by label and initial states by
    /// index so that enumeration order is lexicographic.
    pub fn new(mut stages: Vec<DpStage>, mut initial: Vec<usize>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::InvalidSpec("dynamic programming system has no stages".into()));
        }
        initial.sort_unstable();
        initial.dedup();
        if initial.is_empty() || initial.iter().any(|&i| i >= stages[0].states.len()) {
            return Err(Error::InvalidSpec("initial states must be nonempty and valid".into()));
        }
        let m = stages.len();
        for s in 0..m {
            let next_states = if s + 1 < m { stages[s + 1].states.len() } else { 0 };
            let stage = &mut stages[s];
            let r = stage.block_len();
            if stage.outputs.iter().any(|o| o.len() != r) {
                return Err(Error::InvalidSpec(format!("stage {s}: outputs have unequal lengths")));
            }
            for o in &stage.outputs {
                check_finite(o, "stage outputs")?;
            }
            if stage.states.is_empty() {
                return Err(Error::InvalidSpec(format!("stage {s} has no states")));
            }
            for (xi, acts) in stage.states.iter_mut().enumerate() {
                if acts.is_empty() {
                    return Err(Error::InvalidSpec(format!("stage {s}, state {xi}: empty action set")));
                }
                acts.sort_by_key(|a| a.label);
                if acts.windows(2).any(|w| w[0].label == w[1].label) {
                    return Err(Error::InvalidSpec(format!("stage {s}, state {xi}: duplicate action label")));
                }
                for a in acts.iter_mut() {
                    if a.output >= stage.outputs.len() {
                        return Err(Error::InvalidSpec(format!("stage {s}, state {xi}: bad output row")));
                    }
                    if s + 1 < m {
                        if a.next >= next_states {
                            return Err(Error::InvalidSpec(format!(
                                "stage {s}, state {xi}: transition to missing state {}",
                                a.next
                            )));
                        }
                    } else {
                        a.next = 0;
                    }
                }
            }
        }
        let mut offsets = Vec::with_capacity(m + 1);
        let mut k = 0;
        for st in &stages {
            offsets.push(k);
            k += st.block_len();
        }
        offsets.push(k);
        Ok(DpSystem { stages, initial, offsets })
    }

    pub fn stages(&self) -> &[DpStage] {
        &self.stages
    }

    pub fn initial(&self) -> &[usize] {
        &self.initial
    }

    pub fn n_stages(&self) -> usize {
        self.stages.len()
    }
}

/// The state-machine view the Bellman routines run on. Implemented by
/// explicit systems and, without materializing actions, by knapsacks.
pub(crate) trait DpModel: Sync {
    fn n_stages(&self) -> usize;
    fn n_states(&self, s: usize) -> usize;
    fn initial(&self) -> &[usize];
    fn outputs(&self, s: usize) -> &[Vec<f64>];
    /// Offset of stage `s`'s block inside a column; entry `m` is `K`.
    fn offset(&self, s: usize) -> usize;
    fn n_actions(&self, s: usize, state: usize) -> usize;
    /// Action at position `pos` (positions follow ascending labels).
    fn action(&self, s: usize, state: usize, pos: usize) -> DpAction;
    /// Position of the action with the given label.
    fn find_label(&self, s: usize, state: usize, label: usize) -> Option<usize>;

    fn rows(&self) -> usize {
        self.offset(self.n_stages())
    }
}

impl DpModel for DpSystem {
    fn n_stages(&self) -> usize {
        self.stages.len()
    }
    fn n_states(&self, s: usize) -> usize {
        self.stages[s].states.len()
    }
    fn initial(&self) -> &[usize] {
        &self.initial
    }
    fn outputs(&self, s: usize) -> &[Vec<f64>] {
        &self.stages[s].outputs
    }
    fn offset(&self, s: usize) -> usize {
        self.offsets[s]
    }
    fn n_actions(&self, s: usize, state: usize) -> usize {
        self.stages[s].states[state].len()
    }
    fn action(&self, s: usize, state: usize, pos: usize) -> DpAction {
        self.stages[s].states[state][pos]
    }
    fn find_label(&self, s: usize, state: usize, label: usize) -> Option<usize> {
        self.stages[s].states[state].binary_search_by_key(&label, |a| a.label).ok()
    }
}

/// Optimal continuation values and one optimal action per state and stage.
#[derive(Clone, Debug, PartialEq)]
pub struct BellmanTables {
    pub direction: Direction,
    /// `values[s][ξ]`: best value of `Σ_{s' ≥ s} <x_{s'}, output>` from `ξ`.
    pub values: Vec<Vec<f64>>,
    /// `actions[s][ξ]`: label of the first optimal action.
    pub actions: Vec<Vec<usize>>,
    positions: Vec<Vec<usize>>,
}

pub(crate) fn backward<M: DpModel + ?Sized>(model: &M, x: &[f64], dir: Direction) -> Result<BellmanTables> {
    check_dim(model.rows(), x.len())?;
    check_finite(x, "column query")?;
    let m = model.n_stages();
    let mut values = vec![Vec::new(); m];
    let mut positions = vec![Vec::new(); m];
    let mut actions = vec![Vec::new(); m];
    for s in (0..m).rev() {
        let xs = &x[model.offset(s)..model.offset(s + 1)];
        let scores: Vec<f64> = model.outputs(s).iter().map(|o| dot(xs, o)).collect();
        let next = if s + 1 < m { Some(&values[s + 1]) } else { None };
        let sweep = |state: usize| -> Result<(f64, usize, usize)> {
            let na = model.n_actions(s, state);
            if na == 0 {
                return Err(Error::InvalidSpec(format!("stage {s}, state {state}: empty action set")));
            }
            let mut best = (dir.worst(), 0, 0);
            for pos in 0..na {
                let a = model.action(s, state, pos);
                let v = scores[a.output] + next.map_or(0.0, |n: &Vec<f64>| n[a.next]);
                if pos == 0 || dir.improves(v, best.0) {
                    best = (v, pos, a.label);
                }
            }
            Ok(best)
        };
        let row = par::map_range(model.n_states(s), PAR_STATES, sweep);
        let mut v = Vec::with_capacity(row.len());
        let mut p = Vec::with_capacity(row.len());
        let mut l = Vec::with_capacity(row.len());
        for r in row {
            let (val, pos, label) = r?;
            v.push(val);
            p.push(pos);
            l.push(label);
        }
        values[s] = v;
        positions[s] = p;
        actions[s] = l;
    }
    Ok(BellmanTables { direction: dir, values, actions, positions })
}

/// Forward pass: the optimal trajectory as `(start state, action labels)`.
pub(crate) fn forward<M: DpModel + ?Sized>(model: &M, tables: &BellmanTables) -> Result<(usize, Vec<usize>)> {
    let m = model.n_stages();
    let bad = || Error::InvalidSpec("Bellman tables do not match the system".into());
    if tables.values.len() != m || tables.positions.len() != m {
        return Err(bad());
    }
    let mut start = None;
    for &xi in model.initial() {
        let v = *tables.values[0].get(xi).ok_or_else(bad)?;
        if start.is_none_or(|(_, b)| tables.direction.improves(v, b)) {
            start = Some((xi, v));
        }
    }
    let (start, _) = start.ok_or_else(bad)?;
    let mut state = start;
    let mut labels = Vec::with_capacity(m);
    for s in 0..m {
        if tables.positions[s].len() != model.n_states(s) {
            return Err(bad());
        }
        let pos = tables.positions[s][state];
        if pos >= model.n_actions(s, state) {
            return Err(bad());
        }
        let a = model.action(s, state, pos);
        labels.push(a.label);
        state = a.next;
    }
    Ok((start, labels))
}

fn index_of<M: DpModel + ?Sized>(model: &M, start: usize, labels: Vec<usize>) -> Vec<usize> {
    if model.initial().len() == 1 {
        labels
    } else {
        let mut idx = Vec::with_capacity(labels.len() + 1);
        idx.push(start);
        idx.extend(labels);
        idx
    }
}

pub(crate) fn trajectory_column<M: DpModel + ?Sized>(model: &M, index: &[usize]) -> Result<Vec<f64>> {
    let m = model.n_stages();
    let (mut state, labels) = if model.initial().len() == 1 {
        (model.initial()[0], index)
    } else {
        match index.split_first() {
            Some((&st, rest)) if model.initial().contains(&st) => (st, rest),
            _ => return Err(Error::InvalidIndex(index.to_vec())),
        }
    };
    if labels.len() != m {
        return Err(Error::InvalidIndex(index.to_vec()));
    }
    let mut col = Vec::with_capacity(model.rows());
    for (s, &label) in labels.iter().enumerate() {
        let pos = model.find_label(s, state, label).ok_or_else(|| Error::InvalidIndex(index.to_vec()))?;
        let a = model.action(s, state, pos);
        col.extend_from_slice(&model.outputs(s)[a.output]);
        state = a.next;
    }
    Ok(col)
}

pub(crate) fn extreme<M: DpModel + ?Sized>(model: &M, x: &[f64], dir: Direction) -> Result<ColumnHit> {
    let tables = backward(model, x, dir)?;
    let (start, labels) = forward(model, &tables)?;
    let index = index_of(model, start, labels);
    let column = trajectory_column(model, &index)?;
    let value = dot(x, &column);
    Ok(ColumnHit { index, column, value })
}

/// Number of trajectories, counted exactly.
pub(crate) fn count<M: DpModel + ?Sized>(model: &M) -> BigUint {
    let m = model.n_stages();
    let mut next: Vec<BigUint> = Vec::new();
    for s in (0..m).rev() {
        let cur: Vec<BigUint> = (0..model.n_states(s))
            .map(|state| {
                if s + 1 == m {
                    BigUint::from(model.n_actions(s, state))
                } else {
                    (0..model.n_actions(s, state)).map(|pos| &next[model.action(s, state, pos).next]).sum()
                }
            })
            .collect();
        next = cur;
    }
    model.initial().iter().map(|&i| next.get(i).cloned().unwrap_or_else(BigUint::zero)).sum()
}

/// Lexicographic enumeration of all trajectories.
pub(crate) fn enumerate<M: DpModel + ?Sized>(model: &M, limit: usize) -> Result<Vec<(Vec<usize>, Vec<f64>)>> {
    if count(model) > BigUint::from(limit) {
        return Err(Error::TooManyColumns { limit });
    }
    let m = model.n_stages();
    let mut out = Vec::new();
    let mut labels = Vec::with_capacity(m);
    let mut col = Vec::with_capacity(model.rows());
    fn rec<M: DpModel + ?Sized>(
        model: &M,
        s: usize,
        state: usize,
        start: usize,
        labels: &mut Vec<usize>,
        col: &mut Vec<f64>,
        out: &mut Vec<(Vec<usize>, Vec<f64>)>,
    ) {
        if s == model.n_stages() {
            out.push((index_of(model, start, labels.clone()), col.clone()));
            return;
        }
        for pos in 0..model.n_actions(s, state) {
            let a = model.action(s, state, pos);
            let mark = col.len();
            labels.push(a.label);
            col.extend_from_slice(&model.outputs(s)[a.output]);
            rec(model, s + 1, a.next, start, labels, col, out);
            labels.pop();
            col.truncate(mark);
        }
    }
    for &start in model.initial() {
        rec(model, 0, start, start, &mut labels, &mut col, &mut out);
    }
    Ok(out)
}

/// `√(Σ_s max_o ‖o‖²)` over each stage's output table.
pub(crate) fn norm_bound<M: DpModel + ?Sized>(model: &M) -> f64 {
    (0..model.n_stages())
        .map(|s| model.outputs(s).iter().map(|o| norm(o).powi(2)).fold(0.0, f64::max))
        .sum::<f64>()
        .sqrt()
}

/// Backward Bellman recurrence for a query `x` split into stage blocks.
pub fn bellman_backward(dp: &DpSystem, x: &[f64], dir: Direction) -> Result<BellmanTables> {
    backward(dp, x, dir)
}

/// Forward Bellman recurrence; returns the column index of the optimal
/// trajectory in the same form `col_extreme` uses.
pub fn bellman_forward(dp: &DpSystem, tables: &BellmanTables) -> Result<Vec<usize>> {
    let (start, labels) = forward(dp, tables)?;
    Ok(index_of(dp, start, labels))
}

impl SimpleMatrix for DpSystem {
    fn rows(&self) -> usize {
        DpModel::rows(self)
    }
    fn count_columns(&self) -> BigUint {
        count(self)
    }
    fn col_extreme(&self, x: &[f64], dir: Direction) -> Result<ColumnHit> {
        extreme(self, x, dir)
    }
    fn column(&self, index: &[usize]) -> Result<Vec<f64>> {
        trajectory_column(self, index)
    }
    fn columns(&self, limit: usize) -> Result<Vec<(Vec<usize>, Vec<f64>)>> {
        enumerate(self, limit)
    }
    fn column_norm_bound(&self) -> f64 {
        norm_bound(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_stage() -> DpSystem {
        let acts = (0..3).map(|i| DpAction { label: i, next: 0, output: i }).collect();
        DpSystem::new(vec![DpStage { outputs: vec![vec![1.0], vec![5.0], vec![2.0]], states: vec![acts] }], vec![0])
            .unwrap()
    }

    #[test]
    fn single_stage_picks_largest_output() {
        let dp = single_stage();
        let t = bellman_backward(&dp, &[1.0], Direction::Max).unwrap();
        assert_eq!(t.values[0][0], 5.0);
        assert_eq!(t.actions[0][0], 1);
        assert_eq!(bellman_forward(&dp, &t).unwrap(), vec![1]);
        assert_eq!(dp.count_columns(), BigUint::from(3u32));
    }

    #[test]
    fn zero_query_takes_first_action() {
        let dp = single_stage();
        let t = bellman_backward(&dp, &[0.0], Direction::Max).unwrap();
        assert_eq!(t.values[0][0], 0.0);
        assert_eq!(bellman_forward(&dp, &t).unwrap(), vec![0]);
    }

    #[test]
    fn multiple_initial_states_prefix_index() {
        let stage0 = DpStage {
            outputs: vec![vec![0.0], vec![1.0]],
            states: vec![
                vec![DpAction { label: 0, next: 0, output: 0 }],
                vec![DpAction { label: 0, next: 0, output: 1 }],
            ],
        };
        let dp = DpSystem::new(vec![stage0], vec![1, 0]).unwrap();
        let hit = dp.col_extreme(&[1.0], Direction::Max).unwrap();
        assert_eq!(hit.index, vec![1, 0]);
        assert_eq!(dp.column(&[0, 0]).unwrap(), vec![0.0]);
        assert_eq!(dp.columns(10).unwrap().len(), 2);
    }

    #[test]
    fn rejects_malformed_systems() {
        let bad_next = DpStage { outputs: vec![vec![0.0]], states: vec![vec![DpAction { label: 0, next: 3, output: 0 }]] };
        let last = DpStage { outputs: vec![vec![0.0]], states: vec![vec![DpAction { label: 0, next: 0, output: 0 }]] };
        assert!(DpSystem::new(vec![bad_next, last.clone()], vec![0]).is_err());
        let empty = DpStage { outputs: vec![vec![0.0]], states: vec![vec![]] };
        assert!(DpSystem::new(vec![empty], vec![0]).is_err());
        assert!(DpSystem::new(vec![last], vec![2]).is_err());
    }

    #[test]
    fn json_loading_sorts_actions() {
        let json = r#"{"stages":[{"outputs":[[1.0],[2.0]],"states":[[{"label":1,"next":0,"output":1},{"label":0,"next":0,"output":0}]]}]}"#;
        let dp: DpSystem = serde_json::from_str(json).unwrap();
        assert_eq!(dp.stages()[0].states[0][0].label, 0);
        assert_eq!(dp.col_extreme(&[-1.0], Direction::Max).unwrap().index, vec![0]);
    }
}
