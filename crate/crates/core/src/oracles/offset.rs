use super::{ColumnHit, Direction, SimpleMatrix, SimpleMatrixOracle};
use crate::error::{check_dim, check_finite, Error, Result};
use crate::linalg::dot;

/// Largest column count for which explicit offsets are accepted.
pub const MAX_MATERIALIZED: usize = 100_000;

/// A column oracle for `offset_j + <x, column_j>`.
///
/// With no offset this is the plain oracle. An explicit offset cannot be
/// folded into an implicit column search, so the columns are materialized
/// (at most [`MAX_MATERIALIZED`] of them) and scanned.
#[derive(Clone, Debug, PartialEq)]
pub struct OffsetOracle {
    oracle: SimpleMatrixOracle,
    offset: Option<Vec<f64>>,
    columns: Vec<(Vec<usize>, Vec<f64>)>,
}

impl OffsetOracle {
    pub fn new(oracle: SimpleMatrixOracle, offset: Option<Vec<f64>>) -> Result<Self> {
        match offset {
            None => Ok(OffsetOracle { oracle, offset: None, columns: Vec::new() }),
            Some(v) => {
                check_finite(&v, "offset")?;
                let columns = oracle.columns(MAX_MATERIALIZED).map_err(|_| {
                    Error::InvalidSpec(format!("explicit offsets need at most {MAX_MATERIALIZED} columns"))
                })?;
                check_dim(columns.len(), v.len())?;
                Ok(OffsetOracle { oracle, offset: Some(v), columns })
            }
        }
    }

    pub fn oracle(&self) -> &SimpleMatrixOracle {
        &self.oracle
    }

    pub fn offset(&self) -> Option<&[f64]> {
        self.offset.as_deref()
    }

    /// Extremal column of `offset_j + <x, column_j>`. Returns the hit, whose
    /// `value` is the inner product alone, and the offset entry.
    pub fn extreme(&self, x: &[f64], dir: Direction) -> Result<(ColumnHit, f64)> {
        let Some(off) = &self.offset else {
            return Ok((self.oracle.col_extreme(x, dir)?, 0.0));
        };
        check_dim(self.oracle.rows(), x.len())?;
        check_finite(x, "column query")?;
        let mut best: Option<(usize, f64)> = None;
        for (j, (_, col)) in self.columns.iter().enumerate() {
            let v = off[j] + dot(x, col);
            if best.is_none_or(|(_, b)| dir.improves(v, b)) {
                best = Some((j, v));
            }
        }
        let (j, _) = best.expect("nonempty matrix");
        let (index, column) = self.columns[j].clone();
        let value = dot(x, &column);
        Ok((ColumnHit { index, column, value }, off[j]))
    }

    /// Offset entry of a column (zero without offset).
    pub fn offset_at(&self, index: &[usize]) -> Result<f64> {
        let Some(off) = &self.offset else { return Ok(0.0) };
        let pos = self
            .columns
            .binary_search_by(|(i, _)| i.as_slice().cmp(index))
            .map_err(|_| Error::InvalidIndex(index.to_vec()))?;
        Ok(off[pos])
    }
}
