use std::io::Read;
use std::path::Path;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use super::{ColumnHit, Direction, SimpleMatrix};
use crate::error::{check_dim, check_finite, Error, Result};
use crate::linalg::{dot, norm};
use crate::par;

/// Below this many entries a column scan stays on one thread.
const PAR_ENTRIES: usize = 1 << 16;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidSpec("matrix must have at least one row and one column".into()));
        }
        check_dim(rows * cols, data.len())?;
        check_finite(&data, "matrix entries")?;
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidSpec("ragged matrix rows".into()));
        }
        Self::new(rows.len(), n, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        DenseMatrix { rows: n, cols: n, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Reads a headerless CSV file of numbers.
    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::InvalidSpec(format!("CSV line {}: {e}", line + 1)))?;
            rows.push(row);
        }
        Self::from_rows(&rows)
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            data.extend((0..self.rows).map(|i| self.get(i, j)));
        }
        DenseMatrix { rows: self.cols, cols: self.rows, data }
    }

    /// `self · x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        crate::linalg::mat_vec(&self.data, self.rows, self.cols, x)
    }

    /// `selfᵀ · y`.
    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        crate::linalg::mat_t_vec(&self.data, self.rows, self.cols, y)
    }

    /// `self · other`.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        check_dim(self.cols, other.rows)?;
        let mut data = vec![0.0; self.rows * other.cols];
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let out = &mut data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in out.iter_mut().zip(&other.data[k * other.cols..(k + 1) * other.cols]) {
                    *o += a * b;
                }
            }
        }
        Ok(DenseMatrix { rows: self.rows, cols: other.cols, data })
    }

    pub fn max_column_norm(&self) -> f64 {
        (0..self.cols).map(|j| norm(&self.col(j))).fold(0.0, f64::max)
    }
}

impl TryFrom<Vec<Vec<f64>>> for DenseMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        DenseMatrix::from_rows(&rows)
    }
}

impl From<DenseMatrix> for Vec<Vec<f64>> {
    fn from(m: DenseMatrix) -> Self {
        m.to_rows()
    }
}

impl SimpleMatrix for DenseMatrix {
    fn rows(&self) -> usize {
        self.rows
    }

    fn count_columns(&self) -> BigUint {
        BigUint::from(self.cols)
    }

    fn col_extreme(&self, x: &[f64], dir: Direction) -> Result<ColumnHit> {
        check_dim(self.rows, x.len())?;
        check_finite(x, "column query")?;
        let scores = if self.data.len() >= PAR_ENTRIES {
            par::map_range(self.cols, 2, |j| (0..self.rows).map(|i| x[i] * self.get(i, j)).sum::<f64>())
        } else {
            self.tr_mul_vec(x)
        };
        let mut best = 0;
        for (j, &s) in scores.iter().enumerate().skip(1) {
            if dir.improves(s, scores[best]) {
                best = j;
            }
        }
        let column = self.col(best);
        let value = dot(x, &column);
        Ok(ColumnHit { index: vec![best], column, value })
    }

    fn column(&self, index: &[usize]) -> Result<Vec<f64>> {
        match index {
            [j] if *j < self.cols => Ok(self.col(*j)),
            _ => Err(Error::InvalidIndex(index.to_vec())),
        }
    }

    fn columns(&self, limit: usize) -> Result<Vec<(Vec<usize>, Vec<f64>)>> {
        if self.cols > limit {
            return Err(Error::TooManyColumns { limit });
        }
        Ok((0..self.cols).map(|j| (vec![j], self.col(j))).collect())
    }

    fn column_norm_bound(&self) -> f64 {
        self.max_column_norm()
    }
}
