//! Compressed sparse row matrices.

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SparseError {
    #[error("row offsets must start at 0, be nondecreasing and end at nnz ({0})")]
    BadOffsets(String),
    #[error("column index {index} out of range for {cols} columns")]
    ColumnOutOfRange { index: usize, cols: usize },
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("array length mismatch: {0}")]
    Length(String),
}

/// CSR storage: `row_offsets[i]..row_offsets[i+1]` indexes the entries of row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn try_new(
        rows: usize,
        cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, SparseError> {
        if row_offsets.len() != rows + 1 {
            return Err(SparseError::Length(format!(
                "{} row offsets for {} rows",
                row_offsets.len(),
                rows
            )));
        }
        if col_indices.len() != values.len() {
            return Err(SparseError::Length(format!(
                "{} column indices vs {} values",
                col_indices.len(),
                values.len()
            )));
        }
        if row_offsets[0] != 0
            || row_offsets[rows] != values.len()
            || row_offsets.windows(2).any(|w| w[1] < w[0])
        {
            return Err(SparseError::BadOffsets(values.len().to_string()));
        }
        if let Some(&index) = col_indices.iter().find(|&&c| c >= cols) {
            return Err(SparseError::ColumnOutOfRange { index, cols });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(SparseError::NonFinite(pos));
        }
        Ok(Self { rows, cols, row_offsets, col_indices, values })
    }

    /// Build from per-row `(column, value)` lists. Duplicate columns within a row are summed.
    pub fn from_rows(cols: usize, rows: &[Vec<(usize, f64)>]) -> Result<Self, SparseError> {
        let mut row_offsets = Vec::with_capacity(rows.len() + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for row in rows {
            let mut sorted = row.clone();
            sorted.sort_by_key(|e| e.0);
            for (c, v) in sorted {
                if col_indices.len() > *row_offsets.last().unwrap() && col_indices.last() == Some(&c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_indices.push(c);
                    values.push(v);
                }
            }
            row_offsets.push(values.len());
        }
        Self::try_new(rows.len(), cols, row_offsets, col_indices, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        self.row(i).map(|(c, v)| v * x[c]).sum()
    }

    pub fn row_axpy(&self, i: usize, alpha: f64, out: &mut [f64]) {
        for (c, v) in self.row(i) {
            out[c] += alpha * v;
        }
    }

    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row_dot(i, x);
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.matvec_into(x, &mut out);
        out
    }

    pub fn transpose_matvec_into(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, ui) in u.iter().enumerate() {
            if *ui != 0.0 {
                self.row_axpy(i, *ui, out);
            }
        }
    }

    pub fn transpose_matvec(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        self.transpose_matvec_into(u, &mut out);
        out
    }

    /// Explicit CSR transpose (counting sort over columns).
    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for i in 0..self.cols {
            counts[i + 1] += counts[i];
        }
        let offsets = counts.clone();
        let mut next = counts;
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.rows {
            for (c, v) in self.row(i) {
                let slot = next[c];
                col_indices[slot] = i;
                values[slot] = v;
                next[c] += 1;
            }
        }
        CsrMatrix { rows: self.cols, cols: self.rows, row_offsets: offsets, col_indices, values }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (c, v) in self.row(i) {
                m[(i, c)] += v;
            }
        }
        m
    }

    /// Coordinate text export: one `row col value` line per stored entry.
    pub fn write_coordinate<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        for i in 0..self.rows {
            for (c, v) in self.row(i) {
                writeln!(w, "{} {} {:.16e}", i, c, v)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small() -> CsrMatrix {
        CsrMatrix::from_rows(4, &[vec![(0, 1.0), (3, 2.0)], vec![], vec![(1, -1.5), (1, 0.5), (2, 4.0)]]).unwrap()
    }

    #[test]
    fn duplicates_are_summed() {
        let m = small();
        assert_eq!(m.nnz(), 4);
        assert_eq!(m.to_dense()[(2, 1)], -1.0);
    }

    #[test]
    fn rejects_bad_offsets() {
        let err = CsrMatrix::try_new(2, 2, vec![0, 2, 1], vec![0, 1], vec![1.0, 1.0]).unwrap_err();
        assert!(matches!(err, SparseError::BadOffsets(_)));
        let err = CsrMatrix::try_new(1, 2, vec![0, 1], vec![5], vec![1.0]).unwrap_err();
        assert_eq!(err, SparseError::ColumnOutOfRange { index: 5, cols: 2 });
        let err = CsrMatrix::try_new(1, 2, vec![0, 1], vec![0], vec![f64::NAN]).unwrap_err();
        assert_eq!(err, SparseError::NonFinite(0));
    }

    #[test]
    fn matches_dense_reference() {
        let m = small();
        let d = m.to_dense();
        let x = [1.0, 2.0, -1.0, 0.5];
        let dense: Vec<f64> = (0..3).map(|i| (0..4).map(|j| d[(i, j)] * x[j]).sum()).collect();
        assert_eq!(m.matvec(&x), dense);
        assert_eq!(m.transpose().to_dense(), d.transpose());
    }

    proptest! {
        #[test]
        fn adjoint_identity(entries in proptest::collection::vec((0usize..6, 0usize..5, -3.0f64..3.0), 0..20),
                            x in proptest::collection::vec(-2.0f64..2.0, 5),
                            u in proptest::collection::vec(-2.0f64..2.0, 6)) {
            let mut rows = vec![Vec::new(); 6];
            for (r, c, v) in entries { rows[r].push((c, v)); }
            let m = CsrMatrix::from_rows(5, &rows).unwrap();
            let lhs: f64 = m.matvec(&x).iter().zip(&u).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.iter().zip(m.transpose_matvec(&u)).map(|(a, b)| a * b).sum();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
            prop_assert_eq!(m.transpose().matvec(&u), m.transpose_matvec(&u));
        }
    }
}
