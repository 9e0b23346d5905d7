//! Compressed sparse row storage.
//!
//! Rows are stored contiguously; column indices within a row are strictly
//! increasing, so there are never duplicate entries.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        SparseMatrix {
            n_rows,
            n_cols,
            indptr: vec![0; n_rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            n_rows: n,
            n_cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds a matrix from (row, col, value) triplets. Duplicates are summed;
    /// explicit zeros are kept so that patterns survive a round trip.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; n_rows + 1];
        for &(r, c, _) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(Error::DimensionMismatch(format!(
                    "entry ({r}, {c}) outside a {n_rows}x{n_cols} matrix"
                )));
            }
            counts[r + 1] += 1;
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        let mut next = counts.clone();
        for &(r, c, v) in triplets {
            cols[next[r]] = c;
            vals[next[r]] = v;
            next[r] += 1;
        }
        let mut indptr = Vec::with_capacity(n_rows + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        indptr.push(0);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for r in 0..n_rows {
            row.clear();
            row.extend((counts[r]..counts[r + 1]).map(|k| (cols[k], vals[k])));
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut v = 0.0;
                while k < row.len() && row[k].0 == c {
                    v += row[k].1;
                    k += 1;
                }
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Ok(SparseMatrix {
            n_rows,
            n_cols,
            indptr,
            indices,
            values,
        })
    }

    /// Sparse copy of a dense matrix, dropping exact zeros.
    pub fn from_dense(d: &Array2<f64>) -> Self {
        let mut t = Vec::new();
        for ((i, j), &v) in d.indexed_iter() {
            if v != 0.0 {
                t.push((i, j, v));
            }
        }
        Self::from_triplets(d.nrows(), d.ncols(), &t).expect("indices in range")
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterates over the stored entries of row `r` as (col, value).
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.indptr[r]..self.indptr[r + 1];
        self.indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..self.n_rows {
            out.extend(self.row(r).map(|(c, v)| (r, c, v)));
        }
        out
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.indptr[r]..self.indptr[r + 1];
        match self.indices[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut d = Array2::zeros((self.n_rows, self.n_cols));
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                d[[r, c]] += v;
            }
        }
        d
    }

    pub fn transpose(&self) -> SparseMatrix {
        let t: Vec<_> = self.triplets().into_iter().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.n_cols, self.n_rows, &t).expect("indices in range")
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// True when every stored value is exactly zero.
    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Sub-block with rows `r0..r1` and columns `c0..c1`.
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for r in r0..r1 {
            for (c, v) in self.row(r) {
                if c >= c0 && c < c1 {
                    t.push((r - r0, c - c0, v));
                }
            }
        }
        Self::from_triplets(r1 - r0, c1 - c0, &t).expect("indices in range")
    }

    /// Reorders rows and columns: result(i, j) = self(row_perm[i], col_perm[j]).
    pub fn permute(&self, row_perm: &[usize], col_perm: &[usize]) -> Result<SparseMatrix> {
        if row_perm.len() != self.n_rows || col_perm.len() != self.n_cols {
            return Err(Error::DimensionMismatch("permutation length".into()));
        }
        let inv_row = invert_permutation(row_perm)?;
        let inv_col = invert_permutation(col_perm)?;
        let t: Vec<_> = self
            .triplets()
            .into_iter()
            .map(|(r, c, v)| (inv_row[r], inv_col[c], v))
            .collect();
        Self::from_triplets(self.n_rows, self.n_cols, &t)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols, "mul_vec dimension");
        (0..self.n_rows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    pub fn mul_vec_c(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n_cols, "mul_vec dimension");
        (0..self.n_rows)
            .map(|r| self.row(r).map(|(c, v)| x[c] * v).sum())
            .collect()
    }

    /// Computes selfᵀ·x without forming the transpose.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_rows, "tr_mul_vec dimension");
        let mut y = vec![0.0; self.n_cols];
        for (r, &xr) in x.iter().enumerate() {
            for (c, v) in self.row(r) {
                y[c] += v * xr;
            }
        }
        y
    }

    pub fn mul_dense(&self, x: &Array2<f64>) -> Array2<f64> {
        assert_eq!(x.nrows(), self.n_cols, "mul_dense dimension");
        let mut y = Array2::zeros((self.n_rows, x.ncols()));
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                let xr = x.row(c);
                let mut yr = y.row_mut(r);
                yr.scaled_add(v, &xr);
            }
        }
        y
    }

    pub fn mul_dense_c(&self, x: &Array2<Complex64>) -> Array2<Complex64> {
        assert_eq!(x.nrows(), self.n_cols, "mul_dense dimension");
        let mut y = Array2::zeros((self.n_rows, x.ncols()));
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                let xr = x.row(c);
                let mut yr = y.row_mut(r);
                yr.scaled_add(Complex64::new(v, 0.0), &xr);
            }
        }
        y
    }

    /// Dense column `j` as a vector.
    pub fn column(&self, j: usize) -> Array1<f64> {
        let mut out = Array1::zeros(self.n_rows);
        for r in 0..self.n_rows {
            out[r] = self.get(r, j);
        }
        out
    }

    /// Entry-wise linear combination alpha·self + beta·other over the union pattern.
    pub fn lin_comb<T>(&self, alpha: T, other: &SparseMatrix, beta: T) -> Vec<(usize, usize, T)>
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
    {
        assert_eq!(self.shape(), other.shape());
        let mut out = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.n_rows {
            let mut a = self.row(r).peekable();
            let mut b = other.row(r).peekable();
            loop {
                match (a.peek().copied(), b.peek().copied()) {
                    (None, None) => break,
                    (Some((ca, va)), None) => {
                        out.push((r, ca, alpha * va));
                        a.next();
                    }
                    (None, Some((cb, vb))) => {
                        out.push((r, cb, beta * vb));
                        b.next();
                    }
                    (Some((ca, va)), Some((cb, vb))) => {
                        if ca < cb {
                            out.push((r, ca, alpha * va));
                            a.next();
                        } else if cb < ca {
                            out.push((r, cb, beta * vb));
                            b.next();
                        } else {
                            out.push((r, ca, alpha * va + beta * vb));
                            a.next();
                            b.next();
                        }
                    }
                }
            }
        }
        out
    }

    /// Stacks two matrices with equal column counts vertically.
    pub fn vstack(top: &SparseMatrix, bottom: &SparseMatrix) -> Result<SparseMatrix> {
        if top.n_cols != bottom.n_cols {
            return Err(Error::DimensionMismatch("vstack column counts".into()));
        }
        let mut t = top.triplets();
        t.extend(bottom.triplets().into_iter().map(|(r, c, v)| (r + top.n_rows, c, v)));
        Self::from_triplets(top.n_rows + bottom.n_rows, top.n_cols, &t)
    }

    /// Assembles a 2×2 block matrix; blocks must have consistent shapes.
    pub fn from_blocks(
        b11: &SparseMatrix,
        b12: &SparseMatrix,
        b21: &SparseMatrix,
        b22: &SparseMatrix,
    ) -> Result<SparseMatrix> {
        if b11.n_rows != b12.n_rows || b21.n_rows != b22.n_rows || b11.n_cols != b21.n_cols || b12.n_cols != b22.n_cols
        {
            return Err(Error::DimensionMismatch("block shapes".into()));
        }
        let (r1, c1) = b11.shape();
        let mut t = b11.triplets();
        t.extend(b12.triplets().into_iter().map(|(r, c, v)| (r, c + c1, v)));
        t.extend(b21.triplets().into_iter().map(|(r, c, v)| (r + r1, c, v)));
        t.extend(b22.triplets().into_iter().map(|(r, c, v)| (r + r1, c + c1, v)));
        Self::from_triplets(r1 + b21.n_rows, c1 + b12.n_cols, &t)
    }
}

pub fn invert_permutation(p: &[usize]) -> Result<Vec<usize>> {
    let mut inv = vec![usize::MAX; p.len()];
    for (i, &k) in p.iter().enumerate() {
        if k >= p.len() || inv[k] != usize::MAX {
            return Err(Error::DimensionMismatch("not a permutation".into()));
        }
        inv[k] = i;
    }
    Ok(inv)
}
