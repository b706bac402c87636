//! Compressed sparse row storage shared by graphs, walk matrices and feature
//! matrices.
//!
//! Every multiply routine takes a [`FlopCounter`] and charges one FLOP per
//! scalar multiplication.

use nalgebra::DMatrix;

use crate::bench::FlopCounter;
use crate::error::{GrfError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    /// Builds a matrix from raw CSR arrays. Column indices must be strictly
    /// increasing within each row.
    pub fn from_raw(
        nrows: usize,
        ncols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if indptr.len() != nrows + 1 {
            return Err(GrfError::DimensionMismatch { expected: nrows + 1, actual: indptr.len() });
        }
        if indices.len() != values.len() || *indptr.last().unwrap() != indices.len() {
            return Err(GrfError::DimensionMismatch { expected: indices.len(), actual: values.len() });
        }
        for r in 0..nrows {
            if indptr[r] > indptr[r + 1] {
                return Err(GrfError::Unsupported("row pointers must be nondecreasing".into()));
            }
            let row = &indices[indptr[r]..indptr[r + 1]];
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(GrfError::Unsupported(format!("row {r} is not sorted")));
            }
            if let Some(&c) = row.last() {
                if c >= ncols {
                    return Err(GrfError::NodeOutOfRange { node: c, n: ncols });
                }
            }
        }
        Ok(Self { nrows, ncols, indptr, indices, values })
    }

    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted = triplets.to_vec();
        for &(r, c, _) in &sorted {
            if r >= nrows {
                return Err(GrfError::NodeOutOfRange { node: r, n: nrows });
            }
            if c >= ncols {
                return Err(GrfError::NodeOutOfRange { node: c, n: ncols });
            }
        }
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            indptr[r + 1] += 1;
            indices.push(c);
            values.push(v);
            last = Some((r, c));
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Ok(Self { nrows, ncols, indptr, indices, values })
    }

    /// Builds a matrix from per-row sorted sparse vectors.
    pub fn from_rows(ncols: usize, rows: impl IntoIterator<Item = Vec<(usize, f64)>>) -> Self {
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for row in rows {
            for (c, v) in row {
                debug_assert!(c < ncols);
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Self { nrows: indptr.len() - 1, ncols, indptr, indices, values }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let rows = (0..m.nrows()).map(|r| {
            (0..m.ncols()).filter(|&c| m[(r, c)] != 0.0).map(|c| (c, m[(r, c)])).collect()
        });
        Self::from_rows(m.ncols(), rows)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
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

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.indptr[r]..self.indptr[r + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn scaled(mut self, factor: f64, flops: &mut FlopCounter) -> Self {
        for v in &mut self.values {
            *v *= factor;
        }
        flops.add(self.values.len() as u64);
        self
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for (r, c, v) in self.triplets() {
            let slot = next[c];
            indices[slot] = r;
            values[slot] = v;
            next[c] += 1;
        }
        Self { nrows: self.ncols, ncols: self.nrows, indptr: counts, indices, values }
    }

    pub fn is_symmetric(&self) -> Result<()> {
        if self.nrows != self.ncols {
            return Err(GrfError::DimensionMismatch { expected: self.nrows, actual: self.ncols });
        }
        for (r, c, v) in self.triplets() {
            if self.get(c, r) != v {
                return Err(GrfError::NotSymmetric { row: r, col: c });
            }
        }
        Ok(())
    }

    /// `y = A x`
    pub fn matvec(&self, x: &[f64], flops: &mut FlopCounter) -> Result<Vec<f64>> {
        if x.len() != self.ncols {
            return Err(GrfError::DimensionMismatch { expected: self.ncols, actual: x.len() });
        }
        let y = (0..self.nrows)
            .map(|r| {
                let (cols, vals) = self.row(r);
                cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
            })
            .collect();
        flops.add(self.nnz() as u64);
        Ok(y)
    }

    /// `y = Aᵀ x`
    pub fn matvec_transposed(&self, x: &[f64], flops: &mut FlopCounter) -> Result<Vec<f64>> {
        if x.len() != self.nrows {
            return Err(GrfError::DimensionMismatch { expected: self.nrows, actual: x.len() });
        }
        let mut y = vec![0.0; self.ncols];
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                // skipped rows are still charged below; the count is nnz
                continue;
            }
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                y[c] += v * xr;
            }
        }
        flops.add(self.nnz() as u64);
        Ok(y)
    }

    /// Sparse product `self · other` using a dense row accumulator.
    pub fn matmul(&self, other: &CsrMatrix, flops: &mut FlopCounter) -> Result<CsrMatrix> {
        if self.ncols != other.nrows {
            return Err(GrfError::DimensionMismatch { expected: self.ncols, actual: other.nrows });
        }
        let mut acc = vec![0.0; other.ncols];
        let mut touched = vec![false; other.ncols];
        let mut pattern = Vec::new();
        let mut rows = Vec::with_capacity(self.nrows);
        let mut count = 0u64;
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&k, &a) in cols.iter().zip(vals) {
                let (ocols, ovals) = other.row(k);
                count += ocols.len() as u64;
                for (&c, &b) in ocols.iter().zip(ovals) {
                    if !touched[c] {
                        touched[c] = true;
                        pattern.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            pattern.sort_unstable();
            let row: Vec<(usize, f64)> = pattern.iter().map(|&c| (c, acc[c])).collect();
            for &c in &pattern {
                acc[c] = 0.0;
                touched[c] = false;
            }
            pattern.clear();
            rows.push(row);
        }
        flops.add(count);
        Ok(CsrMatrix::from_rows(other.ncols, rows))
    }

    /// Dense product `self · other`.
    pub fn mul_dense(&self, other: &DMatrix<f64>, flops: &mut FlopCounter) -> Result<DMatrix<f64>> {
        if self.ncols != other.nrows() {
            return Err(GrfError::DimensionMismatch { expected: self.ncols, actual: other.nrows() });
        }
        let k = other.ncols();
        let mut out = DMatrix::zeros(self.nrows, k);
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                for j in 0..k {
                    out[(r, j)] += v * other[(c, j)];
                }
            }
        }
        flops.add((self.nnz() * k) as u64);
        Ok(out)
    }

    /// Horizontal concatenation `[self other]`.
    pub fn hstack(&self, other: &CsrMatrix) -> Result<CsrMatrix> {
        if self.nrows != other.nrows {
            return Err(GrfError::DimensionMismatch { expected: self.nrows, actual: other.nrows });
        }
        let rows = (0..self.nrows).map(|r| {
            let (ac, av) = self.row(r);
            let (bc, bv) = other.row(r);
            ac.iter()
                .zip(av)
                .map(|(&c, &v)| (c, v))
                .chain(bc.iter().zip(bv).map(|(&c, &v)| (c + self.ncols, v)))
                .collect()
        });
        Ok(CsrMatrix::from_rows(self.ncols + other.ncols, rows))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    /// Largest absolute row sum, `‖A‖_∞`.
    pub fn inf_norm(&self) -> f64 {
        (0..self.nrows)
            .map(|r| self.row(r).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CsrMatrix {
        CsrMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0), (0, 2, 1.0)]).unwrap()
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = sample();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 2), 3.0);
        assert_eq!(m.get(1, 0), 0.0);
    }

    #[test]
    fn transpose_and_matvecs_agree() {
        let m = sample();
        let mut f = FlopCounter::default();
        let x = [1.0, -1.0];
        let a = m.matvec_transposed(&x, &mut f).unwrap();
        let b = m.transpose().matvec(&x, &mut f).unwrap();
        assert_eq!(a, b);
        assert_eq!(f.count(), 6);
    }

    #[test]
    fn matmul_matches_dense() {
        let a = sample();
        let b = a.transpose();
        let mut f = FlopCounter::default();
        let p = a.matmul(&b, &mut f).unwrap().to_dense();
        let q = a.to_dense() * b.to_dense();
        assert_eq!(p, q);
    }

    #[test]
    fn from_raw_rejects_unsorted_rows() {
        assert!(CsrMatrix::from_raw(1, 3, vec![0, 2], vec![2, 1], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn hstack_offsets_columns() {
        let a = sample();
        let h = a.hstack(&a).unwrap();
        assert_eq!(h.ncols(), 6);
        assert_eq!(h.get(0, 5), 3.0);
    }

    #[test]
    fn matvec_dimension_mismatch() {
        let mut f = FlopCounter::default();
        assert!(matches!(
            sample().matvec(&[1.0], &mut f),
            Err(GrfError::DimensionMismatch { expected: 3, actual: 1 })
        ));
    }
}
