//! Dimensionality reduction for signature vectors: uniformly sampled anchor
//! nodes (applied while walking) and a Gaussian Johnson–Lindenstrauss
//! projection (applied to finished vectors).

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};

use crate::bench::FlopCounter;
use crate::error::{invalid, GrfError, Result};
use crate::rng;
use crate::sparse::CsrMatrix;
use crate::walk::SignatureVector;

/// Sorted, distinct node ids at which loads are recorded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnchorSet {
    nodes: Vec<usize>,
    n: usize,
}

impl AnchorSet {
    pub fn from_nodes(n: usize, mut nodes: Vec<usize>) -> Result<Self> {
        nodes.sort_unstable();
        nodes.dedup();
        if let Some(&bad) = nodes.iter().find(|&&v| v >= n) {
            return Err(GrfError::NodeOutOfRange { node: bad, n });
        }
        Ok(Self { nodes, n })
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn graph_size(&self) -> usize {
        self.n
    }
}

/// Uniform `k`-subset of `0..n` without repetition.
pub fn sample_anchors(n: usize, k: usize, seed: u64) -> Result<AnchorSet> {
    if k == 0 || k > n {
        return Err(invalid("k", format!("anchor count must lie in [1, {n}], got {k}")));
    }
    let mut rng = rng::stream(seed, &[rng::tag::ANCHORS]);
    let nodes = index::sample(&mut rng, n, k).into_vec();
    AnchorSet::from_nodes(n, nodes)
}

/// `(1/√K)·G` with `G` a `K×N` matrix of i.i.d. standard normals.
#[derive(Debug, Clone, PartialEq)]
pub struct JltProjection {
    gaussian: DMatrix<f64>,
    seed: u64,
}

impl JltProjection {
    pub fn new(k: usize, n: usize, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(invalid("k", "projection needs at least one row"));
        }
        let mut rng = rng::stream(seed, &[rng::tag::JLT]);
        // column-major fill: column c holds the coefficients applied to node c
        let gaussian = DMatrix::from_fn(k, n, |_, _| StandardNormal.sample(&mut rng));
        Ok(Self { gaussian, seed })
    }

    pub fn rows(&self) -> usize {
        self.gaussian.nrows()
    }

    pub fn cols(&self) -> usize {
        self.gaussian.ncols()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn gaussian(&self) -> &DMatrix<f64> {
        &self.gaussian
    }

    fn project_sparse(&self, entries: &[(usize, f64)], flops: &mut FlopCounter) -> DVector<f64> {
        let k = self.rows();
        let mut out = DVector::zeros(k);
        for &(c, v) in entries {
            out.axpy(v, &self.gaussian.column(c), 1.0);
        }
        let scale = 1.0 / (k as f64).sqrt();
        out *= scale;
        flops.add((entries.len() * k + k) as u64);
        out
    }
}

/// `(1/√K)·G·φ`, touching only the nonzero entries of `φ`.
pub fn apply_jlt(phi: &SignatureVector, projection: &JltProjection) -> Result<DVector<f64>> {
    if let Some(&(c, _)) = phi.entries.last() {
        if c >= projection.cols() {
            return Err(GrfError::DimensionMismatch { expected: projection.cols(), actual: c + 1 });
        }
    }
    Ok(projection.project_sparse(&phi.entries, &mut FlopCounter::default()))
}

/// Projects every row of a row-sparse feature matrix, giving a dense `N×K` factor.
pub fn project_rows(rows: &CsrMatrix, projection: &JltProjection, flops: &mut FlopCounter) -> Result<DMatrix<f64>> {
    if rows.ncols() != projection.cols() {
        return Err(GrfError::DimensionMismatch { expected: projection.cols(), actual: rows.ncols() });
    }
    let k = projection.rows();
    let mut out = DMatrix::zeros(rows.nrows(), k);
    for r in 0..rows.nrows() {
        let (cols, vals) = rows.row(r);
        let entries: Vec<(usize, f64)> = cols.iter().copied().zip(vals.iter().copied()).collect();
        let projected = projection.project_sparse(&entries, flops);
        out.row_mut(r).copy_from(&projected.transpose());
    }
    Ok(out)
}
