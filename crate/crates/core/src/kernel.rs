//! Unbiased low-rank estimators of the d-regularized Laplacian kernel
//! `(I + σ²L̃)^(-d)` built from pairs of feature matrices.
//!
//! With `U` from [`build_u_matrix`] and `λ = σ²+1`, scaling the signature
//! vectors by `1/λ` gives `C` with `E[C C'ᵀ] = (I + σ²L̃)⁻²`. For `d = 1` the
//! right factor becomes `D = (I + σ²L̃) C'`. Larger `d` is reached two powers
//! at a time by folding a fresh pair into the existing factors through a small
//! SVD.
//!
//! Estimates are kept as a [`DecompositionChain`]: a sum of scaled factor
//! products, consumed through matrix-vector products.

use nalgebra::{DMatrix, DVector, SVD};
use rayon::prelude::*;

use crate::bench::FlopCounter;
use crate::compression::{project_rows, sample_anchors, JltProjection};
use crate::error::{invalid, GrfError, Result};
use crate::graph::{build_u_matrix, Graph, WalkMatrix};
use crate::rng::{self, tag};
use crate::sparse::CsrMatrix;
use crate::walk::{compute_feature_matrix, compute_feature_matrix_anchored, sparse_dot, WalkConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplacianKernelSpec {
    pub d: u32,
    pub sigma2: f64,
}

impl LaplacianKernelSpec {
    pub fn new(d: u32, sigma2: f64) -> Result<Self> {
        let spec = Self { d, sigma2 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(invalid("d", "kernel power must be at least 1"));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(invalid("sigma2", format!("must be positive, got {}", self.sigma2)));
        }
        Ok(())
    }
}

/// Optional size reduction applied to every sampled feature matrix.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Compression {
    /// Record loads only at `K` uniformly drawn anchor nodes (walk time).
    pub anchors: Option<usize>,
    /// Project finished features with a `K`-row Gaussian JLT.
    pub jlt: Option<usize>,
}

impl Compression {
    pub const NONE: Compression = Compression { anchors: None, jlt: None };
}

#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    Sparse(CsrMatrix),
    Dense(DMatrix<f64>),
}

impl Factor {
    pub fn nrows(&self) -> usize {
        match self {
            Factor::Sparse(m) => m.nrows(),
            Factor::Dense(m) => m.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            Factor::Sparse(m) => m.ncols(),
            Factor::Dense(m) => m.ncols(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Factor::Sparse(m) => m.to_dense(),
            Factor::Dense(m) => m.clone(),
        }
    }

    fn scaled(self, factor: f64, flops: &mut FlopCounter) -> Factor {
        match self {
            Factor::Sparse(m) => Factor::Sparse(m.scaled(factor, flops)),
            Factor::Dense(m) => {
                flops.add((m.nrows() * m.ncols()) as u64);
                Factor::Dense(m * factor)
            }
        }
    }

    fn apply(&self, x: &[f64], transposed: bool, flops: &mut FlopCounter) -> Result<Vec<f64>> {
        match (self, transposed) {
            (Factor::Sparse(m), false) => m.matvec(x, flops),
            (Factor::Sparse(m), true) => m.matvec_transposed(x, flops),
            (Factor::Dense(m), t) => {
                let expected = if t { m.nrows() } else { m.ncols() };
                if x.len() != expected {
                    return Err(GrfError::DimensionMismatch { expected, actual: x.len() });
                }
                flops.add((m.nrows() * m.ncols()) as u64);
                let v = DVector::from_column_slice(x);
                let y = if t { m.tr_mul(&v) } else { m * v };
                Ok(y.as_slice().to_vec())
            }
        }
    }

    /// Row `r` as `(column, value)` pairs in ascending column order.
    fn row_entries(&self, r: usize) -> Vec<(usize, f64)> {
        match self {
            Factor::Sparse(m) => {
                let (c, v) = m.row(r);
                c.iter().copied().zip(v.iter().copied()).collect()
            }
            Factor::Dense(m) => (0..m.ncols()).map(|c| (c, m[(r, c)])).collect(),
        }
    }

    fn hstack(&self, other: &Factor) -> Result<Factor> {
        match (self, other) {
            (Factor::Sparse(a), Factor::Sparse(b)) => Ok(Factor::Sparse(a.hstack(b)?)),
            _ => {
                if self.nrows() != other.nrows() {
                    return Err(GrfError::DimensionMismatch { expected: self.nrows(), actual: other.nrows() });
                }
                let (a, b) = (self.to_dense(), other.to_dense());
                let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
                out.columns_mut(0, a.ncols()).copy_from(&a);
                out.columns_mut(a.ncols(), b.ncols()).copy_from(&b);
                Ok(Factor::Dense(out))
            }
        }
    }

    /// `Aᵀ B` for a dense `A` (this factor) and any `B`.
    fn dense_tr_mul(a: &DMatrix<f64>, b: &Factor, flops: &mut FlopCounter) -> DMatrix<f64> {
        match b {
            Factor::Sparse(m) => {
                // (Aᵀ B)[:, c] = Σ_i A[i, :]ᵀ B[i, c]
                let mut out = DMatrix::zeros(a.ncols(), m.ncols());
                for (i, c, v) in m.triplets() {
                    for k in 0..a.ncols() {
                        out[(k, c)] += a[(i, k)] * v;
                    }
                }
                flops.add((m.nnz() * a.ncols()) as u64);
                out
            }
            Factor::Dense(m) => {
                flops.add((a.ncols() * a.nrows() * m.ncols()) as u64);
                a.tr_mul(m)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainFactor {
    pub factor: Factor,
    pub transposed: bool,
}

impl ChainFactor {
    pub fn plain(factor: Factor) -> Self {
        Self { factor, transposed: false }
    }

    pub fn transposed(factor: Factor) -> Self {
        Self { factor, transposed: true }
    }

    pub fn nrows(&self) -> usize {
        if self.transposed { self.factor.ncols() } else { self.factor.nrows() }
    }

    pub fn ncols(&self) -> usize {
        if self.transposed { self.factor.nrows() } else { self.factor.ncols() }
    }

    fn to_dense(&self) -> DMatrix<f64> {
        let m = self.factor.to_dense();
        if self.transposed { m.transpose() } else { m }
    }
}

/// `scale · F₁ F₂ ⋯ F_k`
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTerm {
    pub scale: f64,
    pub factors: Vec<ChainFactor>,
}

impl ChainTerm {
    /// `(X, Y)` when the term is exactly `X Yᵀ` with unit scale.
    fn as_outer_pair(&self) -> Option<(&Factor, &Factor)> {
        match self.factors.as_slice() {
            [a, b] if !a.transposed && b.transposed => Some((&a.factor, &b.factor)),
            _ => None,
        }
    }
}

/// An N×N kernel estimate stored as a sum of factor products. Only
/// [`DecompositionChain::materialize`] forms the N×N matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionChain {
    n: usize,
    terms: Vec<ChainTerm>,
    /// Multiplies spent building the factors.
    pub preprocessing_flops: u64,
}

impl DecompositionChain {
    pub fn new(n: usize, terms: Vec<ChainTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(invalid("terms", "chain needs at least one term"));
        }
        for term in &terms {
            let first = term.factors.first().ok_or_else(|| invalid("factors", "empty term"))?;
            if first.nrows() != n {
                return Err(GrfError::DimensionMismatch { expected: n, actual: first.nrows() });
            }
            for w in term.factors.windows(2) {
                if w[0].ncols() != w[1].nrows() {
                    return Err(GrfError::DimensionMismatch { expected: w[0].ncols(), actual: w[1].nrows() });
                }
            }
            let last = term.factors.last().unwrap();
            if last.ncols() != n {
                return Err(GrfError::DimensionMismatch { expected: n, actual: last.ncols() });
            }
        }
        Ok(Self { n, terms, preprocessing_flops: 0 })
    }

    /// The chain `[left, rightᵀ]`.
    pub fn outer(left: Factor, right: Factor) -> Result<Self> {
        let n = left.nrows();
        Self::new(n, vec![ChainTerm { scale: 1.0, factors: vec![ChainFactor::plain(left), ChainFactor::transposed(right)] }])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[ChainTerm] {
        &self.terms
    }

    pub fn with_flops(mut self, flops: u64) -> Self {
        self.preprocessing_flops = flops;
        self
    }

    /// `(X, Y)` with the chain equal to `X Yᵀ`. A symmetrized chain
    /// `½(X Yᵀ + Y Xᵀ)` is returned as `([X Y]/√2, [Y X]/√2)`.
    pub fn as_pair(&self) -> Option<(Factor, Factor)> {
        match self.terms.as_slice() {
            [t] => {
                let (x, y) = t.as_outer_pair()?;
                if t.scale == 1.0 {
                    Some((x.clone(), y.clone()))
                } else {
                    let mut f = FlopCounter::default();
                    Some((x.clone().scaled(t.scale, &mut f), y.clone()))
                }
            }
            [a, b] => {
                let (x, y) = a.as_outer_pair()?;
                let (y2, x2) = b.as_outer_pair()?;
                if a.scale != 0.5 || b.scale != 0.5 || x != x2 || y != y2 {
                    return None;
                }
                let h = std::f64::consts::FRAC_1_SQRT_2;
                let mut f = FlopCounter::default();
                let left = x.hstack(y).ok()?.scaled(h, &mut f);
                let right = y.hstack(x).ok()?.scaled(h, &mut f);
                Some((left, right))
            }
            _ => None,
        }
    }

    /// Inner dimension `K` of the two-factor form, if there is one.
    pub fn rank(&self) -> Option<usize> {
        self.as_pair().map(|(x, _)| x.ncols())
    }

    /// `y = M x`, applying factors right to left.
    pub fn matvec(&self, x: &[f64], flops: &mut FlopCounter) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(GrfError::DimensionMismatch { expected: self.n, actual: x.len() });
        }
        let mut total = vec![0.0; self.n];
        for term in &self.terms {
            let mut v = x.to_vec();
            for f in term.factors.iter().rev() {
                v = f.factor.apply(&v, f.transposed, flops)?;
            }
            if term.scale != 1.0 {
                flops.add(self.n as u64);
            }
            for (t, vi) in total.iter_mut().zip(v) {
                *t += term.scale * vi;
            }
        }
        Ok(total)
    }

    /// Diagonal of `M`.
    pub fn diagonal(&self) -> Vec<f64> {
        let mut diag = vec![0.0; self.n];
        for term in &self.terms {
            match term.as_outer_pair() {
                Some((x, y)) => {
                    for (i, d) in diag.iter_mut().enumerate() {
                        *d += term.scale * sparse_dot(&x.row_entries(i), &y.row_entries(i));
                    }
                }
                None => {
                    let m = materialize_term(term, self.n);
                    for (i, d) in diag.iter_mut().enumerate() {
                        *d += m[(i, i)];
                    }
                }
            }
        }
        diag
    }

    /// Dense N×N product; for tests, oracles and error measurement only.
    pub fn materialize(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, self.n);
        for term in &self.terms {
            let m = materialize_term(term, self.n);
            out.zip_apply(&m, |o, v| *o += term.scale * v);
        }
        out
    }
}

fn materialize_term(term: &ChainTerm, n: usize) -> DMatrix<f64> {
    if let Some((x, y)) = term.as_outer_pair() {
        return outer_product(x, y);
    }
    let mut acc = term.factors[0].to_dense();
    for f in &term.factors[1..] {
        acc *= f.to_dense();
    }
    debug_assert_eq!(acc.shape(), (n, n));
    acc
}

/// `X Yᵀ` summing over the inner index in ascending order, so that
/// `outer_product(Y, X)` is bitwise the transpose of `outer_product(X, Y)`.
fn outer_product(x: &Factor, y: &Factor) -> DMatrix<f64> {
    let n = x.nrows();
    let m = y.nrows();
    let xr: Vec<Vec<(usize, f64)>> = (0..n).map(|i| x.row_entries(i)).collect();
    let yr: Vec<Vec<(usize, f64)>> = (0..m).map(|j| y.row_entries(j)).collect();
    let rows: Vec<Vec<f64>> = xr.par_iter().map(|a| yr.iter().map(|b| sparse_dot(a, b)).collect()).collect();
    DMatrix::from_fn(n, m, |i, j| rows[i][j])
}

/// `y = M x` through the chain.
pub fn kernel_matvec(chain: &DecompositionChain, x: &[f64]) -> Result<Vec<f64>> {
    chain.matvec(x, &mut FlopCounter::default())
}

/// Samples one independent pair `(C, C')` of scaled, optionally compressed
/// feature matrices. Pair `k` of a chain uses its own seeds; the two copies
/// draw independent anchor sets and share a JLT projection.
pub fn sample_feature_pair(
    u: &WalkMatrix,
    cfg: &WalkConfig,
    compression: &Compression,
    pair: u64,
    scale: f64,
    flops: &mut FlopCounter,
) -> Result<(Factor, Factor)> {
    let pair_cfg = cfg.fork(&[tag::PAIR, pair]);
    let n = u.n();
    let projection = match compression.jlt {
        Some(k) => Some(JltProjection::new(k, n, pair_cfg.master_seed)?),
        None => None,
    };
    let mut sample = |copy: u64| -> Result<Factor> {
        let copy_cfg = pair_cfg.independent_copy(copy);
        let features = match compression.anchors {
            Some(k) => {
                let anchors = sample_anchors(n, k, rng::derive_seed(copy_cfg.master_seed, &[tag::ANCHORS]))?;
                compute_feature_matrix_anchored(u, &copy_cfg, &anchors)?
            }
            None => compute_feature_matrix(u, &copy_cfg)?,
        };
        flops.add(features.flops());
        let rows = features.rows.scaled(scale, flops);
        Ok(match &projection {
            Some(p) => Factor::Dense(project_rows(&rows, p, flops)?),
            None => Factor::Sparse(rows),
        })
    };
    let left = sample(0)?;
    let right = sample(1)?;
    Ok((left, right))
}

/// `E[C C'ᵀ] = (I + σ²L̃)⁻²`.
pub fn estimate_d2(g: &Graph, sigma2: f64, cfg: &WalkConfig) -> Result<DecompositionChain> {
    estimate_d2_with(g, sigma2, cfg, &Compression::NONE)
}

pub fn estimate_d2_with(g: &Graph, sigma2: f64, cfg: &WalkConfig, compression: &Compression) -> Result<DecompositionChain> {
    let u = build_u_matrix(g, sigma2)?;
    let mut flops = FlopCounter::default();
    let (c, c2) = sample_feature_pair(&u, cfg, compression, 0, 1.0 / u.scale(), &mut flops)?;
    Ok(DecompositionChain::outer(c, c2)?.with_flops(flops.count()))
}

/// `E[C Dᵀ] = (I + σ²L̃)⁻¹` with `D = (I + σ²L̃) C'`.
pub fn estimate_d1(g: &Graph, sigma2: f64, cfg: &WalkConfig) -> Result<DecompositionChain> {
    estimate_d1_with(g, sigma2, cfg, &Compression::NONE)
}

pub fn estimate_d1_with(g: &Graph, sigma2: f64, cfg: &WalkConfig, compression: &Compression) -> Result<DecompositionChain> {
    let u = build_u_matrix(g, sigma2)?;
    let mut flops = FlopCounter::default();
    let (c, c2) = sample_feature_pair(&u, cfg, compression, 0, 1.0 / u.scale(), &mut flops)?;
    let lap = g.regularized_laplacian(sigma2);
    let d = match c2 {
        Factor::Sparse(m) => Factor::Sparse(lap.matmul(&m, &mut flops)?),
        Factor::Dense(m) => Factor::Dense(lap.mul_dense(&m, &mut flops)?),
    };
    Ok(DecompositionChain::outer(c, d)?.with_flops(flops.count()))
}

/// The d = 1 estimate with `D` left implicit: `[C, C'ᵀ, I + σ²L̃]`. Same
/// expectation as [`estimate_d1`]; inference pays `nnz(L̃) + N` extra
/// multiplies instead of forming `D`.
pub fn estimate_d1_implicit(g: &Graph, sigma2: f64, cfg: &WalkConfig) -> Result<DecompositionChain> {
    let u = build_u_matrix(g, sigma2)?;
    let mut flops = FlopCounter::default();
    let (c, c2) = sample_feature_pair(&u, cfg, &Compression::NONE, 0, 1.0 / u.scale(), &mut flops)?;
    let lap = g.regularized_laplacian(sigma2);
    let term = ChainTerm {
        scale: 1.0,
        factors: vec![
            ChainFactor::plain(c),
            ChainFactor::transposed(c2),
            ChainFactor::plain(Factor::Sparse(lap)),
        ],
    };
    Ok(DecompositionChain::new(g.n(), vec![term])?.with_flops(flops.count()))
}

/// `½(X Yᵀ + Y Xᵀ)` for a chain `X Yᵀ`: symmetric for every realization and
/// with the same expectation.
pub fn symmetrize(chain: &DecompositionChain) -> Result<DecompositionChain> {
    let (x, y) = chain
        .as_pair()
        .ok_or_else(|| GrfError::Unsupported("symmetrize needs a two-factor chain".into()))?;
    let terms = vec![
        ChainTerm { scale: 0.5, factors: vec![ChainFactor::plain(x.clone()), ChainFactor::transposed(y.clone())] },
        ChainTerm { scale: 0.5, factors: vec![ChainFactor::plain(y), ChainFactor::transposed(x)] },
    ];
    Ok(DecompositionChain::new(chain.n, terms)?.with_flops(chain.preprocessing_flops))
}

/// Raises an estimate of `(I + σ²L̃)^(-d)` to `-(d+2)`.
///
/// With the chain written as `X Yᵀ` and a fresh pair `(C, C')` sampled from
/// `cfg` (which must be independent of the chain's seeds), forms
/// `S = Yᵀ C = Z Σ Vᵀ` and returns `(X Z Σ^½)(C' V Σ^½)ᵀ`.
pub fn extend_d_plus_2(chain: &DecompositionChain, g: &Graph, sigma2: f64, cfg: &WalkConfig) -> Result<DecompositionChain> {
    extend_with(chain, g, sigma2, cfg, &Compression::NONE, 0)
}

fn extend_with(
    chain: &DecompositionChain,
    g: &Graph,
    sigma2: f64,
    cfg: &WalkConfig,
    compression: &Compression,
    pair: u64,
) -> Result<DecompositionChain> {
    let (x, y) = chain
        .as_pair()
        .ok_or_else(|| GrfError::Unsupported("extension needs a two-factor chain".into()))?;
    if x.ncols() == 0 {
        return Err(invalid("K", "factors have no columns"));
    }
    let u = build_u_matrix(g, sigma2)?;
    let mut flops = FlopCounter::default();
    let (c, c2) = sample_feature_pair(&u, cfg, compression, pair, 1.0 / u.scale(), &mut flops)?;
    let y = y.to_dense();
    let s = Factor::dense_tr_mul(&y, &c, &mut flops);
    let (k, kc) = s.shape();
    flops.add((k * kc * k.min(kc)) as u64);
    let svd = SVD::new(s, true, true);
    let z = svd.u.expect("left singular vectors requested");
    let v = svd.v_t.expect("right singular vectors requested").transpose();
    let root = DMatrix::from_diagonal(&svd.singular_values.map(f64::sqrt));
    let left = x.to_dense() * (z * &root);
    let right = match &c2 {
        Factor::Sparse(m) => m.mul_dense(&(v * &root), &mut flops)?,
        Factor::Dense(m) => m * (v * &root),
    };
    flops.add((left.nrows() * left.ncols() * k) as u64);
    let total = chain.preprocessing_flops + flops.count();
    Ok(DecompositionChain::outer(Factor::Dense(left), Factor::Dense(right))?.with_flops(total))
}

/// Estimate of `(I + σ²L̃)^(-d)` for any `d ≥ 1`: the `d = 1` or `d = 2` base
/// followed by `⌊(d−1)/2⌋` extensions, each with its own independent pair.
pub fn estimate_kernel(
    g: &Graph,
    spec: &LaplacianKernelSpec,
    cfg: &WalkConfig,
    compression: &Compression,
) -> Result<DecompositionChain> {
    spec.validate()?;
    let mut chain = if spec.d % 2 == 1 {
        estimate_d1_with(g, spec.sigma2, cfg, compression)?
    } else {
        estimate_d2_with(g, spec.sigma2, cfg, compression)?
    };
    let extensions = (spec.d - 1) / 2;
    for step in 1..=extensions {
        chain = extend_with(&chain, g, spec.sigma2, cfg, compression, step as u64)?;
    }
    Ok(chain)
}

/// Unbiased estimate of the solution of `(I − U) x = b`, evaluated as
/// `λ·(C (Dᵀ b))` with `C = B/λ` and `D = λ(I − U) C'`.
pub fn solve_linear(u: &WalkMatrix, b: &[f64], cfg: &WalkConfig) -> Result<Vec<f64>> {
    solve_linear_counted(u, b, cfg, &mut FlopCounter::default())
}

pub fn solve_linear_counted(u: &WalkMatrix, b: &[f64], cfg: &WalkConfig, flops: &mut FlopCounter) -> Result<Vec<f64>> {
    if b.len() != u.n() {
        return Err(GrfError::DimensionMismatch { expected: u.n(), actual: b.len() });
    }
    let lambda = u.scale();
    let (c, c2) = sample_feature_pair(u, cfg, &Compression::NONE, 0, 1.0 / lambda, flops)?;
    // Dᵀ b = C'ᵀ (λ(I − U))ᵀ b and λ(I − U) is symmetric
    let sys_b = u.apply_system(b, flops)?;
    let dtb = c2.apply(&sys_b, true, flops)?;
    let x = c.apply(&dtb, false, flops)?;
    flops.add(x.len() as u64);
    Ok(x.into_iter().map(|v| lambda * v).collect())
}
