//! Exact dense reference computations: kernel matrices, Neumann partial
//! sums, truncated walk sums and the second moment of the `(I − U)⁻²`
//! estimator. Nothing here is random.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, GrfError, Result};
use crate::graph::{Graph, WalkMatrix};
use crate::kernel::LaplacianKernelSpec;

pub const DEFAULT_DENSE_LIMIT: usize = 4096;

/// `(I + σ²L̃)^(-d)` by repeated LU solves.
pub fn exact_kernel_matrix(g: &Graph, spec: &LaplacianKernelSpec) -> Result<DMatrix<f64>> {
    exact_kernel_matrix_with_limit(g, spec, DEFAULT_DENSE_LIMIT)
}

pub fn exact_kernel_matrix_with_limit(g: &Graph, spec: &LaplacianKernelSpec, limit: usize) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let n = g.n();
    if n > limit {
        return Err(GrfError::TooLargeForDense { n, limit });
    }
    inverse_power(g.regularized_laplacian(spec.sigma2).to_dense(), spec.d)
}

/// `(I − U)^(-power)`.
pub fn exact_walk_inverse(u: &WalkMatrix, power: u32) -> Result<DMatrix<f64>> {
    let n = u.n();
    if n > DEFAULT_DENSE_LIMIT {
        return Err(GrfError::TooLargeForDense { n, limit: DEFAULT_DENSE_LIMIT });
    }
    inverse_power(DMatrix::identity(n, n) - u.entries().to_dense(), power)
}

fn inverse_power(a: DMatrix<f64>, power: u32) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let lu = a.lu();
    let mut k = DMatrix::identity(n, n);
    for _ in 0..power {
        k = lu.solve(&k).ok_or(GrfError::Singular)?;
    }
    Ok(k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeumannSum {
    pub matrix: DMatrix<f64>,
    /// Bound on the ∞-norm of the omitted terms; infinite when `‖U‖∞ ≥ 1`.
    pub tail_bound: f64,
}

/// `Σ_{k<terms} Uᵏ`, or `Σ_{k<terms} (k+1)Uᵏ` when `weighted`.
pub fn neumann_partial_sum(u: &WalkMatrix, terms: usize, weighted: bool) -> Result<NeumannSum> {
    if terms == 0 {
        return Err(invalid("terms", "need at least one term"));
    }
    let n = u.n();
    let dense = u.entries().to_dense();
    let mut power = DMatrix::identity(n, n);
    let mut sum = DMatrix::zeros(n, n);
    for k in 0..terms {
        let coef = if weighted { (k + 1) as f64 } else { 1.0 };
        sum += &power * coef;
        if k + 1 < terms {
            power = &power * &dense;
        }
    }
    let r = u.entries().inf_norm();
    Ok(NeumannSum { matrix: sum, tail_bound: series_tail(r, terms, weighted) })
}

/// `Σ_{k≥t} rᵏ` or `Σ_{k≥t} (k+1) rᵏ`.
fn series_tail(r: f64, t: usize, weighted: bool) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    if r >= 1.0 {
        return f64::INFINITY;
    }
    let rt = r.powi(t as i32);
    if weighted {
        rt * ((t + 1) as f64 - t as f64 * r) / (1.0 - r).powi(2)
    } else {
        rt / (1.0 - r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkSum {
    pub value: f64,
    pub tail_bound: f64,
}

/// `Σ (len(ω)+1)·w(ω)` over walks `ω` from `i` to `j` of length at most
/// `max_len`, by propagating the weight of all walks of each length.
pub fn walk_sum(u: &WalkMatrix, i: usize, j: usize, max_len: usize) -> Result<WalkSum> {
    let n = u.n();
    for node in [i, j] {
        if node >= n {
            return Err(GrfError::NodeOutOfRange { node, n });
        }
    }
    let mut layer = vec![0.0; n];
    layer[i] = 1.0;
    let mut value = 0.0;
    for len in 0..=max_len {
        value += (len + 1) as f64 * layer[j];
        if len == max_len {
            break;
        }
        let mut next = vec![0.0; n];
        for (x, &w) in layer.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let (cols, vals) = u.row(x);
            for (&y, &uxy) in cols.iter().zip(vals) {
                next[y] += w * uxy;
            }
        }
        layer = next;
    }
    Ok(WalkSum { value, tail_bound: series_tail(u.entries().inf_norm(), max_len + 1, true) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceReport {
    /// `(Λ − K²)/m²`.
    pub variance: f64,
    /// Variance of the `m`-walk estimator without assuming the summands of
    /// the double sum over walk pairs are independent; equals `variance`
    /// at `m = 1`.
    pub variance_exact: f64,
    /// `Λ = E[(φ(i)ᵀφ'(j))²]` for single walks.
    pub lambda: f64,
    /// `K = (I − U)⁻²(i, j)`.
    pub kernel: f64,
    /// Geometric tail of the truncated series entering `Λ`.
    pub tail_bound: f64,
}

/// Second moment of `φ(i)ᵀφ'(j)` under the uniform sampler, truncated at
/// walks of length `max_len`.
///
/// For one walk from `i`, `E[φ(x)φ(y)] = T(x,y) + T(y,x) − [x=y]Q(x)` with
/// `T(x,y) = Q(x)R(x,y)`, `R = (I − U)⁻¹` and `Q(x) = Σ w(ω)²A(ω)` over walks
/// `i → x`, i.e. row `i` of `Σ Ũᵏ` with `Ũ(x,y) = u_xy²·deg(x)/(1 − p_term)`.
/// Then `Λ = Σ_{x,y} S_i(x,y)S_j(x,y)`.
pub fn variance_formula(u: &WalkMatrix, i: usize, j: usize, p_term: f64, m: usize, max_len: usize) -> Result<VarianceReport> {
    let n = u.n();
    for node in [i, j] {
        if node >= n {
            return Err(GrfError::NodeOutOfRange { node, n });
        }
    }
    if i == j {
        return Err(GrfError::Unsupported("variance of diagonal entries".into()));
    }
    if !(p_term > 0.0 && p_term < 1.0) {
        return Err(invalid("p_term", format!("must lie in (0, 1), got {p_term}")));
    }
    if m == 0 {
        return Err(invalid("m", "need at least one walk"));
    }
    let dense = u.entries().to_dense();
    let mut tilde = DMatrix::zeros(n, n);
    for x in 0..n {
        let (cols, vals) = u.row(x);
        let deg = cols.len() as f64;
        for (&y, &v) in cols.iter().zip(vals) {
            tilde[(x, y)] = v * v * deg / (1.0 - p_term);
        }
    }
    let r = truncated_series(&dense, max_len);
    let q_sum = truncated_series(&tilde, max_len);
    let second = |s: usize| -> DMatrix<f64> {
        let q = q_sum.row(s);
        DMatrix::from_fn(n, n, |x, y| {
            let mut v = q[x] * r[(x, y)] + q[y] * r[(y, x)];
            if x == y {
                v -= q[x];
            }
            v
        })
    };
    let (si, sj) = (second(i), second(j));
    let lambda = si.component_mul(&sj).sum();
    let mu_i = r.row(i).transpose();
    let mu_j = r.row(j).transpose();
    let kernel = mu_i.dot(&mu_j);
    let mf = m as f64;
    let ci = &si - &mu_i * mu_i.transpose();
    let cj = &sj - &mu_j * mu_j.transpose();
    let cross = mu_i.dot(&(&cj * &mu_i)) + mu_j.dot(&(&ci * &mu_j));
    let variance_exact = cross / mf + (ci.component_mul(&cj)).sum() / (mf * mf);
    let tail_bound = series_tail(tilde.row_iter().map(|r| r.sum()).fold(0.0, f64::max), max_len + 1, false)
        .max(series_tail(u.entries().inf_norm(), max_len + 1, false));
    Ok(VarianceReport { variance: (lambda - kernel * kernel) / (mf * mf), variance_exact, lambda, kernel, tail_bound })
}

/// `Σ_{k≤len} Aᵏ`
fn truncated_series(a: &DMatrix<f64>, len: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let mut power = DMatrix::identity(n, n);
    let mut sum = power.clone();
    for _ in 0..len {
        power = &power * a;
        sum += &power;
    }
    sum
}

/// `true` iff the smallest eigenvalue of the symmetric part exceeds `-tol`.
pub fn positive_definiteness_check(kernel: &DMatrix<f64>, tol: f64) -> Result<bool> {
    Ok(min_eigenvalue(kernel)? > -tol)
}

pub fn min_eigenvalue(kernel: &DMatrix<f64>) -> Result<f64> {
    if !kernel.is_square() {
        return Err(GrfError::DimensionMismatch { expected: kernel.nrows(), actual: kernel.ncols() });
    }
    if kernel.is_empty() {
        return Ok(f64::INFINITY);
    }
    let sym = (kernel + kernel.transpose()) * 0.5;
    Ok(SymmetricEigen::new(sym).eigenvalues.min())
}
