//! FLOP-counted baselines and the experiment drivers.
//!
//! Counting convention: one FLOP per scalar multiplication or division,
//! additions are free, a dense inversion is charged `N³`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, GrfError, Result};
use crate::graph::{generate_erdos_renyi, Graph};
use crate::kernel::{estimate_d1_implicit, estimate_kernel, Compression, LaplacianKernelSpec};
use crate::oracle::{exact_kernel_matrix, DEFAULT_DENSE_LIMIT};
use crate::rng::{self, tag};
use crate::sparse::CsrMatrix;
use crate::walk::{Sampler, WalkConfig};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlopCounter {
    count: u64,
}

impl FlopCounter {
    pub fn add(&mut self, flops: u64) {
        self.count += flops;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn reset(&mut self) {
        self.count = 0;
    }
}

/// `‖exact − approx‖_F / ‖exact‖_F`
pub fn frobenius_error(exact: &DMatrix<f64>, approx: &DMatrix<f64>) -> Result<f64> {
    if exact.shape() != approx.shape() {
        return Err(GrfError::DimensionMismatch { expected: exact.len(), actual: approx.len() });
    }
    let norm = exact.norm();
    if norm == 0.0 {
        return Err(invalid("exact", "reference matrix has zero norm"));
    }
    Ok((exact - approx).norm() / norm)
}

/// Sample mean and standard deviation (`n − 1` denominator, 0 for one sample).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub flops: u64,
}

fn check_system(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(GrfError::DimensionMismatch { expected: n, actual: a.ncols() });
    }
    if b.len() != n {
        return Err(GrfError::DimensionMismatch { expected: n, actual: b.len() });
    }
    let diag: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    if let Some(i) = diag.iter().position(|&d| d == 0.0) {
        return Err(invalid("A", format!("zero diagonal entry at row {i}")));
    }
    Ok(diag)
}

/// Jacobi iterations from `x = 0`. Each sweep costs one multiply per
/// off-diagonal entry plus one division per row.
pub fn jacobi_solve(a: &CsrMatrix, b: &[f64], iters: usize) -> Result<SolveOutcome> {
    if iters == 0 {
        return Err(invalid("iters", "need at least one iteration"));
    }
    let diag = check_system(a, b)?;
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut flops = 0u64;
    for _ in 0..iters {
        let mut next = vec![0.0; n];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            let mut s = b[i];
            for (&j, &v) in cols.iter().zip(vals) {
                if j != i {
                    s -= v * x[j];
                    flops += 1;
                }
            }
            next[i] = s / diag[i];
            flops += 1;
        }
        x = next;
    }
    Ok(SolveOutcome { x, iterations: iters, flops })
}

/// Forward Gauss-Seidel sweeps from `x = 0`, counted like [`jacobi_solve`].
pub fn gauss_seidel_solve(a: &CsrMatrix, b: &[f64], iters: usize) -> Result<SolveOutcome> {
    if iters == 0 {
        return Err(invalid("iters", "need at least one iteration"));
    }
    let diag = check_system(a, b)?;
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut flops = 0u64;
    for _ in 0..iters {
        for i in 0..n {
            let (cols, vals) = a.row(i);
            let mut s = b[i];
            for (&j, &v) in cols.iter().zip(vals) {
                if j != i {
                    s -= v * x[j];
                    flops += 1;
                }
            }
            x[i] = s / diag[i];
            flops += 1;
        }
    }
    Ok(SolveOutcome { x, iterations: iters, flops })
}

/// Conjugate gradient for symmetric positive definite `A`, from `x = 0`,
/// stopping once `‖r‖ ≤ tol·‖b‖` or after `max_iters` iterations.
/// An iteration costs `nnz(A) + 5N`.
pub fn cg_solve(a: &CsrMatrix, b: &[f64], max_iters: usize, tol: f64) -> Result<SolveOutcome> {
    if max_iters == 0 {
        return Err(invalid("iters", "need at least one iteration"));
    }
    check_system(a, b)?;
    let n = b.len();
    let mut flops = FlopCounter::default();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let dot = |u: &[f64], v: &[f64], f: &mut FlopCounter| -> f64 {
        f.add(u.len() as u64);
        u.iter().zip(v).map(|(a, b)| a * b).sum()
    };
    let mut rr = dot(&r, &r, &mut flops);
    let threshold = tol * tol * rr;
    let mut iterations = 0;
    while iterations < max_iters && rr > threshold && rr > 0.0 {
        let ap = a.matvec(&p, &mut flops)?;
        let pap = dot(&p, &ap, &mut flops);
        if pap <= 0.0 {
            return Err(invalid("A", "matrix is not positive definite"));
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        flops.add(2 * n as u64);
        let rr_next = dot(&r, &r, &mut flops);
        let beta = rr_next / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        flops.add(n as u64);
        rr = rr_next;
        iterations += 1;
    }
    Ok(SolveOutcome { x, iterations, flops: flops.count() })
}

/// Dense inverse followed by one matvec, charged `N³ + N²`.
pub fn brute_force_solve(a: &CsrMatrix, b: &[f64]) -> Result<SolveOutcome> {
    let n = b.len();
    if a.nrows() != n || a.ncols() != n {
        return Err(GrfError::DimensionMismatch { expected: n, actual: a.nrows() });
    }
    if n > DEFAULT_DENSE_LIMIT {
        return Err(GrfError::TooLargeForDense { n, limit: DEFAULT_DENSE_LIMIT });
    }
    let inv = a.to_dense().try_inverse().ok_or(GrfError::Singular)?;
    let x = inv * DVector::from_column_slice(b);
    let n = n as u64;
    Ok(SolveOutcome { x: x.as_slice().to_vec(), iterations: 1, flops: n * n * n + n * n })
}

/// One row of an error-vs-budget experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub graph: String,
    pub d: u32,
    pub p_term: f64,
    pub m: usize,
    pub trials: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrobeniusExperiment {
    pub graph_id: String,
    pub d: u32,
    pub sigma2: f64,
    pub p_terms: Vec<f64>,
    pub ms: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub sampler: Sampler,
    pub compression: Compression,
}

impl FrobeniusExperiment {
    pub fn new(graph_id: impl Into<String>, d: u32, sigma2: f64, p_terms: Vec<f64>, ms: Vec<usize>, trials: usize, seed: u64) -> Self {
        Self {
            graph_id: graph_id.into(),
            d,
            sigma2,
            p_terms,
            ms,
            trials,
            seed,
            sampler: Sampler::Uniform,
            compression: Compression::NONE,
        }
    }
}

/// Relative Frobenius error of `trials` independent estimates per
/// `(p_term, m)` cell against the exact kernel. Records follow the order of
/// `p_terms` then `ms`.
pub fn run_frobenius_experiment(g: &Graph, exp: &FrobeniusExperiment) -> Result<Vec<ExperimentRecord>> {
    if exp.trials == 0 {
        return Err(invalid("trials", "need at least one trial"));
    }
    let spec = LaplacianKernelSpec::new(exp.d, exp.sigma2)?;
    let exact = exact_kernel_matrix(g, &spec)?;
    let mut records = Vec::with_capacity(exp.p_terms.len() * exp.ms.len());
    for &p_term in &exp.p_terms {
        for &m in &exp.ms {
            let base = WalkConfig::new(p_term, m, exp.sampler, exp.seed)?;
            let errors: Vec<f64> = (0..exp.trials)
                .into_par_iter()
                .map(|t| {
                    let cfg = base.fork(&[tag::TRIAL, p_term.to_bits(), m as u64, t as u64]);
                    let chain = estimate_kernel(g, &spec, &cfg, &exp.compression)?;
                    frobenius_error(&exact, &chain.materialize())
                })
                .collect::<Result<_>>()?;
            let (mean, std) = mean_std(&errors);
            records.push(ExperimentRecord { graph: exp.graph_id.clone(), d: exp.d, p_term, m, trials: exp.trials, mean, std });
        }
    }
    Ok(records)
}

pub fn write_frobenius_csv<W: Write>(records: &[ExperimentRecord], mut out: W) -> Result<()> {
    writeln!(out, "graph,d,p_term,m,mean,std")?;
    for r in records {
        writeln!(out, "{},{},{},{},{:.10e},{:.10e}", r.graph, r.d, r.p_term, r.m, r.mean, r.std)?;
    }
    Ok(())
}

pub const METHODS: [&str; 5] = ["grf", "brute_force", "jacobi", "gauss_seidel", "cg"];

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedRecord {
    pub n: usize,
    pub method: &'static str,
    pub preprocessing: u64,
    pub inference: u64,
}

impl SpeedRecord {
    pub fn flops(&self) -> u64 {
        self.preprocessing + self.inference
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedComparison {
    pub ns: Vec<usize>,
    /// Edge probability of the Erdős–Rényi test graphs.
    pub density: f64,
    pub sigma2: f64,
    pub walk: WalkConfig,
    /// Sweeps for Jacobi and Gauss-Seidel.
    pub iterations: usize,
    /// CG iteration cap; `None` means `N`.
    pub cg_max_iters: Option<usize>,
    pub cg_tol: f64,
}

impl SpeedComparison {
    pub fn new(ns: Vec<usize>, walk: WalkConfig) -> Self {
        Self { ns, density: 1.0, sigma2: 0.2, walk, iterations: 10, cg_max_iters: None, cg_tol: 1e-10 }
    }
}

/// FLOPs of one preprocessing pass plus one `(I + σ²L̃)⁻¹ x` evaluation for the
/// GRF chain and each baseline.
pub fn run_speed_comparison(cmp: &SpeedComparison) -> Result<Vec<SpeedRecord>> {
    let mut records = Vec::new();
    for &n in &cmp.ns {
        let graph_seed = rng::derive_seed(cmp.walk.master_seed, &[tag::TRIAL, n as u64]);
        let g = generate_erdos_renyi(n, cmp.density, graph_seed)?;
        let mut rng = rng::stream(graph_seed, &[tag::TRIAL]);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = g.regularized_laplacian(cmp.sigma2);

        let chain = estimate_d1_implicit(&g, cmp.sigma2, &cmp.walk.fork(&[n as u64]))?;
        let mut inference = FlopCounter::default();
        chain.matvec(&x, &mut inference)?;
        records.push(SpeedRecord { n, method: "grf", preprocessing: chain.preprocessing_flops, inference: inference.count() });

        let n3 = (n as u64).pow(3);
        let bf = brute_force_solve(&a, &x)?;
        records.push(SpeedRecord { n, method: "brute_force", preprocessing: n3, inference: bf.flops - n3 });

        let jac = jacobi_solve(&a, &x, cmp.iterations)?;
        records.push(SpeedRecord { n, method: "jacobi", preprocessing: 0, inference: jac.flops });
        let gs = gauss_seidel_solve(&a, &x, cmp.iterations)?;
        records.push(SpeedRecord { n, method: "gauss_seidel", preprocessing: 0, inference: gs.flops });
        let cg = cg_solve(&a, &x, cmp.cg_max_iters.unwrap_or(n).max(1), cmp.cg_tol)?;
        records.push(SpeedRecord { n, method: "cg", preprocessing: 0, inference: cg.flops });
    }
    Ok(records)
}

pub fn write_speed_csv<W: Write>(records: &[SpeedRecord], mut out: W) -> Result<()> {
    writeln!(out, "n,method,flops")?;
    for r in records {
        writeln!(out, "{},{},{}", r.n, r.method, r.flops())?;
    }
    Ok(())
}
