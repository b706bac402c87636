//! Python bindings. Matrices cross the boundary as lists of rows.

use grf_core::clustering::{kernel_kmeans_restarts, KernelOperator};
use grf_core::format::{read_chain, write_chain};
use grf_core::walk::Sampler;
use grf_core::{bench, datasets, graph, kernel, oracle};
use nalgebra::DMatrix;
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

create_exception!(grf, GrfError, PyValueError);

fn err(e: grf_core::GrfError) -> PyErr {
    GrfError::new_err(e.to_string())
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(GrfError::new_err("rows have different lengths"));
    }
    Ok(DMatrix::from_fn(n, cols, |i, j| rows[i][j]))
}

/// Undirected weighted graph with nodes `0..n`.
#[pyclass(frozen, module = "grf")]
pub struct Graph {
    inner: graph::Graph,
}

#[pymethods]
impl Graph {
    /// Edges are `(i, j)` or `(i, j, w)` tuples; missing weights are 1.
    #[new]
    fn new(n: usize, edges: Vec<Vec<f64>>) -> PyResult<Self> {
        let mut triplets = Vec::with_capacity(edges.len());
        for e in &edges {
            let (a, b, w) = match e.as_slice() {
                [a, b] => (*a, *b, 1.0),
                [a, b, w] => (*a, *b, *w),
                _ => return Err(GrfError::new_err("edges must be (i, j) or (i, j, w)")),
            };
            if a < 0.0 || b < 0.0 || a.fract() != 0.0 || b.fract() != 0.0 {
                return Err(GrfError::new_err(format!("node ids must be nonnegative integers, got ({a}, {b})")));
            }
            triplets.push((a as usize, b as usize, w));
        }
        Ok(Self { inner: graph::Graph::from_edges(n, &triplets).map_err(err)? })
    }

    /// Parses the `i j [w]` edge-list format.
    #[staticmethod]
    fn from_edge_list(text: &str) -> PyResult<Self> {
        Ok(Self { inner: graph::load_edge_list(text.as_bytes()).map_err(err)? })
    }

    #[staticmethod]
    fn karate() -> Self {
        Self { inner: datasets::karate() }
    }

    #[staticmethod]
    fn erdos_renyi(n: usize, p: f64, seed: u64) -> PyResult<Self> {
        Ok(Self { inner: graph::generate_erdos_renyi(n, p, seed).map_err(err)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    fn edges(&self) -> Vec<(usize, usize, f64)> {
        self.inner.edges().collect()
    }

    fn weighted_degree(&self, v: usize) -> PyResult<f64> {
        self.inner.weighted_degree(v).map_err(err)
    }

    fn to_edge_list(&self) -> String {
        self.inner.to_edge_list()
    }

    /// Dense `I + σ²L̃`.
    fn regularized_laplacian(&self, sigma2: f64) -> Vec<Vec<f64>> {
        to_rows(&self.inner.regularized_laplacian(sigma2).to_dense())
    }

    fn __repr__(&self) -> String {
        format!("Graph(n={}, edges={})", self.inner.n(), self.inner.edge_count())
    }
}

/// Walk sampling parameters.
#[pyclass(frozen, module = "grf")]
pub struct WalkConfig {
    inner: grf_core::WalkConfig,
}

#[pymethods]
impl WalkConfig {
    /// `sampler` is `uniform`, `weighted`, `reinforced` or `reinforced:ALPHA`.
    #[new]
    #[pyo3(signature = (p_term = 0.1, m = 80, sampler = "uniform", seed = 0))]
    fn new(p_term: f64, m: usize, sampler: &str, seed: u64) -> PyResult<Self> {
        let sampler: Sampler = sampler.parse().map_err(err)?;
        Ok(Self { inner: grf_core::WalkConfig::new(p_term, m, sampler, seed).map_err(err)? })
    }

    #[getter]
    fn p_term(&self) -> f64 {
        self.inner.p_term
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.walks_per_node
    }

    #[getter]
    fn sampler(&self) -> String {
        self.inner.sampler.to_string()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.master_seed
    }

    fn __repr__(&self) -> String {
        format!("WalkConfig(p_term={}, m={}, sampler='{}', seed={})", self.p_term(), self.m(), self.sampler(), self.seed())
    }
}

/// Low-rank kernel estimate exposed through matrix-vector products.
#[pyclass(frozen, module = "grf")]
pub struct Chain {
    inner: kernel::DecompositionChain,
}

#[pymethods]
impl Chain {
    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    /// Common inner dimension of the factors, when there is one.
    #[getter]
    fn rank(&self) -> Option<usize> {
        self.inner.rank()
    }

    #[getter]
    fn preprocessing_flops(&self) -> u64 {
        self.inner.preprocessing_flops
    }

    fn matvec(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        kernel::kernel_matvec(&self.inner, &x).map_err(err)
    }

    fn diagonal(&self) -> Vec<f64> {
        self.inner.diagonal()
    }

    /// Dense product of the chain; meant for small graphs.
    fn materialize(&self) -> Vec<Vec<f64>> {
        to_rows(&self.inner.materialize())
    }

    /// `½(X Yᵀ + Y Xᵀ)`.
    fn symmetrize(&self) -> PyResult<Chain> {
        Ok(Chain { inner: kernel::symmetrize(&self.inner).map_err(err)? })
    }

    fn to_text(&self) -> PyResult<String> {
        let mut out = Vec::new();
        write_chain(&self.inner, &mut out).map_err(err)?;
        Ok(String::from_utf8(out).expect("chain text is ASCII"))
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Chain> {
        Ok(Chain { inner: read_chain(text.as_bytes()).map_err(err)? })
    }

    fn __repr__(&self) -> String {
        format!("Chain(n={}, rank={:?}, terms={})", self.inner.n(), self.inner.rank(), self.inner.terms().len())
    }
}

/// Outcome of kernel k-means.
#[pyclass(frozen, get_all, module = "grf")]
pub struct Clustering {
    labels: Vec<usize>,
    objective: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// Unbiased estimate of `(I + σ²L̃)^(-d)`.
#[pyfunction]
#[pyo3(signature = (graph, d, sigma2, config, anchors = None, jlt = None))]
fn estimate_kernel(
    py: Python<'_>,
    graph: &Graph,
    d: u32,
    sigma2: f64,
    config: &WalkConfig,
    anchors: Option<usize>,
    jlt: Option<usize>,
) -> PyResult<Chain> {
    let spec = kernel::LaplacianKernelSpec::new(d, sigma2).map_err(err)?;
    let compression = kernel::Compression { anchors, jlt };
    let chain = py.detach(|| kernel::estimate_kernel(&graph.inner, &spec, &config.inner, &compression)).map_err(err)?;
    Ok(Chain { inner: chain })
}

/// Dense `(I + σ²L̃)^(-d)`.
#[pyfunction]
fn exact_kernel(py: Python<'_>, graph: &Graph, d: u32, sigma2: f64) -> PyResult<Vec<Vec<f64>>> {
    let spec = kernel::LaplacianKernelSpec::new(d, sigma2).map_err(err)?;
    let k = py.detach(|| oracle::exact_kernel_matrix(&graph.inner, &spec)).map_err(err)?;
    Ok(to_rows(&k))
}

/// Unbiased estimate of the solution of `(I − U) x = b` for the walk matrix
/// of `graph`, which equals `(σ²+1)(I + σ²L̃)⁻¹ b`.
#[pyfunction]
fn solve_linear(py: Python<'_>, graph: &Graph, sigma2: f64, b: Vec<f64>, config: &WalkConfig) -> PyResult<Vec<f64>> {
    let u = graph::build_u_matrix(&graph.inner, sigma2).map_err(err)?;
    py.detach(|| kernel::solve_linear(&u, &b, &config.inner)).map_err(err)
}

/// Kernel k-means on a `Chain` or a dense kernel given as a list of rows.
#[pyfunction]
#[pyo3(signature = (kernel, n_clusters, seed = 0, max_iter = 100, restarts = 1))]
fn kmeans(
    py: Python<'_>,
    kernel: &Bound<'_, PyAny>,
    n_clusters: usize,
    seed: u64,
    max_iter: usize,
    restarts: usize,
) -> PyResult<Clustering> {
    let run = |k: &dyn KernelOperator| py.detach(|| kernel_kmeans_restarts(k, n_clusters, seed, max_iter, restarts));
    let result = if let Ok(chain) = kernel.extract::<PyRef<'_, Chain>>() {
        run(&chain.inner)
    } else {
        let rows: Vec<Vec<f64>> = kernel.extract()?;
        run(&from_rows(&rows)?)
    }
    .map_err(err)?;
    Ok(Clustering {
        labels: result.labels,
        objective: result.objective,
        iterations: result.iterations_run,
        converged: result.converged,
    })
}

/// Fraction of node pairs co-clustered in exactly one of the labelings.
#[pyfunction]
fn clustering_error(a: Vec<usize>, b: Vec<usize>) -> PyResult<f64> {
    grf_core::clustering_error(&a, &b).map_err(err)
}

/// `‖exact − approx‖_F / ‖exact‖_F`.
#[pyfunction]
fn frobenius_error(exact: Vec<Vec<f64>>, approx: Vec<Vec<f64>>) -> PyResult<f64> {
    bench::frobenius_error(&from_rows(&exact)?, &from_rows(&approx)?).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (matrix, tol = 1e-10))]
fn positive_definite(matrix: Vec<Vec<f64>>, tol: f64) -> PyResult<bool> {
    oracle::positive_definiteness_check(&from_rows(&matrix)?, tol).map_err(err)
}

#[pymodule]
fn grf(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("GrfError", m.py().get_type::<GrfError>())?;
    m.add_class::<Graph>()?;
    m.add_class::<WalkConfig>()?;
    m.add_class::<Chain>()?;
    m.add_class::<Clustering>()?;
    m.add_function(wrap_pyfunction!(estimate_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(exact_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(solve_linear, m)?)?;
    m.add_function(wrap_pyfunction!(kmeans, m)?)?;
    m.add_function(wrap_pyfunction!(clustering_error, m)?)?;
    m.add_function(wrap_pyfunction!(frobenius_error, m)?)?;
    m.add_function(wrap_pyfunction!(positive_definite, m)?)?;
    Ok(())
}
