use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

/// Graph random features: random-walk estimators of regularized Laplacian kernels.
#[derive(Debug, Parser, Serialize)]
#[command(name = "grf", version)]
pub struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Write a graph as a canonical edge list.
    Generate(GenerateArgs),
    /// Compute the signature-vector matrix B.
    Features(FeaturesArgs),
    /// Estimate (I + σ²L̃)^(-d) as a decomposition chain.
    Estimate(EstimateArgs),
    /// Unbiased estimate of the solution of (I − U) x = b.
    Solve(SolveArgs),
    /// Kernel k-means on an estimated or exact kernel.
    Kmeans(KmeansArgs),
    /// Relative Frobenius error of the estimator over a (p_term, m) grid.
    BenchFrobenius(BenchFrobeniusArgs),
    /// FLOP counts of the estimator and of dense and iterative baselines.
    BenchSpeed(BenchSpeedArgs),
    /// Positive definiteness and spectral radius checks.
    Validate(ValidateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Features(_) => "features",
            Command::Estimate(_) => "estimate",
            Command::Solve(_) => "solve",
            Command::Kmeans(_) => "kmeans",
            Command::BenchFrobenius(_) => "bench-frobenius",
            Command::BenchSpeed(_) => "bench-speed",
            Command::Validate(_) => "validate",
        }
    }
}

/// Where the graph comes from; exactly one of `--graph`, `--karate` and
/// `--er` is accepted. Erdős–Rényi graphs are seeded by `--seed`.
#[derive(Debug, Clone, Args, Serialize)]
#[group(skip)]
pub struct GraphSource {
    /// Edge list file with lines `i j [w]`.
    #[arg(long, group = "source")]
    pub graph: Option<PathBuf>,
    /// Treat node ids in `--graph` as arbitrary labels and renumber them.
    #[arg(long, requires = "graph")]
    pub labeled: bool,
    /// Zachary's karate club.
    #[arg(long, group = "source")]
    pub karate: bool,
    /// Erdős–Rényi graph with N nodes and edge probability P.
    #[arg(long, group = "source", num_args = 2, value_names = ["N", "P"])]
    pub er: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct WalkArgs {
    /// Termination probability before each transition.
    #[arg(long, default_value_t = 0.1)]
    pub p_term: f64,
    /// Walks per node.
    #[arg(long, default_value_t = 80)]
    pub m: usize,
    /// uniform, weighted, reinforced or reinforced:ALPHA.
    #[arg(long, default_value = "uniform")]
    pub sampler: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct KernelArgs {
    /// Power of the regularized Laplacian kernel.
    #[arg(long, default_value_t = 1)]
    pub d: u32,
    #[arg(long, default_value_t = 0.2)]
    pub sigma2: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CompressionArgs {
    /// Record loads only at K uniformly sampled anchor nodes.
    #[arg(long, value_name = "K")]
    pub anchors: Option<usize>,
    /// Project signature vectors to K dimensions.
    #[arg(long, value_name = "K")]
    pub jlt: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub source: GraphSource,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct FeaturesArgs {
    #[command(flatten)]
    pub source: GraphSource,
    #[arg(long, default_value_t = 0.2)]
    pub sigma2: f64,
    #[command(flatten)]
    pub walk: WalkArgs,
    #[arg(long, value_name = "K")]
    pub anchors: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub source: GraphSource,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub walk: WalkArgs,
    #[command(flatten)]
    pub compression: CompressionArgs,
    /// Store ½(X Yᵀ + Y Xᵀ) instead of X Yᵀ.
    #[arg(long)]
    pub symmetrize: bool,
    /// Report the relative Frobenius error against the exact kernel.
    #[arg(long)]
    pub check: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SolveArgs {
    #[command(flatten)]
    pub source: GraphSource,
    #[arg(long, default_value_t = 0.2)]
    pub sigma2: f64,
    #[command(flatten)]
    pub walk: WalkArgs,
    /// Right-hand side, whitespace-separated; defaults to all ones.
    #[arg(long)]
    pub rhs: Option<PathBuf>,
    /// Independent estimates to average.
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    /// Report the relative error against a dense solve.
    #[arg(long)]
    pub check: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct KmeansArgs {
    #[command(flatten)]
    pub source: GraphSource,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub walk: WalkArgs,
    #[command(flatten)]
    pub compression: CompressionArgs,
    #[arg(long, default_value_t = 3)]
    pub clusters: usize,
    /// Independent k-means runs; the lowest objective wins.
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    /// Cluster with the exact kernel instead of an estimate.
    #[arg(long)]
    pub exact: bool,
    /// Labels CSV to compare against with the pairwise clustering error.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchFrobeniusArgs {
    #[command(flatten)]
    pub source: GraphSource,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.06,0.01")]
    pub p_terms: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,10,20,40,80")]
    pub ms: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value = "uniform")]
    pub sampler: String,
    #[command(flatten)]
    pub compression: CompressionArgs,
    /// Graph id written to the CSV.
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchSpeedArgs {
    #[arg(long, value_delimiter = ',', default_value = "800,1000,3000")]
    pub ns: Vec<usize>,
    /// Edge probability of the test graphs.
    #[arg(long, default_value_t = 1.0)]
    pub density: f64,
    #[arg(long, default_value_t = 0.2)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 0.1)]
    pub p_term: f64,
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    /// Jacobi and Gauss-Seidel sweeps.
    #[arg(long, default_value_t = 10)]
    pub iterations: usize,
    /// CG iteration cap; defaults to N.
    #[arg(long)]
    pub cg_max_iters: Option<usize>,
    #[arg(long, default_value_t = 1e-10)]
    pub cg_tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub source: GraphSource,
    #[arg(long, default_value_t = 0.2)]
    pub sigma2: f64,
    /// Check kernels for d = 1..=max-d.
    #[arg(long, default_value_t = 4)]
    pub max_d: u32,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 100)]
    pub power_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the JSON report here.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}
