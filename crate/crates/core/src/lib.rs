//! Graph random features: unbiased random-walk estimators of the
//! d-regularized Laplacian kernel `(I + σ²L̃)^(-d)` and of `(I − U)⁻¹`,
//! `(I − U)⁻²`, with exact oracles, compression, a randomized linear solver,
//! kernel k-means and FLOP-counted baselines.

pub mod bench;
pub mod clustering;
pub mod compression;
pub mod datasets;
pub mod error;
pub mod format;
pub mod graph;
pub mod kernel;
pub mod oracle;
pub mod rng;
pub mod sparse;
pub mod walk;

pub use bench::FlopCounter;
pub use clustering::{clustering_error, kernel_kmeans, ClusteringResult, KernelOperator};
pub use compression::{apply_jlt, sample_anchors, AnchorSet, JltProjection};
pub use error::{GrfError, Result};
pub use graph::{build_u_matrix, generate_erdos_renyi, load_edge_list, Graph, WalkMatrix};
pub use kernel::{
    estimate_d1, estimate_d2, estimate_kernel, extend_d_plus_2, kernel_matvec, solve_linear, symmetrize, Compression,
    DecompositionChain, Factor, LaplacianKernelSpec,
};
pub use oracle::{exact_kernel_matrix, positive_definiteness_check};
pub use sparse::CsrMatrix;
pub use walk::{compute_feature_matrix, compute_signature, FeatureMatrix, History, Sampler, SignatureVector, WalkConfig};
