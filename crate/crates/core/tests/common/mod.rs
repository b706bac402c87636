#![allow(dead_code)]

use grf_core::graph::WalkMatrix;
use grf_core::walk::{compute_feature_matrix, WalkConfig};
use nalgebra::DMatrix;

pub const KMEANS_SEED: u64 = 2024;
pub const KARATE_FIXTURE: &str = include_str!("../fixtures/karate_exact_d2_k3.csv");

/// Entrywise running mean and variance.
pub struct EntryStats {
    count: usize,
    mean: DMatrix<f64>,
    m2: DMatrix<f64>,
}

impl EntryStats {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { count: 0, mean: DMatrix::zeros(rows, cols), m2: DMatrix::zeros(rows, cols) }
    }

    pub fn push(&mut self, x: &DMatrix<f64>) {
        self.count += 1;
        let n = self.count as f64;
        for k in 0..x.len() {
            let delta = x[k] - self.mean[k];
            self.mean[k] += delta / n;
            self.m2[k] += delta * (x[k] - self.mean[k]);
        }
    }

    /// Combines two accumulators over disjoint samples.
    pub fn merge(mut self, other: EntryStats) -> EntryStats {
        if other.count == 0 {
            return self;
        }
        if self.count == 0 {
            return other;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for k in 0..self.mean.len() {
            let delta = other.mean[k] - self.mean[k];
            self.mean[k] += delta * nb / n;
            self.m2[k] += other.m2[k] + delta * delta * na * nb / n;
        }
        self.count += other.count;
        self
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> &DMatrix<f64> {
        &self.mean
    }

    pub fn variance(&self) -> DMatrix<f64> {
        &self.m2 / (self.count as f64 - 1.0)
    }

    /// Entries whose mean lies within `z` standard errors of `expected`.
    /// Entries with zero sample variance must match to 1e-12.
    pub fn check(&self, expected: &DMatrix<f64>, z: f64) -> Check {
        let mut check = Check { passed: 0, total: 0, worst: 0.0 };
        let se = self.variance().map(|v| (v / self.count as f64).sqrt());
        for k in 0..expected.len() {
            check.total += 1;
            let diff = (self.mean[k] - expected[k]).abs();
            let ok = if se[k] == 0.0 {
                diff <= 1e-12 * expected[k].abs().max(1.0)
            } else {
                let score = diff / se[k];
                check.worst = check.worst.max(score);
                score <= z
            };
            if ok {
                check.passed += 1;
            }
        }
        check
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Check {
    pub passed: usize,
    pub total: usize,
    /// Largest deviation in standard errors among entries with nonzero variance.
    pub worst: f64,
}

impl Check {
    pub fn fraction(&self) -> f64 {
        self.passed as f64 / self.total as f64
    }

    pub fn merge(self, other: Check) -> Check {
        Check { passed: self.passed + other.passed, total: self.total + other.total, worst: self.worst.max(other.worst) }
    }
}

/// Accumulates `sample(t)` for `t in 0..trials`, in parallel over fixed
/// chunks so the result does not depend on scheduling.
pub fn collect_stats(trials: usize, rows: usize, cols: usize, sample: impl Fn(usize) -> DMatrix<f64> + Sync) -> EntryStats {
    use rayon::prelude::*;
    const CHUNK: usize = 250;
    let chunks: Vec<EntryStats> = (0..trials.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut stats = EntryStats::new(rows, cols);
            for t in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                stats.push(&sample(t));
            }
            stats
        })
        .collect();
    chunks.into_iter().fold(EntryStats::new(rows, cols), EntryStats::merge)
}

/// One realization of `B B'ᵀ` from two independent feature matrices.
pub fn pair_product(u: &WalkMatrix, cfg: &WalkConfig) -> DMatrix<f64> {
    let b = compute_feature_matrix(u, &cfg.independent_copy(0)).unwrap().rows.to_dense();
    let b2 = compute_feature_matrix(u, &cfg.independent_copy(1)).unwrap().rows.to_dense();
    b * b2.transpose()
}

pub fn karate_reference_labels() -> Vec<usize> {
    grf_core::clustering::read_labels_csv(KARATE_FIXTURE.as_bytes()).unwrap()
}

/// Runs `f` inside a dedicated rayon pool with `threads` workers.
pub fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}
