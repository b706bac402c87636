//! Kernel k-means driven only by kernel matvecs and the kernel diagonal, and
//! the pairwise clustering error.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::bench::FlopCounter;
use crate::error::{invalid, GrfError, Result};
use crate::kernel::DecompositionChain;
use crate::rng;

/// Anything that can multiply by an N×N kernel matrix and report its diagonal.
pub trait KernelOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn diagonal(&self) -> Vec<f64>;
}

impl KernelOperator for DecompositionChain {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.matvec(x, &mut FlopCounter::default())
    }

    fn diagonal(&self) -> Vec<f64> {
        DecompositionChain::diagonal(self)
    }
}

impl KernelOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols() {
            return Err(GrfError::DimensionMismatch { expected: self.ncols(), actual: x.len() });
        }
        Ok((self * DVector::from_column_slice(x)).as_slice().to_vec())
    }

    fn diagonal(&self) -> Vec<f64> {
        DMatrix::diagonal(self).as_slice().to_vec()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    pub labels: Vec<usize>,
    pub n_clusters: usize,
    pub iterations_run: usize,
    pub converged: bool,
    /// Within-cluster sum of squared kernel distances of each labeling visited.
    pub objective: Vec<f64>,
    /// Smallest raw squared distance seen before clamping at 0.
    pub min_raw_distance: f64,
}

struct Centroids {
    /// `K 1_c` per cluster.
    columns: Vec<Vec<f64>>,
    sizes: Vec<usize>,
    /// `1_cᵀ K 1_c`
    within: Vec<f64>,
}

impl Centroids {
    fn compute<K: KernelOperator + ?Sized>(kernel: &K, labels: &[usize], k: usize) -> Result<Self> {
        let n = labels.len();
        let mut sizes = vec![0usize; k];
        for &l in labels {
            sizes[l] += 1;
        }
        let columns = (0..k)
            .into_par_iter()
            .map(|c| {
                if sizes[c] == 0 {
                    return Ok(vec![0.0; n]);
                }
                let ind: Vec<f64> = labels.iter().map(|&l| if l == c { 1.0 } else { 0.0 }).collect();
                kernel.apply(&ind)
            })
            .collect::<Result<Vec<_>>>()?;
        let within = (0..k)
            .map(|c| labels.iter().zip(&columns[c]).filter(|(&l, _)| l == c).map(|(_, v)| v).sum())
            .collect();
        Ok(Self { columns, sizes, within })
    }

    fn distance(&self, diag: &[f64], i: usize, c: usize) -> f64 {
        let s = self.sizes[c] as f64;
        diag[i] - 2.0 * self.columns[c][i] / s + self.within[c] / (s * s)
    }
}

/// Lloyd iterations in the kernel feature space with k-means++ seeding.
/// Stops when no label changes or after `max_iter` reassignments.
pub fn kernel_kmeans<K: KernelOperator + ?Sized>(kernel: &K, n_clusters: usize, seed: u64, max_iter: usize) -> Result<ClusteringResult> {
    let n = kernel.dim();
    if n_clusters == 0 {
        return Err(invalid("n_clusters", "need at least one cluster"));
    }
    if n_clusters > n {
        return Err(invalid("n_clusters", format!("{n_clusters} clusters for {n} points")));
    }
    let diag = kernel.diagonal();
    if diag.len() != n {
        return Err(GrfError::DimensionMismatch { expected: n, actual: diag.len() });
    }
    let mut min_raw = f64::INFINITY;
    let mut labels = seed_labels(kernel, &diag, n_clusters, seed, &mut min_raw)?;
    let mut objective = Vec::new();
    let mut iterations_run = 0;
    let mut converged = false;
    loop {
        let centroids = Centroids::compute(kernel, &labels, n_clusters)?;
        let own: Vec<f64> = (0..n).map(|i| centroids.distance(&diag, i, labels[i])).collect();
        objective.push(own.iter().sum());
        if converged || iterations_run == max_iter {
            break;
        }
        let mut next: Vec<usize> = (0..n)
            .map(|i| {
                let mut best = (f64::INFINITY, 0);
                for c in 0..n_clusters {
                    if centroids.sizes[c] == 0 {
                        continue;
                    }
                    let raw = centroids.distance(&diag, i, c);
                    min_raw = min_raw.min(raw);
                    let d = raw.max(0.0);
                    if d < best.0 {
                        best = (d, c);
                    }
                }
                best.1
            })
            .collect();
        repair_empty(&mut next, &own, n_clusters);
        iterations_run += 1;
        converged = next == labels;
        labels = next;
    }
    Ok(ClusteringResult { labels, n_clusters, iterations_run, converged, objective, min_raw_distance: min_raw })
}

/// Best of `n_init` runs of [`kernel_kmeans`] by final objective; run `r`
/// uses a seed derived from `seed` and `r`.
pub fn kernel_kmeans_restarts<K: KernelOperator + ?Sized>(
    kernel: &K,
    n_clusters: usize,
    seed: u64,
    max_iter: usize,
    n_init: usize,
) -> Result<ClusteringResult> {
    if n_init == 0 {
        return Err(invalid("n_init", "need at least one run"));
    }
    let mut best: Option<ClusteringResult> = None;
    for r in 0..n_init {
        let run = kernel_kmeans(kernel, n_clusters, rng::derive_seed(seed, &[r as u64]), max_iter)?;
        let score = *run.objective.last().unwrap();
        if best.as_ref().is_none_or(|b| score < *b.objective.last().unwrap()) {
            best = Some(run);
        }
    }
    Ok(best.unwrap())
}

/// k-means++ over kernel distances, then nearest-center assignment.
fn seed_labels<K: KernelOperator + ?Sized>(
    kernel: &K,
    diag: &[f64],
    k: usize,
    seed: u64,
    min_raw: &mut f64,
) -> Result<Vec<usize>> {
    let n = diag.len();
    let mut rng = rng::stream(seed, &[rng::tag::TRIAL]);
    let mut centers = vec![rng.random_range(0..n)];
    let mut columns = Vec::with_capacity(k);
    let column = |c: usize| -> Result<Vec<f64>> {
        let mut e = vec![0.0; n];
        e[c] = 1.0;
        kernel.apply(&e)
    };
    columns.push(column(centers[0])?);
    let mut nearest: Vec<f64> = vec![f64::INFINITY; n];
    loop {
        let (c, col) = (*centers.last().unwrap(), columns.last().unwrap());
        for i in 0..n {
            let raw = diag[i] - 2.0 * col[i] + diag[c];
            *min_raw = min_raw.min(raw);
            nearest[i] = nearest[i].min(raw.max(0.0));
        }
        if centers.len() == k {
            break;
        }
        let candidates: Vec<usize> = (0..n).filter(|i| !centers.contains(i)).collect();
        let total: f64 = candidates.iter().map(|&i| nearest[i]).sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = *candidates.iter().rev().find(|&&i| nearest[i] > 0.0).unwrap();
            for &i in &candidates {
                if nearest[i] > 0.0 && target < nearest[i] {
                    pick = i;
                    break;
                }
                target -= nearest[i];
            }
            pick
        } else {
            candidates[rng.random_range(0..candidates.len())]
        };
        centers.push(next);
        columns.push(column(next)?);
    }
    let mut labels: Vec<usize> = (0..n)
        .map(|i| {
            let mut best = (f64::INFINITY, 0);
            for (c, (&center, col)) in centers.iter().zip(&columns).enumerate() {
                let d = if i == center { 0.0 } else { (diag[i] - 2.0 * col[i] + diag[center]).max(0.0) };
                if d < best.0 {
                    best = (d, c);
                }
            }
            best.1
        })
        .collect();
    for (c, &center) in centers.iter().enumerate() {
        labels[center] = c;
    }
    Ok(labels)
}

/// Moves the point farthest from its old centroid into each empty cluster,
/// never emptying another cluster.
fn repair_empty(labels: &mut [usize], distance: &[f64], k: usize) {
    loop {
        let mut sizes = vec![0usize; k];
        for &l in labels.iter() {
            sizes[l] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else { return };
        let donor = (0..labels.len())
            .filter(|&i| sizes[labels[i]] > 1)
            .max_by(|&a, &b| distance[a].total_cmp(&distance[b]).then(b.cmp(&a)))
            .expect("k ≤ N leaves a cluster with two points");
        labels[donor] = empty;
    }
}

/// Fraction of unordered node pairs that are co-clustered in exactly one of
/// the two labelings.
pub fn clustering_error(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(GrfError::DimensionMismatch { expected: a.len(), actual: b.len() });
    }
    let n = a.len();
    if n < 2 {
        return Err(invalid("labels", "need at least two nodes"));
    }
    let mut ca: HashMap<usize, u64> = HashMap::new();
    let mut cb: HashMap<usize, u64> = HashMap::new();
    let mut cab: HashMap<(usize, usize), u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *ca.entry(x).or_default() += 1;
        *cb.entry(y).or_default() += 1;
        *cab.entry((x, y)).or_default() += 1;
    }
    let both = pairs(cab.values());
    let disagreements = pairs(ca.values()) + pairs(cb.values()) - 2 * both;
    let total = (n as u64) * (n as u64 - 1) / 2;
    Ok(disagreements as f64 / total as f64)
}

fn pairs<'a>(counts: impl Iterator<Item = &'a u64>) -> u64 {
    counts.map(|&c| c * (c - 1) / 2).sum()
}

/// `node,cluster` with a header row.
pub fn write_labels_csv<W: Write>(labels: &[usize], mut out: W) -> Result<()> {
    writeln!(out, "node,cluster")?;
    for (i, l) in labels.iter().enumerate() {
        writeln!(out, "{i},{l}")?;
    }
    Ok(())
}

pub fn read_labels_csv<R: BufRead>(reader: R) -> Result<Vec<usize>> {
    let mut labels = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = k + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || (k == 0 && trimmed == "node,cluster") {
            continue;
        }
        let parse = |s: Option<&str>| -> Result<usize> {
            s.and_then(|t| t.trim().parse().ok())
                .ok_or_else(|| GrfError::Parse { line: line_no, message: format!("expected `node,cluster`, got `{trimmed}`") })
        };
        let mut fields = trimmed.split(',');
        let node = parse(fields.next())?;
        let cluster = parse(fields.next())?;
        if node != labels.len() {
            return Err(GrfError::Parse { line: line_no, message: format!("expected node {}, got {node}", labels.len()) });
        }
        labels.push(cluster);
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blocks() -> DMatrix<f64> {
        // two well separated groups {0,1,2} and {3,4}
        let pts = [0.0, 0.1, 0.2, 5.0, 5.1];
        DMatrix::from_fn(5, 5, |i, j| (-(pts[i] - pts[j] as f64).powi(2)).exp())
    }

    #[test]
    fn one_cluster() {
        let r = kernel_kmeans(&blocks(), 1, 3, 50).unwrap();
        assert_eq!(r.labels, vec![0; 5]);
        assert!(r.converged);
    }

    #[test]
    fn one_cluster_per_node() {
        let r = kernel_kmeans(&blocks(), 5, 3, 50).unwrap();
        let mut sorted = r.labels.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2, 3, 4]);
        assert!(r.objective.last().unwrap().abs() < 1e-12);
    }

    #[test]
    fn separates_blocks() {
        for seed in 0..10 {
            let r = kernel_kmeans(&blocks(), 2, seed, 50).unwrap();
            assert_eq!(clustering_error(&r.labels, &[0, 0, 0, 1, 1]).unwrap(), 0.0, "seed {seed}");
        }
    }

    #[test]
    fn objective_non_increasing() {
        let r = kernel_kmeans(&blocks(), 2, 1, 50).unwrap();
        assert!(r.objective.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn too_many_clusters() {
        assert!(kernel_kmeans(&blocks(), 6, 1, 10).is_err());
        assert!(kernel_kmeans(&blocks(), 0, 1, 10).is_err());
    }

    #[test]
    fn error_examples() {
        assert_eq!(clustering_error(&[0, 1, 1], &[0, 1, 1]).unwrap(), 0.0);
        assert_eq!(clustering_error(&[0, 0], &[0, 1]).unwrap(), 1.0);
        assert_eq!(clustering_error(&[0, 0, 1], &[5, 5, 2]).unwrap(), 0.0);
        assert!(clustering_error(&[0], &[0]).is_err());
        assert!(clustering_error(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn repair_fills_empty_cluster() {
        let mut labels = vec![0, 0, 0, 1];
        repair_empty(&mut labels, &[0.1, 0.9, 0.2, 0.0], 3);
        assert_eq!(labels, vec![0, 2, 0, 1]);
    }

    #[test]
    fn labels_csv_roundtrip() {
        let labels = vec![2, 0, 1, 1];
        let mut out = Vec::new();
        write_labels_csv(&labels, &mut out).unwrap();
        assert!(String::from_utf8(out.clone()).unwrap().starts_with("node,cluster\n0,2\n"));
        assert_eq!(read_labels_csv(out.as_slice()).unwrap(), labels);
        assert!(read_labels_csv("node,cluster\n1,0\n".as_bytes()).is_err());
    }
}
