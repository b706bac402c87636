//! Terminating random walks that turn a walk matrix `U` into signature
//! vectors `φ(i)` with `E[φ(i)ᵀ φ'(j)] = (I − U)⁻²(i, j)`.
//!
//! Each walk starts at `i` with load 1 and deposits it there. Before every
//! transition the walk stops with probability `p_term`; otherwise it moves to
//! a sampled neighbor `w` (chosen with probability `p`), multiplies its load
//! by `u_vw / (p (1 − p_term))` and deposits the new load at `w`. The
//! accumulated vector is divided by the number of walks.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::compression::AnchorSet;
use crate::error::{invalid, GrfError, Result};
use crate::graph::WalkMatrix;
use crate::rng::{self, tag};
use crate::sparse::CsrMatrix;

/// Multiplies charged per transition: `p·(1−p_term)`, `u/(…)` and the load update.
pub const FLOPS_PER_TRANSITION: u64 = 3;

pub const DEFAULT_MAX_STEPS: u64 = 1_000_000;

/// Neighbor selection strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampler {
    /// `p = 1/deg(v)`.
    Uniform,
    /// `p ∝ u_vw`.
    WeightProportional,
    /// q-GRF reinforced walk: `p ∝ (1 + N(v,w))^(-alpha)` where `N` counts
    /// earlier traversals of the undirected edge by walks from the same source.
    Reinforced { alpha: f64 },
}

impl Sampler {
    fn tracks_history(&self) -> bool {
        matches!(self, Sampler::Reinforced { .. })
    }
}

impl fmt::Display for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sampler::Uniform => write!(f, "uniform"),
            Sampler::WeightProportional => write!(f, "weighted"),
            Sampler::Reinforced { alpha } => write!(f, "reinforced:{alpha}"),
        }
    }
}

impl FromStr for Sampler {
    type Err = GrfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Sampler::Uniform),
            "weighted" | "weight-proportional" => Ok(Sampler::WeightProportional),
            "reinforced" => Ok(Sampler::Reinforced { alpha: 1.0 }),
            other => {
                let alpha = other
                    .strip_prefix("reinforced:")
                    .and_then(|a| a.parse::<f64>().ok())
                    .ok_or_else(|| invalid("sampler", format!("unknown sampler `{other}`")))?;
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return Err(invalid("sampler", "reinforcement exponent must be positive"));
                }
                Ok(Sampler::Reinforced { alpha })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkConfig {
    pub p_term: f64,
    pub walks_per_node: usize,
    pub sampler: Sampler,
    pub master_seed: u64,
    pub max_steps: u64,
}

impl WalkConfig {
    pub fn new(p_term: f64, walks_per_node: usize, sampler: Sampler, master_seed: u64) -> Result<Self> {
        let cfg = Self { p_term, walks_per_node, sampler, master_seed, max_steps: DEFAULT_MAX_STEPS };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn uniform(p_term: f64, walks_per_node: usize, master_seed: u64) -> Result<Self> {
        Self::new(p_term, walks_per_node, Sampler::Uniform, master_seed)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_term > 0.0 && self.p_term <= 1.0) {
            return Err(invalid("p_term", format!("must lie in (0, 1], got {}", self.p_term)));
        }
        if self.walks_per_node == 0 {
            return Err(invalid("m", "need at least one walk per node"));
        }
        if self.max_steps == 0 {
            return Err(invalid("max_steps", "must be at least 1"));
        }
        if let Sampler::Reinforced { alpha } = self.sampler {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return Err(invalid("sampler", "reinforcement exponent must be positive"));
            }
        }
        Ok(())
    }

    /// Same settings with an independent seed keyed by `key`.
    pub fn fork(&self, key: &[u64]) -> Self {
        Self { master_seed: rng::derive_seed(self.master_seed, key), ..*self }
    }

    /// Independent copy used for the right-hand feature matrix of a pair.
    pub fn independent_copy(&self, copy: u64) -> Self {
        self.fork(&[tag::COPY, copy])
    }
}

/// Traversal counts on undirected edges.
#[derive(Debug, Clone, Default)]
pub struct History {
    edge_counts: HashMap<(usize, usize), u32>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(a: usize, b: usize) -> (usize, usize) {
        (a.min(b), a.max(b))
    }

    pub fn count(&self, a: usize, b: usize) -> u32 {
        self.edge_counts.get(&Self::key(a, b)).copied().unwrap_or(0)
    }

    pub fn record(&mut self, a: usize, b: usize) {
        *self.edge_counts.entry(Self::key(a, b)).or_insert(0) += 1;
    }

    pub fn total(&self) -> u64 {
        self.edge_counts.values().map(|&c| c as u64).sum()
    }

    pub fn clear(&mut self) {
        self.edge_counts.clear();
    }
}

/// Sparse signature vector of one node, sorted by node id.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureVector {
    pub owner: usize,
    pub entries: Vec<(usize, f64)>,
    pub walks_used: usize,
    /// Walks cut off at `max_steps`; nonzero means the estimate is biased.
    pub truncated_walks: u64,
    pub transitions: u64,
}

impl SignatureVector {
    pub fn get(&self, node: usize) -> f64 {
        match self.entries.binary_search_by_key(&node, |&(c, _)| c) {
            Ok(k) => self.entries[k].1,
            Err(_) => 0.0,
        }
    }

    pub fn dot(&self, other: &SignatureVector) -> f64 {
        sparse_dot(&self.entries, &other.entries)
    }
}

pub(crate) fn sparse_dot(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// Picks a neighbor of `v` and returns it with the exact probability it had.
pub fn sample_neighbor<R: Rng + ?Sized>(
    v: usize,
    u: &WalkMatrix,
    history: &History,
    sampler: Sampler,
    rng: &mut R,
) -> Result<(usize, f64)> {
    if u.row(v).0.is_empty() {
        return Err(invalid("v", format!("node {v} has no neighbors to sample")));
    }
    let (k, p) = pick_neighbor(v, u, history, sampler, rng);
    Ok((u.row(v).0[k], p))
}

/// Position of the chosen neighbor within row `v`, and its probability.
fn pick_neighbor<R: Rng + ?Sized>(
    v: usize,
    u: &WalkMatrix,
    history: &History,
    sampler: Sampler,
    rng: &mut R,
) -> (usize, f64) {
    let (cols, vals) = u.row(v);
    let deg = cols.len();
    match sampler {
        Sampler::Uniform => (rng.random_range(0..deg), 1.0 / deg as f64),
        Sampler::WeightProportional => {
            let k = draw_proportional(vals, rng);
            (k, vals[k] / vals.iter().sum::<f64>())
        }
        Sampler::Reinforced { alpha } => {
            let weights: Vec<f64> =
                cols.iter().map(|&w| (1.0 + history.count(v, w) as f64).powf(-alpha)).collect();
            let k = draw_proportional(&weights, rng);
            (k, weights[k] / weights.iter().sum::<f64>())
        }
    }
}

fn draw_proportional<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let target = rng.random::<f64>() * total;
    let mut cum = 0.0;
    for (k, &w) in weights.iter().enumerate() {
        cum += w;
        if target < cum {
            return k;
        }
    }
    // rounding can leave target == total; fall back to the last positive weight
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

/// Dense scratch accumulator reused across nodes on one worker.
struct Accumulator {
    values: Vec<f64>,
    touched: Vec<usize>,
    seen: Vec<bool>,
}

impl Accumulator {
    fn new(n: usize) -> Self {
        Self { values: vec![0.0; n], touched: Vec::new(), seen: vec![false; n] }
    }

    fn deposit(&mut self, node: usize, load: f64) {
        if !self.seen[node] {
            self.seen[node] = true;
            self.touched.push(node);
        }
        self.values[node] += load;
    }

    /// Drains into a sorted sparse vector, applying `finish` to each value.
    fn drain(&mut self, finish: impl Fn(f64) -> f64) -> Vec<(usize, f64)> {
        self.touched.sort_unstable();
        let out = self.touched.iter().map(|&c| (c, finish(self.values[c]))).collect();
        for &c in &self.touched {
            self.values[c] = 0.0;
            self.seen[c] = false;
        }
        self.touched.clear();
        out
    }
}

fn run_walks(
    u: &WalkMatrix,
    i: usize,
    cfg: &WalkConfig,
    history: &mut History,
    anchors: Option<&AnchorMask>,
    acc: &mut Accumulator,
) -> SignatureVector {
    history.clear();
    let keep = 1.0 - cfg.p_term;
    let records = |node: usize| anchors.is_none_or(|a| a.members[node]);
    let mut transitions = 0u64;
    let mut truncated = 0u64;
    for walk in 0..cfg.walks_per_node {
        let mut rng = rng::stream(cfg.master_seed, &[tag::WALK, i as u64, walk as u64]);
        let mut load = 1.0;
        let mut current = i;
        if records(current) {
            acc.deposit(current, load);
        }
        let mut steps = 0u64;
        loop {
            if rng.random::<f64>() < cfg.p_term {
                break;
            }
            if u.row(current).0.is_empty() {
                break;
            }
            if steps == cfg.max_steps {
                truncated += 1;
                break;
            }
            let (k, p) = pick_neighbor(current, u, history, cfg.sampler, &mut rng);
            let (cols, vals) = u.row(current);
            let next = cols[k];
            load *= vals[k] / (p * keep);
            if cfg.sampler.tracks_history() {
                history.record(current, next);
            }
            current = next;
            steps += 1;
            if records(current) {
                acc.deposit(current, load);
            }
        }
        transitions += steps;
    }
    let m = cfg.walks_per_node as f64;
    let entries = match anchors {
        None => acc.drain(|v| v / m),
        Some(mask) => {
            let boost = mask.n as f64 / mask.k as f64;
            acc.drain(|v| v * boost / m)
        }
    };
    SignatureVector { owner: i, entries, walks_used: cfg.walks_per_node, truncated_walks: truncated, transitions }
}

struct AnchorMask {
    members: Vec<bool>,
    n: usize,
    k: usize,
}

impl AnchorMask {
    fn new(anchors: &AnchorSet, n: usize) -> Result<Self> {
        if anchors.is_empty() {
            return Err(invalid("anchors", "anchor set is empty"));
        }
        let mut members = vec![false; n];
        for &a in anchors.nodes() {
            if a >= n {
                return Err(GrfError::NodeOutOfRange { node: a, n });
            }
            members[a] = true;
        }
        Ok(Self { members, n, k: anchors.len() })
    }
}

/// Signature vector of node `i` (resets `history` first).
pub fn compute_signature(u: &WalkMatrix, i: usize, cfg: &WalkConfig, history: &mut History) -> Result<SignatureVector> {
    cfg.validate()?;
    if i >= u.n() {
        return Err(GrfError::NodeOutOfRange { node: i, n: u.n() });
    }
    let mut acc = Accumulator::new(u.n());
    Ok(run_walks(u, i, cfg, history, None, &mut acc))
}

/// Signature vector that only records loads at anchor nodes and renormalizes
/// by `N/(K·m)` instead of `1/m`.
pub fn compute_signature_anchored(
    u: &WalkMatrix,
    i: usize,
    cfg: &WalkConfig,
    anchors: &AnchorSet,
    history: &mut History,
) -> Result<SignatureVector> {
    cfg.validate()?;
    if i >= u.n() {
        return Err(GrfError::NodeOutOfRange { node: i, n: u.n() });
    }
    let mask = AnchorMask::new(anchors, u.n())?;
    let mut acc = Accumulator::new(u.n());
    Ok(run_walks(u, i, cfg, history, Some(&mask), &mut acc))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WalkStats {
    pub walks: u64,
    pub transitions: u64,
    pub truncated_walks: u64,
}

impl WalkStats {
    /// Multiplies spent sampling plus one per stored entry for renormalization.
    pub fn flops(&self, nnz: usize) -> u64 {
        FLOPS_PER_TRANSITION * self.transitions + nnz as u64
    }
}

/// Row-sparse stack of signature vectors, row `i` being `φ(i)ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: CsrMatrix,
    pub config: WalkConfig,
    pub stats: WalkStats,
}

impl FeatureMatrix {
    pub fn n(&self) -> usize {
        self.rows.nrows()
    }

    pub fn flops(&self) -> u64 {
        self.stats.flops(self.rows.nnz())
    }
}

/// Signature vectors of every node; nodes are processed in parallel on the
/// current rayon pool. The result does not depend on the number of threads.
pub fn compute_feature_matrix(u: &WalkMatrix, cfg: &WalkConfig) -> Result<FeatureMatrix> {
    feature_matrix_impl(u, cfg, None)
}

pub fn compute_feature_matrix_anchored(u: &WalkMatrix, cfg: &WalkConfig, anchors: &AnchorSet) -> Result<FeatureMatrix> {
    let mask = AnchorMask::new(anchors, u.n())?;
    feature_matrix_impl(u, cfg, Some(&mask))
}

fn feature_matrix_impl(u: &WalkMatrix, cfg: &WalkConfig, anchors: Option<&AnchorMask>) -> Result<FeatureMatrix> {
    cfg.validate()?;
    let n = u.n();
    let signatures: Vec<SignatureVector> = (0..n)
        .into_par_iter()
        .map_init(
            || (Accumulator::new(n), History::new()),
            |(acc, history), i| run_walks(u, i, cfg, history, anchors, acc),
        )
        .collect();
    let mut stats = WalkStats::default();
    for s in &signatures {
        stats.walks += s.walks_used as u64;
        stats.transitions += s.transitions;
        stats.truncated_walks += s.truncated_walks;
    }
    let rows = CsrMatrix::from_rows(n, signatures.into_iter().map(|s| s.entries));
    Ok(FeatureMatrix { rows, config: *cfg, stats })
}
