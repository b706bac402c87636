//! Undirected weighted graphs, the symmetrically normalized Laplacian and the
//! walk matrix `U` with `I + σ²L̃ = (σ²+1)(I − U)`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::BufRead;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bench::FlopCounter;
use crate::error::{invalid, GrfError, Result};
use crate::sparse::CsrMatrix;

/// Undirected graph in canonical sorted-CSR form. Every edge is stored in both
/// directions with identical weight; there are no self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: CsrMatrix,
    edge_count: usize,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Self { adjacency: CsrMatrix::zeros(n, n), edge_count: 0 }
    }

    /// Builds a graph from undirected edges `(a, b, w)`, each listed once.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut seen = HashMap::with_capacity(edges.len());
        let mut triplets = Vec::with_capacity(2 * edges.len());
        for (k, &(a, b, w)) in edges.iter().enumerate() {
            let line = k + 1;
            for node in [a, b] {
                if node >= n {
                    return Err(GrfError::NodeOutOfRange { node, n });
                }
            }
            if a == b {
                return Err(GrfError::SelfLoop { line, node: a });
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(GrfError::InvalidWeight { line, weight: w });
            }
            if seen.insert((a.min(b), a.max(b)), line).is_some() {
                return Err(GrfError::DuplicateEdge { line, a, b });
            }
            triplets.push((a, b, w));
            triplets.push((b, a, w));
        }
        let adjacency = CsrMatrix::from_triplets(n, n, &triplets)?;
        Ok(Self { adjacency, edge_count: edges.len() })
    }

    pub fn complete(n: usize) -> Self {
        let edges: Vec<_> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b, 1.0))).collect();
        Self::from_edges(n, &edges).expect("complete graph is well formed")
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|b| (b - 1, b, 1.0)).collect();
        Self::from_edges(n, &edges).expect("path graph is well formed")
    }

    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    /// Neighbor ids (sorted) and the matching edge weights.
    pub fn neighbors(&self, v: usize) -> (&[usize], &[f64]) {
        self.adjacency.row(v)
    }

    /// Number of neighbors of `v`.
    pub fn degree(&self, v: usize) -> usize {
        self.adjacency.row(v).0.len()
    }

    /// `deg_W(v)`: sum of incident edge weights.
    pub fn weighted_degree(&self, v: usize) -> Result<f64> {
        if v >= self.n() {
            return Err(GrfError::NodeOutOfRange { node: v, n: self.n() });
        }
        Ok(self.adjacency.row(v).1.iter().sum())
    }

    fn weighted_degrees(&self) -> Vec<f64> {
        (0..self.n()).map(|v| self.adjacency.row(v).1.iter().sum()).collect()
    }

    /// Undirected edges `(a, b, w)` with `a < b`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency.triplets().filter(|&(a, b, _)| a < b)
    }

    /// Symmetrically normalized Laplacian: unit diagonal and
    /// `-W(v,w)/sqrt(deg_W(v) deg_W(w))` on edges.
    pub fn normalized_laplacian(&self) -> CsrMatrix {
        self.laplacian_like(1.0, 1.0)
    }

    /// `I + σ² L̃`, the matrix whose inverse powers are the kernels.
    pub fn regularized_laplacian(&self, sigma2: f64) -> CsrMatrix {
        self.laplacian_like(1.0 + sigma2, sigma2)
    }

    fn laplacian_like(&self, diag: f64, off_scale: f64) -> CsrMatrix {
        let deg = self.weighted_degrees();
        let rows = (0..self.n()).map(|v| {
            let (cols, ws) = self.neighbors(v);
            let mut row: Vec<(usize, f64)> = cols
                .iter()
                .zip(ws)
                .map(|(&w, &weight)| (w, -off_scale * weight / (deg[v] * deg[w]).sqrt()))
                .collect();
            let at = row.partition_point(|&(c, _)| c < v);
            row.insert(at, (v, diag));
            row
        });
        CsrMatrix::from_rows(self.n(), rows)
    }

    /// Canonical text form: a `# nodes N` header, then `a b w` lines sorted
    /// lexicographically with 17 significant digits.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("# nodes {}\n", self.n());
        for (a, b, w) in self.edges() {
            writeln!(out, "{a} {b} {w:.16e}").unwrap();
        }
        out
    }
}

/// Parses an edge list: lines `i j [w]` with 0-indexed integer ids, `#`
/// comments, and an optional `# nodes N` directive fixing the node count.
pub fn load_edge_list<R: BufRead>(reader: R) -> Result<Graph> {
    let mut declared: Option<usize> = None;
    let mut edges = Vec::new();
    let mut lines_of = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| GrfError::Parse { line: line_no, message: e.to_string() })?;
        let text = line.trim();
        if let Some(comment) = text.strip_prefix('#') {
            let mut parts = comment.split_whitespace();
            if parts.next() == Some("nodes") {
                let n = parts.next().and_then(|t| t.parse().ok()).ok_or_else(|| GrfError::Parse {
                    line: line_no,
                    message: "malformed `# nodes` directive".into(),
                })?;
                declared = Some(n);
            }
            continue;
        }
        if text.is_empty() {
            continue;
        }
        let (a, b, w) = parse_edge_line(text, line_no, |t| t.parse::<usize>().ok())?;
        edges.push((a, b, w));
        lines_of.push(line_no);
    }
    let max_id = edges.iter().map(|&(a, b, _)| a.max(b) + 1).max().unwrap_or(0);
    let n = match declared {
        Some(n) if n < max_id => {
            return Err(GrfError::NodeOutOfRange { node: max_id - 1, n });
        }
        Some(n) => n,
        None => max_id,
    };
    Graph::from_edges(n, &edges).map_err(|e| relabel_line(e, &lines_of))
}

/// Parses an edge list with arbitrary node labels, assigning dense ids in
/// order of first appearance. Returns the graph and the id → label mapping.
pub fn load_labeled_edge_list<R: BufRead>(reader: R) -> Result<(Graph, Vec<String>)> {
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut labels = Vec::new();
    let mut edges = Vec::new();
    let mut lines_of = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| GrfError::Parse { line: line_no, message: e.to_string() })?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let mut intern = |t: &str| -> Option<usize> {
            let next = ids.len();
            Some(*ids.entry(t.to_string()).or_insert_with(|| {
                labels.push(t.to_string());
                next
            }))
        };
        let (a, b, w) = parse_edge_line(text, line_no, &mut intern)?;
        edges.push((a, b, w));
        lines_of.push(line_no);
    }
    let graph = Graph::from_edges(labels.len(), &edges).map_err(|e| relabel_line(e, &lines_of))?;
    Ok((graph, labels))
}

fn parse_edge_line(
    text: &str,
    line: usize,
    mut node: impl FnMut(&str) -> Option<usize>,
) -> Result<(usize, usize, f64)> {
    let fields: Vec<&str> = text.split_whitespace().collect();
    if !(2..=3).contains(&fields.len()) {
        return Err(GrfError::Parse { line, message: format!("expected `i j [w]`, got `{text}`") });
    }
    let bad_node = |t: &str| GrfError::Parse { line, message: format!("invalid node id `{t}`") };
    let a = node(fields[0]).ok_or_else(|| bad_node(fields[0]))?;
    let b = node(fields[1]).ok_or_else(|| bad_node(fields[1]))?;
    let w = match fields.get(2) {
        Some(t) => t
            .parse::<f64>()
            .map_err(|_| GrfError::Parse { line, message: format!("invalid weight `{t}`") })?,
        None => 1.0,
    };
    Ok((a, b, w))
}

// `Graph::from_edges` reports 1-based edge ordinals; map them to file lines.
fn relabel_line(err: GrfError, lines_of: &[usize]) -> GrfError {
    let fix = |l: usize| lines_of.get(l - 1).copied().unwrap_or(l);
    match err {
        GrfError::SelfLoop { line, node } => GrfError::SelfLoop { line: fix(line), node },
        GrfError::DuplicateEdge { line, a, b } => GrfError::DuplicateEdge { line: fix(line), a, b },
        GrfError::InvalidWeight { line, weight } => GrfError::InvalidWeight { line: fix(line), weight },
        other => other,
    }
}

/// G(n, p) random graph with unit weights. Pairs `(a, b)`, `a < b`, are
/// visited in lexicographic order and each is kept with probability `p`.
pub fn generate_erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid("p", format!("edge probability must lie in [0, 1], got {p}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random::<f64>() < p {
                edges.push((a, b, 1.0));
            }
        }
    }
    Graph::from_edges(n, &edges)
}

/// Symmetric nonnegative matrix `U` driving the random walks, together with
/// the scale `λ` such that the target system matrix is `λ(I − U)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkMatrix {
    entries: CsrMatrix,
    scale: f64,
}

impl WalkMatrix {
    pub fn new(entries: CsrMatrix, scale: f64) -> Result<Self> {
        entries.is_symmetric()?;
        if let Some(v) = entries.values().iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(invalid("u", format!("entries must be finite and nonnegative, got {v}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(invalid("scale", format!("must be positive, got {scale}")));
        }
        Ok(Self { entries, scale })
    }

    /// Convenience constructor from the upper (or lower) triangle; each
    /// triplet is mirrored.
    pub fn from_symmetric_triplets(n: usize, upper: &[(usize, usize, f64)], scale: f64) -> Result<Self> {
        let mut all = Vec::with_capacity(2 * upper.len());
        for &(a, b, v) in upper {
            all.push((a, b, v));
            if a != b {
                all.push((b, a, v));
            }
        }
        Self::new(CsrMatrix::from_triplets(n, n, &all)?, scale)
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CsrMatrix {
        &self.entries
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn row(&self, v: usize) -> (&[usize], &[f64]) {
        self.entries.row(v)
    }

    /// `λ(I − U)` as a sparse matrix.
    pub fn system_matrix(&self) -> CsrMatrix {
        let n = self.n();
        let rows = (0..n).map(|v| {
            let (cols, vals) = self.row(v);
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(cols.len() + 1);
            let mut diag_done = false;
            for (&c, &u) in cols.iter().zip(vals) {
                if c == v {
                    row.push((c, self.scale * (1.0 - u)));
                    diag_done = true;
                    continue;
                }
                if c > v && !diag_done {
                    row.push((v, self.scale));
                    diag_done = true;
                }
                row.push((c, -self.scale * u));
            }
            if !diag_done {
                row.push((v, self.scale));
            }
            row
        });
        CsrMatrix::from_rows(n, rows)
    }

    /// `y = λ(I − U) x`, charging `nnz(U) + N` multiplies.
    pub fn apply_system(&self, x: &[f64], flops: &mut FlopCounter) -> Result<Vec<f64>> {
        let ux = self.entries.matvec(x, flops)?;
        flops.add(x.len() as u64);
        Ok(x.iter().zip(ux).map(|(xi, ui)| self.scale * (xi - ui)).collect())
    }
}

/// `u_ij = σ²/(σ²+1) · W(i,j)/sqrt(deg_W(i) deg_W(j))`, with `λ = σ²+1`.
pub fn build_u_matrix(g: &Graph, sigma2: f64) -> Result<WalkMatrix> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(invalid("sigma2", format!("must be positive, got {sigma2}")));
    }
    let ratio = sigma2 / (sigma2 + 1.0);
    let deg = g.weighted_degrees();
    let rows = (0..g.n()).map(|v| {
        let (cols, ws) = g.neighbors(v);
        cols.iter().zip(ws).map(|(&w, &weight)| (w, ratio * weight / (deg[v] * deg[w]).sqrt())).collect()
    });
    Ok(WalkMatrix { entries: CsrMatrix::from_rows(g.n(), rows), scale: sigma2 + 1.0 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralRadiusReport {
    /// Power-iteration estimate of `ρ(U)`.
    pub estimate: f64,
    /// Gershgorin bound, `max_i Σ_j |u_ij|`.
    pub gershgorin_bound: f64,
}

impl SpectralRadiusReport {
    /// The larger of the two numbers; below 1 means the Neumann series converges.
    pub fn upper(&self) -> f64 {
        self.estimate.max(self.gershgorin_bound)
    }
}

pub fn spectral_radius_upper_bound(u: &WalkMatrix, iters: usize, seed: u64) -> Result<SpectralRadiusReport> {
    if iters == 0 {
        return Err(invalid("iters", "need at least one power iteration"));
    }
    let gershgorin_bound = u.entries.inf_norm();
    let n = u.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..n).map(|_| 0.5 + rng.random::<f64>()).collect();
    let mut estimate = 0.0;
    let mut flops = FlopCounter::default();
    for _ in 0..iters {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            estimate = 0.0;
            break;
        }
        x.iter_mut().for_each(|v| *v /= norm);
        let y = u.entries.matvec(&x, &mut flops)?;
        // for symmetric U, ‖Ux‖ converges to ρ(U) even when ±ρ are both eigenvalues
        estimate = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        x = y;
    }
    Ok(SpectralRadiusReport { estimate, gershgorin_bound })
}
