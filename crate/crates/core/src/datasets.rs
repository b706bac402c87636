//! Bundled graphs: Zachary's karate club and a small test corpus.

use rand::Rng;

use crate::error::Result;
use crate::graph::{generate_erdos_renyi, load_edge_list, Graph};
use crate::rng;

pub const KARATE_EDGES: &str = include_str!("../data/karate.edges");

/// Zachary's karate club: 34 nodes, 78 unit-weight edges.
pub fn karate() -> Graph {
    load_edge_list(KARATE_EDGES.as_bytes()).expect("bundled karate edge list is valid")
}

#[derive(Debug, Clone)]
pub struct CorpusGraph {
    pub name: &'static str,
    pub graph: Graph,
}

/// Six small graphs covering sizes 2 to 16, an edgeless graph, a complete
/// graph and a graph with non-unit weights.
pub fn small_corpus() -> Vec<CorpusGraph> {
    vec![
        CorpusGraph { name: "k2", graph: Graph::complete(2) },
        CorpusGraph { name: "p3", graph: Graph::path(3) },
        CorpusGraph { name: "er8", graph: er8() },
        CorpusGraph { name: "edgeless12", graph: Graph::empty(12) },
        CorpusGraph { name: "wer12", graph: weighted_erdos_renyi(12, 0.4, 12).expect("valid parameters") },
        CorpusGraph { name: "k16", graph: Graph::complete(16) },
    ]
}

/// The 8-node Erdős–Rényi graph of the corpus.
pub fn er8() -> Graph {
    generate_erdos_renyi(8, 0.5, 8).expect("valid parameters")
}

/// A connected 6-node graph with a triangle and a pendant path.
pub fn six_node() -> Graph {
    Graph::from_edges(6, &[(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0), (4, 5, 1.0), (1, 4, 1.0)])
        .expect("valid edges")
}

/// G(n, p) with weights drawn uniformly from `[0.5, 2)`.
pub fn weighted_erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph> {
    let base = generate_erdos_renyi(n, p, seed)?;
    let mut rng = rng::stream(seed, &[rng::tag::TRIAL]);
    let edges: Vec<_> = base.edges().map(|(a, b, _)| (a, b, rng.random_range(0.5..2.0))).collect();
    Graph::from_edges(n, &edges)
}
