#![allow(dead_code)]

pub mod fd;
pub mod oracle;
pub mod pr;

use cfrec_core::recommender::Candidates;
use cfrec_core::surrogate::RgcnLayer;
use cfrec_core::{l_hop_subgraph, symmetrize, BipartiteGraph, LocalScorer, RgcnSurrogate, Subgraph};
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize, std: f64) -> Array2<f64> {
    let normal = Normal::new(0.0, std).unwrap();
    Array2::from_shape_fn((rows, cols), |_| normal.sample(rng))
}

pub fn random_layer(rng: &mut ChaCha8Rng, input: usize, output: usize, std: f64) -> RgcnLayer {
    RgcnLayer {
        item_to_user: gaussian(rng, input, output, std),
        user_to_item: gaussian(rng, input, output, std),
        self_loop: gaussian(rng, input, output, std),
    }
}

/// Random bipartite graph with every user and item on at least one edge.
pub fn random_graph(rng: &mut ChaCha8Rng, users: usize, items: usize, max_edges: usize) -> BipartiteGraph {
    let mut edges = Vec::new();
    for u in 0..users {
        edges.push((u, rng.random_range(0..items)));
    }
    for i in 0..items {
        edges.push((rng.random_range(0..users), i));
    }
    while edges.len() < max_edges {
        edges.push((rng.random_range(0..users), rng.random_range(0..items)));
    }
    edges.sort_unstable();
    edges.dedup();
    edges.truncate(max_edges);
    BipartiteGraph::from_index_edges(users, items, edges).unwrap()
}

/// A small scorer with random surrogate weights. Every item is a candidate.
pub struct Instance {
    pub graph: BipartiteGraph,
    pub scorer: LocalScorer,
    /// Embedding rows used for items outside the neighborhood.
    pub outside: Array2<f64>,
}

pub fn random_instance(
    rng: &mut ChaCha8Rng,
    users: usize,
    items: usize,
    max_edges: usize,
    dims: (usize, usize, usize),
    user: usize,
    item: usize,
) -> Instance {
    let graph = random_graph(rng, users, items, max_edges);
    let (scorer, outside) = scorer_for(rng, &graph, user, item, dims);
    Instance { graph, scorer, outside }
}

pub fn scorer_for(
    rng: &mut ChaCha8Rng,
    graph: &BipartiteGraph,
    user: usize,
    item: usize,
    (d_in, d_hidden, d_out): (usize, usize, usize),
) -> (LocalScorer, Array2<f64>) {
    let sg = l_hop_subgraph(graph, user, item, 2).unwrap();
    let surrogate = RgcnSurrogate::new(
        symmetrize(&sg),
        random_layer(rng, d_in, d_hidden, 0.6),
        random_layer(rng, d_hidden, d_out, 0.6),
    )
    .unwrap();
    let features = gaussian(rng, sg.num_nodes(), d_in, 1.0);
    let outside = gaussian(rng, graph.num_items(), d_out, 1.0);
    let scorer = LocalScorer::from_parts(
        surrogate,
        sg,
        features,
        outside.clone(),
        Candidates::all(graph.num_items()),
    )
    .unwrap();
    (scorer, outside)
}

/// Surrogate forward pass written out edge by edge, independent of the
/// library's matrix formulation.
pub fn naive_forward(scorer: &LocalScorer, mask: &[f64]) -> Array2<f64> {
    let s = scorer.surrogate();
    let sg = scorer.subgraph();
    let hidden = naive_layer(sg, s.hidden_layer(), mask, scorer.features()).mapv(f64::tanh);
    naive_layer(sg, s.output_layer(), mask, &hidden)
}

fn naive_layer(sg: &Subgraph, layer: &RgcnLayer, mask: &[f64], input: &Array2<f64>) -> Array2<f64> {
    let n = sg.num_nodes();
    let out_dim = layer.self_loop.ncols();
    let mut degree = vec![0usize; n];
    for &(u, i) in sg.local_edges() {
        degree[u] += 1;
        degree[i] += 1;
    }
    let mut out = Array2::zeros((n, out_dim));
    for v in 0..n {
        for c in 0..out_dim {
            let mut acc = 0.0;
            for r in 0..input.ncols() {
                acc += input[[v, r]] * layer.self_loop[[r, c]];
            }
            for (e, &(u, i)) in sg.local_edges().iter().enumerate() {
                let (src, w) = if v == u {
                    (i, &layer.item_to_user)
                } else if v == i {
                    (u, &layer.user_to_item)
                } else {
                    continue;
                };
                for r in 0..input.ncols() {
                    acc += mask[e] / degree[v] as f64 * input[[src, r]] * w[[r, c]];
                }
            }
            out[[v, c]] = acc;
        }
    }
    out
}

/// Anchor-user scores from a naive forward pass. Items outside the
/// scorer's candidate set score negative infinity.
pub fn naive_scores(inst: &Instance, mask: &[f64]) -> Vec<f64> {
    let (scorer, outside) = (&inst.scorer, &inst.outside);
    let out = naive_forward(scorer, mask);
    let sg = scorer.subgraph();
    let u = sg.local_user(sg.anchor_user()).unwrap();
    let candidates = scorer.candidates();
    (0..outside.nrows())
        .map(|i| {
            if !candidates.contains(i) {
                return f64::NEG_INFINITY;
            }
            let e = match sg.local_item(i) {
                Some(li) => out.row(li).to_owned(),
                None => outside.row(i).to_owned(),
            };
            out.row(u).dot(&e)
        })
        .collect()
}

/// 1-based rank among all items; ties go to the lower index.
pub fn naive_rank(scores: &[f64], item: usize) -> usize {
    1 + scores
        .iter()
        .enumerate()
        .filter(|&(j, &s)| j != item && (s > scores[item] || (s == scores[item] && j < item)))
        .count()
}
