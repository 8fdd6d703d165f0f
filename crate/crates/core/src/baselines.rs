//! Greedy edge-flipping explainers: PersonalRank-ordered and random.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::explainer::{
    check_preconditions, evaluate_mask, perturbable_edges, start_mask, ExplanationResult, Method, Mode,
};
use crate::subgraph::Subgraph;
use crate::surrogate::LocalScorer;

pub const DEFAULT_RESTART: f64 = 0.15;
pub const DEFAULT_PR_ITERATIONS: usize = 100;
const PR_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PersonalRankScores {
    pub scores: Vec<f64>,
    pub restart: f64,
    pub iterations: usize,
    pub anchor: usize,
}

/// Personalized PageRank on an undirected graph given as neighbor lists.
///
/// Iterates `s ← (1−α)·W s + α·e_anchor` from `e_anchor`, with `W` the
/// column-normalized adjacency; the walk mass sitting on a node without
/// neighbors jumps back to the anchor. Stops after `max_iters` steps or once
/// the L1 change drops below 1e-8.
pub fn personal_rank(
    neighbors: &[Vec<usize>],
    anchor: usize,
    restart: f64,
    max_iters: usize,
) -> Result<PersonalRankScores> {
    if !(restart > 0.0 && restart < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "restart probability {restart} not in (0, 1)"
        )));
    }
    let n = neighbors.len();
    if anchor >= n {
        return Err(Error::InvalidParameter(format!("anchor {anchor} outside {n} nodes")));
    }
    let mut s = vec![0.0; n];
    s[anchor] = 1.0;
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    while iterations < max_iters {
        next.iter_mut().for_each(|x| *x = 0.0);
        let mut dangling = 0.0;
        for (w, nbrs) in neighbors.iter().enumerate() {
            if nbrs.is_empty() {
                dangling += s[w];
                continue;
            }
            let share = s[w] / nbrs.len() as f64;
            for &v in nbrs {
                next[v] += share;
            }
        }
        next[anchor] += dangling;
        for x in next.iter_mut() {
            *x *= 1.0 - restart;
        }
        next[anchor] += restart;
        let change: f64 = s.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut s, &mut next);
        iterations += 1;
        if change < PR_TOLERANCE {
            break;
        }
    }
    Ok(PersonalRankScores {
        scores: s,
        restart,
        iterations,
        anchor,
    })
}

/// Neighbor lists of the subgraph in local node numbering.
pub fn local_neighbors(subgraph: &Subgraph) -> Vec<Vec<usize>> {
    let mut nbrs = vec![Vec::new(); subgraph.num_nodes()];
    for &(u, i) in subgraph.local_edges() {
        nbrs[u].push(i);
        nbrs[i].push(u);
    }
    nbrs
}

fn bfs_distances(neighbors: &[Vec<usize>], source: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; neighbors.len()];
    dist[source] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(v) = queue.pop_front() {
        for &w in &neighbors[v] {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Perturbable edges ordered by the PersonalRank score (anchored at the
/// anchor user) of their non-anchor endpoint, highest first. Edges touching
/// neither anchor use the endpoint farther from the anchor user. Ties go to
/// the lower node number.
pub fn personalrank_order(subgraph: &Subgraph, mode: Mode, restart: f64) -> Result<Vec<usize>> {
    let nbrs = local_neighbors(subgraph);
    let anchor = subgraph
        .local_user(subgraph.anchor_user())
        .ok_or(Error::UnknownUser(subgraph.anchor_user() as u64))?;
    let pr = personal_rank(&nbrs, anchor, restart, DEFAULT_PR_ITERATIONS)?;
    let dist = bfs_distances(&nbrs, anchor);
    let target = subgraph.local_item(subgraph.anchor_item());
    let free = perturbable_edges(subgraph, mode);
    let mut keyed: Vec<(usize, usize)> = subgraph
        .local_edges()
        .iter()
        .enumerate()
        .filter(|(e, _)| free[*e])
        .map(|(e, &(u, i))| {
            // on a tie in distance the item side is taken
            let key = if (Some(i) == target && u != anchor) || dist[u] > dist[i] {
                u
            } else {
                i
            };
            (e, key)
        })
        .collect();
    keyed.sort_by(|a, b| {
        pr.scores[b.1]
            .total_cmp(&pr.scores[a.1])
            .then(a.1.cmp(&b.1))
            .then(a.0.cmp(&b.0))
    });
    Ok(keyed.into_iter().map(|(e, _)| e).collect())
}

/// Flips edges in `order` one at a time, up to `budget`, and returns the
/// first mask that meets the mode's goal.
pub fn flip_until_success(
    scorer: &LocalScorer,
    method: Method,
    mode: Mode,
    k: usize,
    budget: usize,
    order: &[usize],
) -> Result<Option<ExplanationResult>> {
    check_preconditions(scorer, mode, k)?;
    let item = scorer.subgraph().anchor_item();
    let mut mask = start_mask(scorer.subgraph(), mode);
    for (flips, &e) in order.iter().take(budget).enumerate() {
        mask[e] = 1.0 - mask[e];
        let rank = scorer.rank(&mask, item)?;
        if mode.is_success(rank, k) {
            return evaluate_mask(scorer, method, mode, k, mask, flips + 1).map(Some);
        }
    }
    Ok(None)
}

pub fn personalrank_explain(
    scorer: &LocalScorer,
    mode: Mode,
    k: usize,
    budget: usize,
    restart: f64,
) -> Result<Option<ExplanationResult>> {
    let order = personalrank_order(scorer.subgraph(), mode, restart)?;
    flip_until_success(scorer, Method::PersonalRank, mode, k, budget, &order)
}

pub fn random_explain(
    scorer: &LocalScorer,
    mode: Mode,
    k: usize,
    budget: usize,
    seed: u64,
) -> Result<Option<ExplanationResult>> {
    let free = perturbable_edges(scorer.subgraph(), mode);
    let mut order: Vec<usize> = (0..free.len()).filter(|&e| free[e]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    flip_until_success(scorer, Method::Random, mode, k, budget, &order)
}
