//! Linear graph-convolution recommender (LightGCN) with dot-product scoring.
//!
//! Downstream code treats the model as a black box: it only asks for
//! propagated embeddings, scores, top-k lists and ranks.

mod blackbox;
mod checkpoint;
mod train;

use std::cmp::Ordering;

use ndarray::{Array2, ArrayView1};
use serde::Serialize;

pub use blackbox::BlackBox;
pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use train::{train_lightgcn, train_lightgcn_with_history, TrainConfig, TrainHistory};

use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, SparseMatrix};

pub const DEFAULT_LAYERS: usize = 3;

/// Base embeddings plus layer count.
///
/// Base values are kept representable as `f32` so checkpoints round-trip
/// exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct LightGcnModel {
    num_users: usize,
    num_items: usize,
    layers: usize,
    base: Array2<f64>,
}

impl LightGcnModel {
    pub fn new(num_users: usize, num_items: usize, layers: usize, base: Array2<f64>) -> Result<Self> {
        if base.nrows() != num_users + num_items {
            return Err(Error::DimensionMismatch(format!(
                "{} embedding rows for {} nodes",
                base.nrows(),
                num_users + num_items
            )));
        }
        if base.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite base embedding".into()));
        }
        let base = base.mapv(|v| v as f32 as f64);
        Ok(Self {
            num_users,
            num_items,
            layers,
            base,
        })
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn num_nodes(&self) -> usize {
        self.num_users + self.num_items
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn dim(&self) -> usize {
        self.base.ncols()
    }

    pub fn base_embeddings(&self) -> &Array2<f64> {
        &self.base
    }

    /// Layer-mean embeddings `(1/(L+1)) Σ_l Â^l E⁰` under `adjacency`.
    pub fn propagate(&self, adjacency: &SparseMatrix) -> Result<Embeddings> {
        let n = self.num_nodes();
        if adjacency.rows() != n || adjacency.cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "adjacency is {}x{}, model has {n} nodes",
                adjacency.rows(),
                adjacency.cols()
            )));
        }
        Ok(Embeddings {
            num_users: self.num_users,
            values: layer_mean(&self.base, adjacency, self.layers),
        })
    }

    pub fn score(&self, user: usize, item: usize, adjacency: &SparseMatrix) -> Result<f64> {
        self.propagate(adjacency)?.score(user, item)
    }

    /// Top-k for `user`; with `exclude_train` the user's edges in `graph`
    /// are dropped from the candidate set.
    pub fn top_k(
        &self,
        graph: &BipartiteGraph,
        user: usize,
        k: usize,
        adjacency: &SparseMatrix,
        exclude_train: bool,
    ) -> Result<TopKList> {
        let emb = self.propagate(adjacency)?;
        let candidates = Candidates::for_user(graph, user, exclude_train);
        top_k(&emb.user_scores(user)?, user, k, &candidates)
    }

    pub fn rank_of(
        &self,
        graph: &BipartiteGraph,
        user: usize,
        item: usize,
        adjacency: &SparseMatrix,
        exclude_train: bool,
    ) -> Result<usize> {
        let emb = self.propagate(adjacency)?;
        let candidates = Candidates::for_user(graph, user, exclude_train);
        rank_of(&emb.user_scores(user)?, item, &candidates)
    }
}

pub(crate) fn layer_mean(base: &Array2<f64>, adjacency: &SparseMatrix, layers: usize) -> Array2<f64> {
    let mut layer = base.clone();
    let mut acc = base.clone();
    for _ in 0..layers {
        layer = adjacency.matmul(&layer);
        acc += &layer;
    }
    acc / (layers + 1) as f64
}

/// Final node embeddings, users first.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    num_users: usize,
    values: Array2<f64>,
}

impl Embeddings {
    pub fn from_parts(num_users: usize, values: Array2<f64>) -> Self {
        Self { num_users, values }
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.values.nrows() - self.num_users
    }

    pub fn user(&self, user: usize) -> Result<ArrayView1<'_, f64>> {
        if user >= self.num_users {
            return Err(Error::UnknownUser(user as u64));
        }
        Ok(self.values.row(user))
    }

    pub fn item(&self, item: usize) -> Result<ArrayView1<'_, f64>> {
        if item >= self.num_items() {
            return Err(Error::UnknownItem(item as u64));
        }
        Ok(self.values.row(self.num_users + item))
    }

    pub fn score(&self, user: usize, item: usize) -> Result<f64> {
        Ok(self.user(user)?.dot(&self.item(item)?))
    }

    /// Scores of `user` against every item.
    pub fn user_scores(&self, user: usize) -> Result<Vec<f64>> {
        let h = self.user(user)?;
        Ok((0..self.num_items())
            .map(|i| h.dot(&self.values.row(self.num_users + i)))
            .collect())
    }
}

/// Which items may appear in a ranking.
#[derive(Debug, Clone)]
pub struct Candidates {
    excluded: Vec<bool>,
}

impl Candidates {
    pub fn all(num_items: usize) -> Self {
        Self {
            excluded: vec![false; num_items],
        }
    }

    /// Every item, minus the user's training items when `exclude_train`.
    pub fn for_user(graph: &BipartiteGraph, user: usize, exclude_train: bool) -> Self {
        let mut c = Self::all(graph.num_items());
        if exclude_train && user < graph.num_users() {
            for &i in graph.user_items(user) {
                c.excluded[i] = true;
            }
        }
        c
    }

    /// Forces `item` into the candidate set.
    pub fn keep(mut self, item: usize) -> Self {
        if item < self.excluded.len() {
            self.excluded[item] = false;
        }
        self
    }

    /// Drops `item` from the candidate set.
    pub fn without(mut self, item: usize) -> Self {
        if item < self.excluded.len() {
            self.excluded[item] = true;
        }
        self
    }

    pub fn contains(&self, item: usize) -> bool {
        item < self.excluded.len() && !self.excluded[item]
    }

    pub fn len(&self) -> usize {
        self.excluded.iter().filter(|&&x| !x).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.excluded.iter().enumerate().filter(|(_, &x)| !x).map(|(i, _)| i)
    }
}

/// Descending score, ties to the lower item index.
pub fn rank_order(scores: &[f64], a: usize, b: usize) -> Ordering {
    scores[b].total_cmp(&scores[a]).then(a.cmp(&b))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopKList {
    pub user: usize,
    pub k: usize,
    pub items: Vec<(usize, f64)>,
}

impl TopKList {
    pub fn item_ids(&self) -> Vec<usize> {
        self.items.iter().map(|&(i, _)| i).collect()
    }

    pub fn contains(&self, item: usize) -> bool {
        self.items.iter().any(|&(i, _)| i == item)
    }
}

/// Top `k` candidates by score. Shorter than `k` when candidates run out.
pub fn top_k(scores: &[f64], user: usize, k: usize, candidates: &Candidates) -> Result<TopKList> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let mut pool: Vec<usize> = candidates.iter().filter(|&i| i < scores.len()).collect();
    let cmp = |&a: &usize, &b: &usize| rank_order(scores, a, b);
    if pool.len() > k {
        pool.select_nth_unstable_by(k - 1, cmp);
        pool.truncate(k);
    }
    pool.sort_unstable_by(cmp);
    Ok(TopKList {
        user,
        k,
        items: pool.into_iter().map(|i| (i, scores[i])).collect(),
    })
}

/// 1-based position of `item` among the candidates.
pub fn rank_of(scores: &[f64], item: usize, candidates: &Candidates) -> Result<usize> {
    if !candidates.contains(item) || item >= scores.len() {
        return Err(Error::NotACandidate(item));
    }
    let ahead = candidates
        .iter()
        .filter(|&j| j < scores.len() && rank_order(scores, j, item) == Ordering::Less)
        .count();
    Ok(ahead + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn top_k_sorts() {
        let s = [0.9, 0.1, 0.5];
        let t = top_k(&s, 0, 2, &Candidates::all(3)).unwrap();
        assert_eq!(t.item_ids(), vec![0, 2]);
    }

    #[test]
    fn top_k_tie_goes_to_lower_id() {
        let s = [0.0, 0.5, 0.5];
        let t = top_k(&s, 0, 1, &Candidates::all(3)).unwrap();
        assert_eq!(t.item_ids(), vec![1]);
    }

    #[test]
    fn top_k_truncates_to_candidates() {
        let s = [0.3, 0.2, 0.1];
        let t = top_k(&s, 0, 10, &Candidates::all(3)).unwrap();
        assert_eq!(t.item_ids(), vec![0, 1, 2]);
        assert!(top_k(&s, 0, 0, &Candidates::all(3)).is_err());
    }

    #[test]
    fn rank_extremes() {
        let s = [0.1, 0.9, 0.5, 0.3, 0.2];
        let c = Candidates::all(5);
        assert_eq!(rank_of(&s, 1, &c).unwrap(), 1);
        assert_eq!(rank_of(&s, 0, &c).unwrap(), 5);
    }

    #[test]
    fn rank_of_excluded_is_error() {
        let g = BipartiteGraph::from_index_edges(1, 3, [(0, 0)]).unwrap();
        let c = Candidates::for_user(&g, 0, true);
        assert!(matches!(rank_of(&[1.0, 0.0, 0.0], 0, &c), Err(Error::NotACandidate(0))));
        let c = c.keep(0);
        assert_eq!(rank_of(&[1.0, 0.0, 0.0], 0, &c).unwrap(), 1);
    }

    #[test]
    fn zero_adjacency_scales_base() {
        let base = arr2(&[[1.0, 2.0], [3.0, -4.0]]);
        let m = LightGcnModel::new(1, 1, 3, base.clone()).unwrap();
        let out = m.propagate(&SparseMatrix::zeros(2, 2)).unwrap();
        assert_eq!(out.values(), &(base / 4.0));
    }

    #[test]
    fn self_loop_is_fixed_point() {
        let base = arr2(&[[0.5, -1.5], [2.0, 0.25]]);
        let m = LightGcnModel::new(1, 1, 3, base.clone()).unwrap();
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0)]);
        let out = m.propagate(&a).unwrap();
        assert_eq!(out.values().row(0), base.row(0));
    }

    #[test]
    fn two_node_hand_computed() {
        // Â = [[0,1],[1,0]], L = 2: mean(E, ÂE, E) = [(2e0+e1)/3, (2e1+e0)/3]
        let base = arr2(&[[1.0, 0.0], [0.0, 3.0]]);
        let m = LightGcnModel::new(1, 1, 2, base).unwrap();
        let g = BipartiteGraph::from_index_edges(1, 1, [(0, 0)]).unwrap();
        let out = m.propagate(&g.normalized_adjacency()).unwrap();
        let expect = arr2(&[[2.0 / 3.0, 1.0], [1.0 / 3.0, 2.0]]);
        assert!((out.values() - &expect).iter().all(|d| d.abs() < 1e-12));
        // h_u·h_i = 2/9 + 2
        assert!((out.score(0, 0).unwrap() - (2.0 / 9.0 + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_and_unit_scores() {
        let e = Embeddings::from_parts(1, arr2(&[[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]));
        assert_eq!(e.score(0, 0).unwrap(), 0.0);
        assert_eq!(e.score(0, 1).unwrap(), 1.0);
        assert!(matches!(e.score(3, 0), Err(Error::UnknownUser(3))));
    }

    #[test]
    fn propagate_checks_shape() {
        let m = LightGcnModel::new(1, 1, 3, Array2::zeros((2, 2))).unwrap();
        assert!(matches!(
            m.propagate(&SparseMatrix::zeros(3, 3)),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
