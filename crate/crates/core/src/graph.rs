//! User–item interaction graph and the sparse operators built from it.
//!
//! Users are indexed `0..m` and items `0..n`. Whenever a matrix spans the
//! whole node set, users occupy rows `0..m` and items occupy `m..m + n`.

use std::collections::HashMap;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Immutable bipartite graph of implicit-feedback interactions.
#[derive(Debug, Clone)]
pub struct BipartiteGraph {
    user_ids: Vec<u64>,
    item_ids: Vec<u64>,
    user_lookup: HashMap<u64, usize>,
    item_lookup: HashMap<u64, usize>,
    edges: Vec<(usize, usize)>,
    user_items: Vec<Vec<usize>>,
    item_users: Vec<Vec<usize>>,
}

impl BipartiteGraph {
    /// Builds a graph from raw `(user_id, item_id)` pairs.
    ///
    /// Duplicates collapse to one edge; indices are handed out in
    /// first-seen order.
    pub fn from_interactions(interactions: &[(u64, u64)]) -> Result<Self> {
        if interactions.is_empty() {
            return Err(Error::EmptyInteractions);
        }
        let mut user_ids = Vec::new();
        let mut item_ids = Vec::new();
        let mut user_lookup = HashMap::new();
        let mut item_lookup = HashMap::new();
        let mut pairs = Vec::with_capacity(interactions.len());
        for &(user, item) in interactions {
            let u = *user_lookup.entry(user).or_insert_with(|| {
                user_ids.push(user);
                user_ids.len() - 1
            });
            let i = *item_lookup.entry(item).or_insert_with(|| {
                item_ids.push(item);
                item_ids.len() - 1
            });
            pairs.push((u, i));
        }
        Ok(Self::assemble(user_ids, item_ids, user_lookup, item_lookup, pairs))
    }

    /// Builds a graph over fixed index spaces `0..num_users` and
    /// `0..num_items`, where ids equal indices. Nodes without edges are kept.
    pub fn from_index_edges(
        num_users: usize,
        num_items: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let pairs: Vec<(usize, usize)> = edges.into_iter().collect();
        if pairs.is_empty() {
            return Err(Error::EmptyInteractions);
        }
        for &(u, i) in &pairs {
            if u >= num_users {
                return Err(Error::UnknownUser(u as u64));
            }
            if i >= num_items {
                return Err(Error::UnknownItem(i as u64));
            }
        }
        let user_ids: Vec<u64> = (0..num_users as u64).collect();
        let item_ids: Vec<u64> = (0..num_items as u64).collect();
        let user_lookup = user_ids.iter().map(|&id| (id, id as usize)).collect();
        let item_lookup = item_ids.iter().map(|&id| (id, id as usize)).collect();
        Ok(Self::assemble(user_ids, item_ids, user_lookup, item_lookup, pairs))
    }

    fn assemble(
        user_ids: Vec<u64>,
        item_ids: Vec<u64>,
        user_lookup: HashMap<u64, usize>,
        item_lookup: HashMap<u64, usize>,
        mut edges: Vec<(usize, usize)>,
    ) -> Self {
        edges.sort_unstable();
        edges.dedup();
        let mut user_items = vec![Vec::new(); user_ids.len()];
        let mut item_users = vec![Vec::new(); item_ids.len()];
        for &(u, i) in &edges {
            user_items[u].push(i);
            item_users[i].push(u);
        }
        // edges are sorted by (u, i), so both lists come out ascending
        Self {
            user_ids,
            item_ids,
            user_lookup,
            item_lookup,
            edges,
            user_items,
            item_users,
        }
    }

    pub fn num_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn num_items(&self) -> usize {
        self.item_ids.len()
    }

    /// `m + n`.
    pub fn num_nodes(&self) -> usize {
        self.num_users() + self.num_items()
    }

    /// All edges as `(user, item)` index pairs, ascending.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, user: usize, item: usize) -> bool {
        self.user_items
            .get(user)
            .is_some_and(|items| items.binary_search(&item).is_ok())
    }

    /// Items of `user`, ascending.
    pub fn user_items(&self, user: usize) -> &[usize] {
        &self.user_items[user]
    }

    /// Users of `item`, ascending.
    pub fn item_users(&self, item: usize) -> &[usize] {
        &self.item_users[item]
    }

    pub fn user_degree(&self, user: usize) -> usize {
        self.user_items[user].len()
    }

    pub fn item_degree(&self, item: usize) -> usize {
        self.item_users[item].len()
    }

    pub fn user_degrees(&self) -> Vec<usize> {
        self.user_items.iter().map(Vec::len).collect()
    }

    pub fn item_degrees(&self) -> Vec<usize> {
        self.item_users.iter().map(Vec::len).collect()
    }

    pub fn user_id(&self, user: usize) -> u64 {
        self.user_ids[user]
    }

    pub fn item_id(&self, item: usize) -> u64 {
        self.item_ids[item]
    }

    pub fn user_index(&self, id: u64) -> Result<usize> {
        self.user_lookup.get(&id).copied().ok_or(Error::UnknownUser(id))
    }

    pub fn item_index(&self, id: u64) -> Result<usize> {
        self.item_lookup.get(&id).copied().ok_or(Error::UnknownItem(id))
    }

    /// Position of `item` in the unified node space.
    pub fn item_node(&self, item: usize) -> usize {
        self.num_users() + item
    }

    /// Neighbors of a unified node.
    pub fn node_neighbors(&self, node: usize) -> Box<dyn Iterator<Item = usize> + '_> {
        let m = self.num_users();
        if node < m {
            Box::new(self.user_items[node].iter().map(move |&i| m + i))
        } else {
            Box::new(self.item_users[node - m].iter().copied())
        }
    }

    /// Dense 0/1 user×item matrix. Only sensible for small graphs.
    pub fn dense_adjacency(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.num_users(), self.num_items()));
        for &(u, i) in &self.edges {
            a[[u, i]] = 1.0;
        }
        a
    }

    /// Symmetrically normalized `(m+n)×(m+n)` propagation operator.
    pub fn normalized_adjacency(&self) -> SparseMatrix {
        normalized_adjacency_from_edges(self.num_users(), self.num_items(), &self.edges)
    }
}

/// Builds the symmetric normalized operator for an arbitrary edge list over
/// `num_users + num_items` nodes: entry `(v, w) = 1/sqrt(deg(v) deg(w))`.
/// Isolated nodes get an all-zero row.
pub fn normalized_adjacency_from_edges(num_users: usize, num_items: usize, edges: &[(usize, usize)]) -> SparseMatrix {
    let n = num_users + num_items;
    let mut degree = vec![0usize; n];
    for &(u, i) in edges {
        degree[u] += 1;
        degree[num_users + i] += 1;
    }
    let inv_sqrt: Vec<f64> = degree
        .iter()
        .map(|&d| if d == 0 { 0.0 } else { 1.0 / (d as f64).sqrt() })
        .collect();
    let mut triplets = Vec::with_capacity(edges.len() * 2);
    for &(u, i) in edges {
        let w = num_users + i;
        let value = inv_sqrt[u] * inv_sqrt[w];
        triplets.push((u, w, value));
        triplets.push((w, u, value));
    }
    SparseMatrix::from_triplets(n, n, triplets)
}

/// Compressed sparse row matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Duplicate coordinates are summed.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < rows && c < cols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().expect("non-empty") += v;
                continue;
            }
            indices.push(c);
            values.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_triplets(rows, cols, Vec::new())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let span = self.indptr[row]..self.indptr[row + 1];
        match self.indices[span.clone()].binary_search(&col) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    /// Non-zero `(col, value)` pairs of one row.
    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[row]..self.indptr[row + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols && self.triplets().all(|(r, c, v)| (self.get(c, r) - v).abs() <= tol)
    }

    /// `self · dense`.
    pub fn matmul(&self, dense: &Array2<f64>) -> Array2<f64> {
        assert_eq!(self.cols, dense.nrows(), "sparse·dense shape mismatch");
        let mut out = Array2::zeros((self.rows, dense.ncols()));
        for r in 0..self.rows {
            let mut out_row = out.row_mut(r);
            for (c, v) in self.row(r) {
                out_row.scaled_add(v, &dense.row(c));
            }
        }
        out
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.rows, self.cols));
        for (r, c, v) in self.triplets() {
            a[[r, c]] = v;
        }
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builds_small_graph() {
        let g = BipartiteGraph::from_interactions(&[(0, 0), (0, 1), (1, 1)]).unwrap();
        assert_eq!(g.num_users(), 2);
        assert_eq!(g.num_items(), 2);
        assert_eq!(g.num_edges(), 3);
        assert_eq!(g.dense_adjacency(), ndarray::arr2(&[[1.0, 1.0], [0.0, 1.0]]));
        assert_eq!(g.user_degrees(), vec![2, 1]);
        assert_eq!(g.item_degrees(), vec![1, 2]);
    }

    #[test]
    fn collapses_duplicates() {
        let g = BipartiteGraph::from_interactions(&[(0, 0), (0, 0)]).unwrap();
        assert_eq!(g.num_edges(), 1);
    }

    #[test]
    fn empty_is_error() {
        assert!(matches!(
            BipartiteGraph::from_interactions(&[]),
            Err(Error::EmptyInteractions)
        ));
    }

    #[test]
    fn first_seen_index_order() {
        let g = BipartiteGraph::from_interactions(&[(42, 7), (3, 9), (42, 9)]).unwrap();
        assert_eq!(g.user_index(42).unwrap(), 0);
        assert_eq!(g.user_index(3).unwrap(), 1);
        assert_eq!(g.item_index(9).unwrap(), 1);
        assert_eq!(g.item_id(0), 7);
        assert!(g.has_edge(0, 1));
        assert!(!g.has_edge(1, 0));
        assert!(matches!(g.user_index(5), Err(Error::UnknownUser(5))));
    }

    #[test]
    fn normalized_single_edge() {
        let g = BipartiteGraph::from_interactions(&[(0, 0)]).unwrap();
        let a = g.normalized_adjacency();
        assert_eq!(a.get(0, 1), 1.0);
        assert_eq!(a.get(1, 0), 1.0);
    }

    #[test]
    fn normalized_degree_formula() {
        let g = BipartiteGraph::from_interactions(&[(0, 0), (0, 1)]).unwrap();
        let a = g.normalized_adjacency();
        assert!((a.get(0, 1) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-8);
        assert!(a.is_symmetric(0.0));
    }

    #[test]
    fn isolated_rows_are_zero() {
        let g = BipartiteGraph::from_index_edges(2, 2, [(0, 0)]).unwrap();
        let a = g.normalized_adjacency().to_dense();
        assert!(a.row(1).iter().all(|&v| v == 0.0));
        assert!(a.row(3).iter().all(|&v| v == 0.0));
        assert!(a.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn sparse_matmul_matches_dense() {
        let s = SparseMatrix::from_triplets(2, 3, vec![(0, 2, 2.0), (1, 0, -1.0), (0, 2, 1.0)]);
        let d = ndarray::arr2(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]);
        assert_eq!(s.matmul(&d), s.to_dense().dot(&d));
        assert_eq!(s.get(0, 2), 3.0);
    }
}
