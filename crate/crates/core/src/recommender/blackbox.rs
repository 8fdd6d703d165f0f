use ndarray::ArrayView1;

use super::{rank_of, top_k, Candidates, Embeddings, LightGcnModel, TopKList};
use crate::error::{Error, Result};
use crate::graph::{normalized_adjacency_from_edges, BipartiteGraph, SparseMatrix};

/// A trained model bound to its training graph.
///
/// Rankings always exclude the user's training items; the item being
/// ranked is kept as a candidate.
#[derive(Debug, Clone)]
pub struct BlackBox {
    model: LightGcnModel,
    graph: BipartiteGraph,
    adjacency: SparseMatrix,
    embeddings: Embeddings,
}

impl BlackBox {
    pub fn new(model: LightGcnModel, graph: BipartiteGraph) -> Result<Self> {
        if model.num_users() != graph.num_users() || model.num_items() != graph.num_items() {
            return Err(Error::DimensionMismatch(format!(
                "model is {}x{}, graph is {}x{}",
                model.num_users(),
                model.num_items(),
                graph.num_users(),
                graph.num_items()
            )));
        }
        let adjacency = graph.normalized_adjacency();
        let embeddings = model.propagate(&adjacency)?;
        Ok(Self {
            model,
            graph,
            adjacency,
            embeddings,
        })
    }

    pub fn model(&self) -> &LightGcnModel {
        &self.model
    }

    pub fn graph(&self) -> &BipartiteGraph {
        &self.graph
    }

    pub fn adjacency(&self) -> &SparseMatrix {
        &self.adjacency
    }

    pub fn embeddings(&self) -> &Embeddings {
        &self.embeddings
    }

    pub fn base_embedding(&self, node: usize) -> ArrayView1<'_, f64> {
        self.model.base_embeddings().row(node)
    }

    pub fn final_embedding(&self, node: usize) -> ArrayView1<'_, f64> {
        self.embeddings.values().row(node)
    }

    pub fn candidates(&self, user: usize, keep: Option<usize>) -> Candidates {
        let c = Candidates::for_user(&self.graph, user, true);
        match keep {
            Some(item) => c.keep(item),
            None => c,
        }
    }

    pub fn top_k(&self, user: usize, k: usize) -> Result<TopKList> {
        top_k(
            &self.embeddings.user_scores(user)?,
            user,
            k,
            &self.candidates(user, None),
        )
    }

    pub fn rank_of(&self, user: usize, item: usize) -> Result<usize> {
        rank_of(
            &self.embeddings.user_scores(user)?,
            item,
            &self.candidates(user, Some(item)),
        )
    }

    /// Embeddings after deleting `removed` from the training graph. The
    /// operator is renormalized with the new degrees.
    pub fn embeddings_without(&self, removed: &[(usize, usize)]) -> Result<Embeddings> {
        if removed.is_empty() {
            return Ok(self.embeddings.clone());
        }
        let mut drop = removed.to_vec();
        drop.sort_unstable();
        let kept: Vec<(usize, usize)> = self
            .graph
            .edges()
            .iter()
            .copied()
            .filter(|e| drop.binary_search(e).is_err())
            .collect();
        let adjacency = normalized_adjacency_from_edges(self.graph.num_users(), self.graph.num_items(), &kept);
        self.model.propagate(&adjacency)
    }

    /// Rank of `item` for `user` once `removed` is deleted.
    pub fn rank_without(&self, user: usize, item: usize, removed: &[(usize, usize)]) -> Result<usize> {
        let emb = self.embeddings_without(removed)?;
        rank_of(&emb.user_scores(user)?, item, &self.candidates(user, Some(item)))
    }
}
