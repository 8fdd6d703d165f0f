use ndarray::{s, Array1, Array2};

use super::RgcnSurrogate;
use crate::error::{Error, Result};
use crate::recommender::{rank_of, top_k, BlackBox, Candidates, TopKList};
use crate::subgraph::{NodeRef, Subgraph};

/// Scores the anchor user through a surrogate.
///
/// Items inside the neighborhood take their embedding from the surrogate
/// output; items outside it keep the black box's final embedding, since a
/// perturbation of the neighborhood never reaches them.
#[derive(Debug, Clone)]
pub struct LocalScorer {
    surrogate: RgcnSurrogate,
    subgraph: Subgraph,
    features: Array2<f64>,
    outside_items: Array2<f64>,
    candidates: Candidates,
    user_node: usize,
    item_nodes: Vec<Option<usize>>,
}

impl LocalScorer {
    pub fn new(blackbox: &BlackBox, subgraph: Subgraph, surrogate: RgcnSurrogate) -> Result<Self> {
        let features = local_features(blackbox, &subgraph);
        let m = blackbox.graph().num_users();
        let outside_items = blackbox.embeddings().values().slice(s![m.., ..]).to_owned();
        let candidates = blackbox.candidates(subgraph.anchor_user(), Some(subgraph.anchor_item()));
        Self::from_parts(surrogate, subgraph, features, outside_items, candidates)
    }

    /// Assembles a scorer from explicit pieces. `outside_items` holds one
    /// embedding row per global item.
    pub fn from_parts(
        surrogate: RgcnSurrogate,
        subgraph: Subgraph,
        features: Array2<f64>,
        outside_items: Array2<f64>,
        candidates: Candidates,
    ) -> Result<Self> {
        let user_node = subgraph
            .local_user(subgraph.anchor_user())
            .ok_or(Error::UnknownUser(subgraph.anchor_user() as u64))?;
        if features.nrows() != subgraph.num_nodes() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature rows for {} nodes",
                features.nrows(),
                subgraph.num_nodes()
            )));
        }
        let item_nodes = (0..outside_items.nrows()).map(|i| subgraph.local_item(i)).collect();
        Ok(Self {
            surrogate,
            subgraph,
            features,
            outside_items,
            candidates,
            user_node,
            item_nodes,
        })
    }

    pub fn surrogate(&self) -> &RgcnSurrogate {
        &self.surrogate
    }

    pub fn subgraph(&self) -> &Subgraph {
        &self.subgraph
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn candidates(&self) -> &Candidates {
        &self.candidates
    }

    pub fn num_items(&self) -> usize {
        self.outside_items.nrows()
    }

    /// Scores of the anchor user against every item, given surrogate output.
    pub fn scores(&self, output: &Array2<f64>) -> Vec<f64> {
        let h = output.row(self.user_node);
        self.item_nodes
            .iter()
            .enumerate()
            .map(|(i, node)| match node {
                Some(v) => h.dot(&output.row(*v)),
                None => h.dot(&self.outside_items.row(i)),
            })
            .collect()
    }

    pub fn evaluate(&self, mask: &[f64]) -> Result<(Array2<f64>, Vec<f64>)> {
        let out = self.surrogate.forward(mask, &self.features)?;
        let scores = self.scores(&out);
        Ok((out, scores))
    }

    pub fn rank(&self, mask: &[f64], item: usize) -> Result<usize> {
        let (_, scores) = self.evaluate(mask)?;
        rank_of(&scores, item, &self.candidates)
    }

    pub fn top_k(&self, mask: &[f64], k: usize) -> Result<TopKList> {
        let (_, scores) = self.evaluate(mask)?;
        top_k(&scores, self.subgraph.anchor_user(), k, &self.candidates)
    }

    /// `∂loss/∂output` for a loss that depends on the anchor user's scores
    /// through `score_grads` (item, `∂loss/∂score`).
    pub fn output_gradient(&self, output: &Array2<f64>, score_grads: &[(usize, f64)]) -> Array2<f64> {
        let mut g = Array2::zeros(output.dim());
        let h = output.row(self.user_node).to_owned();
        for &(item, gs) in score_grads {
            if gs == 0.0 {
                continue;
            }
            match self.item_nodes[item] {
                Some(v) => {
                    let e = output.row(v).to_owned();
                    g.row_mut(self.user_node).scaled_add(gs, &e);
                    g.row_mut(v).scaled_add(gs, &h);
                }
                None => {
                    g.row_mut(self.user_node).scaled_add(gs, &self.outside_items.row(item));
                }
            }
        }
        g
    }
}

fn local_rows(n: usize, row: impl Fn(usize) -> Array1<f64>) -> Array2<f64> {
    let rows: Vec<_> = (0..n).map(row).collect();
    let dim = rows.first().map_or(0, |r| r.len());
    let mut out = Array2::zeros((n, dim));
    for (k, r) in rows.into_iter().enumerate() {
        out.row_mut(k).assign(&r);
    }
    out
}

/// Base embeddings of the subgraph's nodes in local order.
pub(crate) fn local_features(blackbox: &BlackBox, subgraph: &Subgraph) -> Array2<f64> {
    local_rows(subgraph.num_nodes(), |v| match subgraph.global(v) {
        NodeRef::User(u) => blackbox.base_embedding(u).to_owned(),
        NodeRef::Item(i) => blackbox.base_embedding(blackbox.graph().item_node(i)).to_owned(),
    })
}

/// Final black-box embeddings of the subgraph's nodes in local order.
pub(crate) fn local_targets(blackbox: &BlackBox, subgraph: &Subgraph) -> Array2<f64> {
    local_rows_from(blackbox, subgraph, blackbox.embeddings().values())
}

/// Rows of a full embedding table for the subgraph's nodes in local order.
pub(crate) fn local_rows_from(blackbox: &BlackBox, subgraph: &Subgraph, table: &Array2<f64>) -> Array2<f64> {
    local_rows(subgraph.num_nodes(), |v| match subgraph.global(v) {
        NodeRef::User(u) => table.row(u).to_owned(),
        NodeRef::Item(i) => table.row(blackbox.graph().item_node(i)).to_owned(),
    })
}
