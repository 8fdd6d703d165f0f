//! Factual and counterfactual explanations for graph-based recommenders.
//!
//! A LightGCN black box is trained on implicit feedback. For a recommended
//! `(user, item)` pair, a small relational GCN is fitted to the black box on
//! the pair's neighborhood, and a continuous edge mask is optimized through
//! it to find the fewest interactions that either suffice to keep the item
//! in the top-k (factual) or whose removal evicts it (counterfactual).

pub mod baselines;
pub mod data;
pub mod error;
pub mod experiment;
pub mod explainer;
pub mod graph;
pub mod recommender;
pub mod subgraph;
pub mod surrogate;

pub use error::{Error, Result};
pub use explainer::{grease_explain, ExplanationResult, GreaseConfig, Method, Mode, PerturbationState};
pub use graph::{BipartiteGraph, SparseMatrix};
pub use recommender::{BlackBox, LightGcnModel, TopKList, TrainConfig};
pub use subgraph::{l_hop_subgraph, symmetrize, RelationalGraph, Subgraph};
pub use surrogate::{FidelityReport, LocalScorer, RgcnSurrogate, SurrogateConfig};
