//! Edge-mask search for factual and counterfactual explanations.

mod grease;
mod loss;
mod mask;

use serde::{Deserialize, Serialize};

pub use grease::{grease_explain, loss_and_gradient, GreaseConfig};
pub use loss::{cf_loss, explanation_loss, fa_loss, relaxed_indicator};
pub use mask::{binarize, dist_loss, sigmoid, PerturbationState};

use crate::error::{Error, Result};
use crate::subgraph::Subgraph;
use crate::surrogate::LocalScorer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    /// Smallest set of anchor interactions that alone keeps the item in the
    /// top-k.
    #[serde(rename = "FA")]
    Factual,
    /// Smallest set of interactions whose removal evicts the item.
    #[serde(rename = "CF")]
    Counterfactual,
}

impl Mode {
    /// Edge budget used when none is given: 6 additions, 10 deletions.
    pub fn default_budget(self) -> usize {
        match self {
            Mode::Factual => 6,
            Mode::Counterfactual => 10,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Factual => "FA",
            Mode::Counterfactual => "CF",
        }
    }

    /// Whether `rank` meets the goal of this mode.
    pub fn is_success(self, rank: usize, k: usize) -> bool {
        match self {
            Mode::Factual => rank <= k,
            Mode::Counterfactual => rank > k,
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fa" | "factual" => Ok(Mode::Factual),
            "cf" | "counterfactual" => Ok(Mode::Counterfactual),
            other => Err(Error::InvalidParameter(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Grease,
    PersonalRank,
    Random,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Grease, Method::PersonalRank, Method::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Grease => "grease",
            Method::PersonalRank => "personalrank",
            Method::Random => "random",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "grease" => Ok(Method::Grease),
            "personalrank" => Ok(Method::PersonalRank),
            "random" => Ok(Method::Random),
            other => Err(Error::InvalidParameter(format!("unknown method {other:?}"))),
        }
    }
}

/// Outcome of one successful explanation search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplanationResult {
    pub method: Method,
    pub mode: Mode,
    /// Re-added edges (factual) or deleted edges (counterfactual), as global
    /// `(user, item)` indices.
    pub edges: Vec<(usize, usize)>,
    /// Binary mask over the subgraph edges.
    #[serde(skip)]
    pub mask: Vec<f64>,
    pub cost: usize,
    pub rank: usize,
    pub score: f64,
    pub valid: bool,
    /// Iteration (GREASE) or flip count (baselines) at which the result was
    /// found.
    pub iterations: usize,
    #[serde(skip)]
    pub loss_trace: Vec<f64>,
}

impl ExplanationResult {
    /// Edges of the training graph that are absent under this explanation.
    pub fn removed_edges(&self, subgraph: &Subgraph) -> Vec<(usize, usize)> {
        removed_edges(subgraph, &self.mask)
    }
}

/// Edges of `subgraph` switched off by a binary `mask`.
pub fn removed_edges(subgraph: &Subgraph, mask: &[f64]) -> Vec<(usize, usize)> {
    subgraph
        .edges()
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m < 0.5)
        .map(|(&e, _)| e)
        .collect()
}

/// Edges an explainer may flip: every subgraph edge for counterfactuals,
/// only edges touching the anchor user or item for factuals.
pub fn perturbable_edges(subgraph: &Subgraph, mode: Mode) -> Vec<bool> {
    (0..subgraph.num_edges())
        .map(|e| match mode {
            Mode::Counterfactual => true,
            Mode::Factual => subgraph.is_anchor_edge(e),
        })
        .collect()
}

/// Binary mask every search starts from: the full neighborhood for
/// counterfactuals, the neighborhood minus all anchor edges for factuals.
pub fn start_mask(subgraph: &Subgraph, mode: Mode) -> Vec<f64> {
    perturbable_edges(subgraph, mode)
        .into_iter()
        .map(|p| match mode {
            Mode::Factual if p => 0.0,
            _ => 1.0,
        })
        .collect()
}

/// Shared entry checks for all explainers.
pub fn check_preconditions(scorer: &LocalScorer, mode: Mode, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let item = scorer.subgraph().anchor_item();
    if !scorer.candidates().contains(item) {
        return Err(Error::NotACandidate(item));
    }
    if mode == Mode::Counterfactual {
        let rank = scorer.rank(&scorer.surrogate().full_mask(), item)?;
        if rank > k {
            return Err(Error::InvalidParameter(format!(
                "item {item} is ranked {rank}, outside the top-{k} it should be evicted from"
            )));
        }
    }
    Ok(())
}

/// Re-scores a binary mask through the scorer and fills in a result.
pub(crate) fn evaluate_mask(
    scorer: &LocalScorer,
    method: Method,
    mode: Mode,
    k: usize,
    mask: Vec<f64>,
    iterations: usize,
) -> Result<ExplanationResult> {
    let subgraph = scorer.subgraph();
    let item = subgraph.anchor_item();
    let (_, scores) = scorer.evaluate(&mask)?;
    let rank = crate::recommender::rank_of(&scores, item, scorer.candidates())?;
    let start = start_mask(subgraph, mode);
    let edges: Vec<(usize, usize)> = subgraph
        .edges()
        .iter()
        .zip(mask.iter().zip(&start))
        .filter(|(_, (m, s))| m != s)
        .map(|(&e, _)| e)
        .collect();
    Ok(ExplanationResult {
        method,
        mode,
        cost: edges.len(),
        edges,
        mask,
        rank,
        score: scores[item],
        valid: mode.is_success(rank, k),
        iterations,
        loss_trace: Vec::new(),
    })
}

/// Re-checks a result against the scorer it was produced with.
pub fn revalidate(scorer: &LocalScorer, result: &ExplanationResult, k: usize) -> Result<bool> {
    let rank = scorer.rank(&result.mask, scorer.subgraph().anchor_item())?;
    Ok(result.mode.is_success(rank, k))
}
