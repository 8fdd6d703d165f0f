use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::scorer::{local_features, local_rows_from, local_targets};
use super::{LocalScorer, RgcnLayer, RgcnSurrogate};
use crate::error::{Error, Result};
use crate::recommender::BlackBox;
use crate::subgraph::{symmetrize, RelationalGraph, Subgraph};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub hidden_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Largest acceptable mean per-node MSE.
    pub max_mean_mse: f64,
    /// Smallest acceptable top-k agreement with the black box.
    pub min_topk_overlap: f64,
    pub k: usize,
    pub optimizer: Optimizer,
    /// Extra training views with randomly deleted edges.
    pub perturbed_views: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 64,
            epochs: 2000,
            learning_rate: 0.01,
            seed: 0,
            max_mean_mse: 1e-2,
            min_topk_overlap: 0.8,
            k: 10,
            optimizer: Optimizer::Adam,
            perturbed_views: 9,
        }
    }
}

impl SurrogateConfig {
    pub fn validate(&self) -> Result<()> {
        if !crate::error::positive(self.max_mean_mse) {
            return Err(Error::InvalidParameter("fidelity threshold must be positive".into()));
        }
        if self.hidden_dim == 0 || self.k == 0 {
            return Err(Error::InvalidParameter("hidden dim and k must be positive".into()));
        }
        if !crate::error::positive(self.learning_rate) {
            return Err(Error::InvalidParameter("learning rate must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.min_topk_overlap) {
            return Err(Error::InvalidParameter(
                "top-k overlap threshold must be in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub mean_mse: f64,
    pub max_mse: f64,
    pub topk_overlap: f64,
    pub final_loss: f64,
}

#[derive(Debug, Clone)]
pub struct FitSummary {
    /// Sum over nodes of squared embedding error, per epoch, before the
    /// update of that epoch.
    pub losses: Vec<f64>,
    pub final_loss: f64,
}

/// One training view: an edge mask over the subgraph and the embeddings the
/// surrogate should produce under it.
#[derive(Debug, Clone)]
pub struct SurrogateView {
    pub mask: Vec<f64>,
    pub targets: Array2<f64>,
}

/// Fits a surrogate to `targets` on the unperturbed graph by full-batch
/// minimization of the mean over nodes of `‖g(v) − g'(v)‖²`, with the
/// configured optimizer.
pub fn fit_surrogate(
    graph: RelationalGraph,
    features: &Array2<f64>,
    targets: &Array2<f64>,
    cfg: &SurrogateConfig,
) -> Result<(RgcnSurrogate, FitSummary)> {
    let view = SurrogateView {
        mask: vec![1.0; graph.num_edges()],
        targets: targets.clone(),
    };
    fit_surrogate_views(graph, features, std::slice::from_ref(&view), cfg)
}

/// Like [`fit_surrogate`] over several views. Every epoch takes a step on
/// the first view plus one of the others in rotation. Reported losses are
/// those of the first view.
pub fn fit_surrogate_views(
    graph: RelationalGraph,
    features: &Array2<f64>,
    views: &[SurrogateView],
    cfg: &SurrogateConfig,
) -> Result<(RgcnSurrogate, FitSummary)> {
    cfg.validate()?;
    let n = graph.num_nodes();
    if n == 0 {
        return Err(Error::InvalidParameter("subgraph has no nodes".into()));
    }
    let Some(first) = views.first() else {
        return Err(Error::InvalidParameter("no training views".into()));
    };
    if features.nrows() != n
        || views.iter().any(|v| v.targets.dim() != first.targets.dim())
        || first.targets.nrows() != n
    {
        return Err(Error::DimensionMismatch(format!(
            "{} feature rows and {} target rows for {n} nodes",
            features.nrows(),
            first.targets.nrows()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let hidden = init_layer(features.ncols(), cfg.hidden_dim, &mut rng);
    let output = init_layer(cfg.hidden_dim, first.targets.ncols(), &mut rng);
    let mut model = RgcnSurrogate::new(graph, hidden, output)?;
    let scale = 2.0 / n as f64;
    let lr = cfg.learning_rate;
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut adam_t = 0i32;
    let mut moments: Vec<(Array2<f64>, Array2<f64>)> = model
        .weight_shapes()
        .into_iter()
        .map(|d| (Array2::zeros(d), Array2::zeros(d)))
        .collect();
    let view_grads = |model: &RgcnSurrogate, view: &SurrogateView| {
        let mut loss = 0.0;
        let (_, grads) = model.forward_backward(&view.mask, features, |out| {
            let diff = out - &view.targets;
            loss = diff.iter().map(|d| d * d).sum();
            diff * scale
        })?;
        Ok::<_, Error>((loss, grads))
    };
    for epoch in 0..cfg.epochs {
        let (loss, mut grads) = view_grads(&model, first)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        losses.push(loss);
        if views.len() > 1 {
            let extra = &views[1 + epoch % (views.len() - 1)];
            let (_, g) = view_grads(&model, extra)?;
            grads.accumulate_weights(&g);
        }
        match cfg.optimizer {
            Optimizer::Sgd => model.apply_update(&grads, |w, g| w.scaled_add(-lr, g)),
            Optimizer::Adam => {
                adam_t += 1;
                let c1 = 1.0 - 0.9f64.powi(adam_t);
                let c2 = 1.0 - 0.999f64.powi(adam_t);
                let mut slot = 0usize;
                model.apply_update(&grads, |w, g| {
                    let (m, v) = &mut moments[slot];
                    slot += 1;
                    ndarray::Zip::from(w).and(g).and(m).and(v).for_each(|w, &g, m, v| {
                        *m = 0.9 * *m + 0.1 * g;
                        *v = 0.999 * *v + 0.001 * g * g;
                        *w -= lr * (*m / c1) / ((*v / c2).sqrt() + 1e-8);
                    });
                });
            }
        }
        if !model.weights_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
    }
    let out = model.forward(&first.mask, features)?;
    let final_loss = (&out - &first.targets).iter().map(|d| d * d).sum();
    Ok((model, FitSummary { losses, final_loss }))
}

/// The unperturbed view followed by `cfg.perturbed_views` views with edges
/// deleted at random, each with black-box targets recomputed under the
/// deletion. Views cycle through three kinds: every edge of a random set of
/// nodes removed; anchor edges thinned at a random rate; all edges thinned
/// lightly.
pub fn perturbed_views(blackbox: &BlackBox, subgraph: &Subgraph, cfg: &SurrogateConfig) -> Result<Vec<SurrogateView>> {
    let mut views = vec![SurrogateView {
        mask: vec![1.0; subgraph.num_edges()],
        targets: local_targets(blackbox, subgraph),
    }];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let local = subgraph.local_edges();
    for v in 0..cfg.perturbed_views {
        let mask: Vec<f64> = match v % 3 {
            0 => {
                let rate = 0.1 + 0.4 * rng.random::<f64>();
                let cut: Vec<bool> = (0..subgraph.num_nodes()).map(|_| rng.random::<f64>() < rate).collect();
                local
                    .iter()
                    .map(|&(a, b)| if cut[a] || cut[b] { 0.0 } else { 1.0 })
                    .collect()
            }
            1 => {
                let rate = rng.random::<f64>();
                (0..subgraph.num_edges())
                    .map(|e| {
                        let p = if subgraph.is_anchor_edge(e) { rate } else { 0.05 };
                        if rng.random::<f64>() < p {
                            0.0
                        } else {
                            1.0
                        }
                    })
                    .collect()
            }
            _ => {
                let rate = 0.3 * rng.random::<f64>();
                (0..subgraph.num_edges())
                    .map(|_| if rng.random::<f64>() < rate { 0.0 } else { 1.0 })
                    .collect()
            }
        };
        let removed: Vec<(usize, usize)> = subgraph
            .edges()
            .iter()
            .zip(&mask)
            .filter(|(_, &m)| m == 0.0)
            .map(|(&e, _)| e)
            .collect();
        let emb = blackbox.embeddings_without(&removed)?;
        views.push(SurrogateView {
            mask,
            targets: local_rows_from(blackbox, subgraph, emb.values()),
        });
    }
    Ok(views)
}

/// Fits a surrogate on `subgraph` against the black box and checks fidelity.
///
/// Inputs are the black box's base embeddings of the subgraph nodes; targets
/// are its final embeddings. A surrogate whose mean per-node MSE exceeds the
/// threshold, or whose top-k list for the anchor user overlaps the black
/// box's by less than the configured fraction, is rejected.
pub fn train_surrogate(
    blackbox: &BlackBox,
    subgraph: &Subgraph,
    cfg: &SurrogateConfig,
) -> Result<(LocalScorer, FidelityReport)> {
    if subgraph.is_empty() {
        return Err(Error::InvalidParameter("subgraph has no nodes".into()));
    }
    let features = local_features(blackbox, subgraph);
    let views = perturbed_views(blackbox, subgraph, cfg)?;
    let targets = &views[0].targets;
    let (model, summary) = fit_surrogate_views(symmetrize(subgraph), &features, &views, cfg)?;
    let out = model.forward(&model.full_mask(), &features)?;
    let per_node: Vec<f64> = (&out - targets)
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|d| d * d).sum::<f64>() / r.len().max(1) as f64)
        .collect();
    let mean_mse = per_node.iter().sum::<f64>() / per_node.len() as f64;
    let max_mse = per_node.iter().copied().fold(0.0, f64::max);

    let scorer = LocalScorer::new(blackbox, subgraph.clone(), model)?;
    let user = subgraph.anchor_user();
    let reference = blackbox.top_k(user, cfg.k)?.item_ids();
    let ours = scorer.top_k(&scorer.surrogate().full_mask(), cfg.k)?.item_ids();
    let topk_overlap = if reference.is_empty() {
        1.0
    } else {
        ours.iter().filter(|i| reference.contains(i)).count() as f64 / reference.len() as f64
    };
    let report = FidelityReport {
        mean_mse,
        max_mse,
        topk_overlap,
        final_loss: summary.final_loss,
    };
    if mean_mse > cfg.max_mean_mse || topk_overlap < cfg.min_topk_overlap {
        return Err(Error::SurrogateRejected(report));
    }
    Ok((scorer, report))
}

fn init_layer(input: usize, output: usize, rng: &mut ChaCha8Rng) -> RgcnLayer {
    let std = (2.0 / (input + output) as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("positive std");
    let mut draw = || Array2::from_shape_simple_fn((input, output), || normal.sample(&mut *rng));
    RgcnLayer {
        item_to_user: draw(),
        user_to_item: draw(),
        self_loop: draw(),
    }
}
