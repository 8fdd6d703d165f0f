use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{layer_mean, LightGcnModel, DEFAULT_LAYERS};
use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Sampled negatives per observed interaction.
    pub negatives: usize,
    pub dim: usize,
    pub layers: usize,
    pub batch_size: usize,
    /// Standard deviation of the Gaussian initialization.
    pub init_std: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            learning_rate: 0.001,
            negatives: 1,
            dim: 32,
            layers: DEFAULT_LAYERS,
            batch_size: 1024,
            init_std: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be at least 1".into()));
        }
        if !crate::error::positive(self.learning_rate) {
            return Err(Error::InvalidParameter("learning rate must be positive".into()));
        }
        if self.dim == 0 || self.batch_size == 0 {
            return Err(Error::InvalidParameter(
                "embedding dim and batch size must be positive".into(),
            ));
        }
        if !crate::error::positive(self.init_std) {
            return Err(Error::InvalidParameter("init std must be positive".into()));
        }
        Ok(())
    }
}

/// Mean BCE per epoch.
#[derive(Debug, Clone, Default, Serialize)]
pub struct TrainHistory {
    pub epoch_losses: Vec<f64>,
}

pub fn train_lightgcn(graph: &BipartiteGraph, cfg: &TrainConfig) -> Result<LightGcnModel> {
    train_lightgcn_with_history(graph, cfg).map(|(model, _)| model)
}

/// Minimizes sampled binary cross-entropy over (positive, negative) pairs
/// with Adam. Single-threaded and deterministic for a given seed.
pub fn train_lightgcn_with_history(graph: &BipartiteGraph, cfg: &TrainConfig) -> Result<(LightGcnModel, TrainHistory)> {
    cfg.validate()?;
    if graph.num_edges() == 0 {
        return Err(Error::EmptyInteractions);
    }
    let m = graph.num_users();
    let n = graph.num_items();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, cfg.init_std).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut base = Array2::from_shape_simple_fn((m + n, cfg.dim), || normal.sample(&mut rng) as f32 as f64);
    let adjacency = graph.normalized_adjacency();
    let mut adam = Adam::new(base.dim(), cfg.learning_rate);

    let mut positives: Vec<(usize, usize)> = graph.edges().to_vec();
    let mut history = TrainHistory::default();
    for epoch in 0..cfg.epochs {
        positives.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_count = 0usize;
        for batch in positives.chunks(cfg.batch_size) {
            let mut samples: Vec<(usize, usize, f64)> = Vec::with_capacity(batch.len() * (1 + cfg.negatives));
            for &(u, i) in batch {
                samples.push((u, i, 1.0));
                if graph.user_degree(u) >= n {
                    continue;
                }
                for _ in 0..cfg.negatives {
                    let j = loop {
                        let j = rng.random_range(0..n);
                        if !graph.has_edge(u, j) {
                            break j;
                        }
                    };
                    samples.push((u, j, 0.0));
                }
            }

            let fin = layer_mean(&base, &adjacency, cfg.layers);
            let mut grad_final = Array2::<f64>::zeros(fin.dim());
            let scale = 1.0 / samples.len() as f64;
            let mut batch_loss = 0.0;
            for &(u, i, label) in &samples {
                let hu = fin.row(u);
                let hi = fin.row(m + i);
                let logit = hu.dot(&hi);
                batch_loss += bce_with_logit(logit, label);
                let g = (sigmoid(logit) - label) * scale;
                grad_final.row_mut(u).scaled_add(g, &hi);
                grad_final.row_mut(m + i).scaled_add(g, &hu);
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            epoch_loss += batch_loss;
            epoch_count += samples.len();
            // Â is symmetric, so the backward pass is the same layer mean
            let grad_base = layer_mean(&grad_final, &adjacency, cfg.layers);
            adam.step(&mut base, &grad_base);
        }
        let mean = epoch_loss / epoch_count.max(1) as f64;
        if !mean.is_finite() || base.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLoss { epoch });
        }
        history.epoch_losses.push(mean);
    }
    let model = LightGcnModel::new(m, n, cfg.layers, base)?;
    Ok((model, history))
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable `-[y log σ(x) + (1-y) log(1-σ(x))]`.
fn bce_with_logit(x: f64, y: f64) -> f64 {
    x.max(0.0) - x * y + (-x.abs()).exp().ln_1p()
}

struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Array2<f64>,
    v: Array2<f64>,
}

impl Adam {
    fn new(shape: (usize, usize), lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Array2::zeros(shape),
            v: Array2::zeros(shape),
        }
    }

    fn step(&mut self, params: &mut Array2<f64>, grad: &Array2<f64>) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        ndarray::Zip::from(params)
            .and(grad)
            .and(&mut self.m)
            .and(&mut self.v)
            .for_each(|p, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let update = lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                *p = (*p - update) as f32 as f64;
            });
    }
}
