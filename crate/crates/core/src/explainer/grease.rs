use serde::{Deserialize, Serialize};

use super::loss::explanation_loss;
use super::mask::{dist_loss, sigmoid, PerturbationState};
use super::{check_preconditions, evaluate_mask, ExplanationResult, Method, Mode};
use crate::error::{Error, Result};
use crate::recommender::rank_of;
use crate::surrogate::LocalScorer;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GreaseConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    /// Weight of the distance term.
    pub beta: f64,
    pub epsilon: f64,
    pub k: usize,
    pub mode: Mode,
    pub budget: usize,
    /// Magnitude of the starting mask logits.
    pub init_logit: f64,
}

impl GreaseConfig {
    pub fn new(mode: Mode, k: usize) -> Self {
        Self {
            iterations: 200,
            learning_rate: 0.01,
            beta: 1.0 / 200.0,
            epsilon: 0.05,
            k,
            mode,
            budget: mode.default_budget(),
            init_logit: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.k == 0 || self.budget == 0 {
            return Err(Error::InvalidParameter(
                "iterations, k and budget must be positive".into(),
            ));
        }
        if !crate::error::positive(self.learning_rate)
            || !crate::error::positive(self.epsilon)
            || self.beta.is_nan()
            || self.beta < 0.0
        {
            return Err(Error::InvalidParameter(
                "need learning rate > 0, epsilon > 0, beta ≥ 0".into(),
            ));
        }
        if !self.init_logit.is_finite() || self.init_logit <= 0.0 {
            return Err(Error::InvalidParameter(
                "initial logit must be finite and positive".into(),
            ));
        }
        Ok(())
    }
}

/// Joint loss at the relaxed mask of `state` and its gradient with respect to
/// the logits (zero on frozen entries).
pub fn loss_and_gradient(
    scorer: &LocalScorer,
    state: &PerturbationState,
    cfg: &GreaseConfig,
) -> Result<(f64, Vec<f64>)> {
    let item = scorer.subgraph().anchor_item();
    let mask = state.relaxed_mask();
    let mut exp_loss = 0.0;
    let mut inner = Ok(());
    let (_, grads) = scorer.surrogate().forward_backward(&mask, scorer.features(), |out| {
        let scores = scorer.scores(out);
        match explanation_loss(cfg.mode, &scores, item, scorer.candidates(), cfg.k, cfg.epsilon) {
            Ok((loss, score_grads)) => {
                exp_loss = loss;
                scorer.output_gradient(out, &score_grads)
            }
            Err(e) => {
                inner = Err(e);
                ndarray::Array2::zeros(out.dim())
            }
        }
    })?;
    inner?;
    let loss = exp_loss + cfg.beta * dist_loss(&mask, state.start())?;
    let grad = state
        .logits()
        .iter()
        .zip(state.perturbable())
        .zip(state.start())
        .zip(&grads.mask)
        .map(|(((&p, &free), &s), &gm)| {
            if !free {
                return 0.0;
            }
            let m = sigmoid(p);
            // d|m − s|/dm with s ∈ {0, 1} and m strictly inside (0, 1)
            let dist_sign = if s > 0.5 { -1.0 } else { 1.0 };
            (gm + cfg.beta * dist_sign) * m * (1.0 - m)
        })
        .collect();
    Ok((loss, grad))
}

/// Searches for the cheapest mask that meets the mode's goal.
///
/// Each iteration checks the binarized mask through the scorer, keeps it if
/// it succeeds more cheaply than anything seen so far within budget, then
/// takes a gradient step on the relaxed loss. Returns `None` when no
/// iteration succeeds within budget.
pub fn grease_explain(scorer: &LocalScorer, cfg: &GreaseConfig) -> Result<Option<ExplanationResult>> {
    cfg.validate()?;
    check_preconditions(scorer, cfg.mode, cfg.k)?;
    let item = scorer.subgraph().anchor_item();
    let mut state = PerturbationState::new(scorer.subgraph(), cfg.mode, cfg.init_logit);
    let mut best: Option<(usize, Vec<f64>, usize)> = None;
    let mut trace = Vec::with_capacity(cfg.iterations);
    for j in 1..=cfg.iterations {
        let mask = state.binary_mask()?;
        let cost = dist_loss(&mask, state.start())? as usize;
        let improves = cost <= cfg.budget && best.as_ref().is_none_or(|b| cost < b.0);
        if improves {
            let (_, scores) = scorer.evaluate(&mask)?;
            let rank = rank_of(&scores, item, scorer.candidates())?;
            if cfg.mode.is_success(rank, cfg.k) {
                best = Some((cost, mask, j));
                if cost == 0 {
                    break;
                }
            }
        }
        let (loss, grad) = loss_and_gradient(scorer, &state, cfg)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch: j });
        }
        trace.push(loss);
        state.step(&grad, cfg.learning_rate);
    }
    let Some((_, mask, j)) = best else {
        return Ok(None);
    };
    let mut result = evaluate_mask(scorer, Method::Grease, cfg.mode, cfg.k, mask, j)?;
    result.loss_trace = trace;
    Ok(Some(result))
}
