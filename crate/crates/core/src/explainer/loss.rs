use super::Mode;
use crate::error::{Error, Result};
use crate::recommender::{top_k, Candidates};

/// `max(0, target − min(topk) + ε)`.
pub fn relaxed_indicator(target: f64, topk_scores: &[f64], epsilon: f64) -> Result<f64> {
    let min = topk_scores
        .iter()
        .copied()
        .min_by(f64::total_cmp)
        .ok_or_else(|| Error::InvalidParameter("empty top-k score list".into()))?;
    Ok((target - min + epsilon).max(0.0))
}

/// Counterfactual loss: target score times the relaxed indicator. The top-k
/// is taken over `candidates` from `scores` themselves.
pub fn cf_loss(scores: &[f64], item: usize, candidates: &Candidates, k: usize, epsilon: f64) -> Result<f64> {
    Ok(explanation_loss(Mode::Counterfactual, scores, item, candidates, k, epsilon)?.0)
}

/// Factual loss: negated target score times the relaxed indicator, with the
/// indicator floored to 1 where it vanishes.
pub fn fa_loss(scores: &[f64], item: usize, candidates: &Candidates, k: usize, epsilon: f64) -> Result<f64> {
    Ok(explanation_loss(Mode::Factual, scores, item, candidates, k, epsilon)?.0)
}

/// Loss value and its nonzero partials with respect to individual scores.
pub fn explanation_loss(
    mode: Mode,
    scores: &[f64],
    item: usize,
    candidates: &Candidates,
    k: usize,
    epsilon: f64,
) -> Result<(f64, Vec<(usize, f64)>)> {
    if item >= scores.len() || !candidates.contains(item) {
        return Err(Error::NotACandidate(item));
    }
    let list = top_k(scores, usize::MAX, k, candidates)?;
    let &(last, min) = list
        .items
        .last()
        .ok_or_else(|| Error::InvalidParameter("empty top-k score list".into()))?;
    let y = scores[item];
    let r = (y - min + epsilon).max(0.0);
    // ∂r/∂y and ∂r/∂(score of the boundary item), zero on the clamp
    let (dr_dy, dr_dmin) = match (r > 0.0, last == item) {
        (false, _) => (0.0, 0.0),
        (true, true) => (0.0, 0.0),
        (true, false) => (1.0, -1.0),
    };
    let mut grads = Vec::with_capacity(2);
    let loss = match mode {
        Mode::Counterfactual => {
            grads.push((item, r + y * dr_dy));
            if dr_dmin != 0.0 {
                grads.push((last, y * dr_dmin));
            }
            y * r
        }
        Mode::Factual => {
            let floor = if r > 0.0 { 0.0 } else { 1.0 };
            grads.push((item, -(r + floor) - y * dr_dy));
            if dr_dmin != 0.0 {
                grads.push((last, -y * dr_dmin));
            }
            -y * (r + floor)
        }
    };
    Ok((loss, grads))
}
