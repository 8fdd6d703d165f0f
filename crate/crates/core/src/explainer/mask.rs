use super::{perturbable_edges, start_mask, Mode};
use crate::error::{Error, Result};
use crate::subgraph::Subgraph;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// 1 where the logit is non-negative (sigmoid ≥ 0.5), else 0.
pub fn binarize(logits: &[f64]) -> Result<Vec<f64>> {
    logits
        .iter()
        .map(|&p| {
            if !p.is_finite() {
                return Err(Error::InvalidParameter(format!("non-finite mask logit {p}")));
            }
            Ok(if p >= 0.0 { 1.0 } else { 0.0 })
        })
        .collect()
}

/// L1 distance between a mask and the starting mask of the search.
pub fn dist_loss(mask: &[f64], start: &[f64]) -> Result<f64> {
    if mask.len() != start.len() {
        return Err(Error::DimensionMismatch(format!(
            "mask of {} entries against {} edges",
            mask.len(),
            start.len()
        )));
    }
    Ok(mask.iter().zip(start).map(|(m, s)| (m - s).abs()).sum())
}

/// Mask logits for one search. Entries of non-perturbable edges are frozen
/// at their starting value and never read through the sigmoid.
#[derive(Debug, Clone)]
pub struct PerturbationState {
    mode: Mode,
    logits: Vec<f64>,
    perturbable: Vec<bool>,
    start: Vec<f64>,
    iteration: usize,
}

impl PerturbationState {
    /// Perturbable logits start at `+init_logit` (counterfactual) or
    /// `−init_logit` (factual).
    pub fn new(subgraph: &Subgraph, mode: Mode, init_logit: f64) -> Self {
        let perturbable = perturbable_edges(subgraph, mode);
        let start = start_mask(subgraph, mode);
        let logits = start
            .iter()
            .map(|&s| if s > 0.5 { init_logit } else { -init_logit })
            .collect();
        Self {
            mode,
            logits,
            perturbable,
            start,
            iteration: 0,
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn set_logits(&mut self, logits: Vec<f64>) -> Result<()> {
        if logits.len() != self.logits.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} logits for {} edges",
                logits.len(),
                self.logits.len()
            )));
        }
        self.logits = logits;
        Ok(())
    }

    pub fn perturbable(&self) -> &[bool] {
        &self.perturbable
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Sigmoid of the logits on perturbable edges, starting value elsewhere.
    pub fn relaxed_mask(&self) -> Vec<f64> {
        self.logits
            .iter()
            .zip(&self.perturbable)
            .zip(&self.start)
            .map(|((&p, &free), &s)| if free { sigmoid(p) } else { s })
            .collect()
    }

    pub fn binary_mask(&self) -> Result<Vec<f64>> {
        let mut mask = binarize(&self.logits)?;
        for ((m, &free), &s) in mask.iter_mut().zip(&self.perturbable).zip(&self.start) {
            if !free {
                *m = s;
            }
        }
        Ok(mask)
    }

    /// Edge count of the binary mask's departure from the start.
    pub fn cost(&self) -> Result<usize> {
        Ok(dist_loss(&self.binary_mask()?, &self.start)? as usize)
    }

    /// Gradient step on perturbable logits only.
    pub fn step(&mut self, grad: &[f64], learning_rate: f64) {
        for ((p, g), &free) in self.logits.iter_mut().zip(grad).zip(&self.perturbable) {
            if free {
                *p -= learning_rate * g;
            }
        }
        self.iteration += 1;
    }
}
