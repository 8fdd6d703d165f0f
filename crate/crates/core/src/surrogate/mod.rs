//! Two-layer relational graph convolution trained to mimic the black box on
//! one local neighborhood.
//!
//! Each layer computes, for a user node `u` (items are symmetric):
//!
//! ```text
//! pre_u = (1/c_u) Σ_{i ∈ N(u)} mask(u,i) · W_iu h_i  +  W_0 h_u
//! ```
//!
//! where `c_u` is the unperturbed neighbor count. Layer 1 applies `tanh`,
//! layer 2 is linear. Both directed copies of an undirected edge read the
//! same mask entry.

mod scorer;
mod train;

use ndarray::Array2;

pub use scorer::LocalScorer;
pub use train::{
    fit_surrogate, fit_surrogate_views, perturbed_views, train_surrogate, FidelityReport, FitSummary, Optimizer,
    SurrogateConfig, SurrogateView,
};

use crate::error::{Error, Result};
use crate::subgraph::RelationalGraph;

/// Weights of one relational layer, each stored `in × out` (row vectors
/// multiply on the left).
#[derive(Debug, Clone, PartialEq)]
pub struct RgcnLayer {
    pub item_to_user: Array2<f64>,
    pub user_to_item: Array2<f64>,
    pub self_loop: Array2<f64>,
}

impl RgcnLayer {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            item_to_user: Array2::zeros((input, output)),
            user_to_item: Array2::zeros((input, output)),
            self_loop: Array2::zeros((input, output)),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.self_loop.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.self_loop.ncols()
    }

    fn is_finite(&self) -> bool {
        [&self.item_to_user, &self.user_to_item, &self.self_loop]
            .iter()
            .all(|w| w.iter().all(|v| v.is_finite()))
    }
}

/// Surrogate bound to the relational graph it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct RgcnSurrogate {
    graph: RelationalGraph,
    hidden: RgcnLayer,
    output: RgcnLayer,
}

/// Intermediate values kept for the backward pass.
struct ForwardTrace {
    hidden_in: LayerTrace,
    hidden_act: Array2<f64>,
    output_in: LayerTrace,
    output: Array2<f64>,
}

struct LayerTrace {
    /// `H W_iu`
    item_msg: Array2<f64>,
    /// `H W_ui`
    user_msg: Array2<f64>,
}

/// Gradients of one layer's weights.
#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub item_to_user: Array2<f64>,
    pub user_to_item: Array2<f64>,
    pub self_loop: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct SurrogateGrads {
    pub mask: Vec<f64>,
    pub hidden: LayerGrads,
    pub output: LayerGrads,
}

impl LayerGrads {
    fn accumulate(&mut self, other: &LayerGrads) {
        self.item_to_user += &other.item_to_user;
        self.user_to_item += &other.user_to_item;
        self.self_loop += &other.self_loop;
    }
}

impl SurrogateGrads {
    /// Adds weight gradients of `other`; mask gradients are left alone since
    /// they belong to different masks.
    pub(crate) fn accumulate_weights(&mut self, other: &SurrogateGrads) {
        self.hidden.accumulate(&other.hidden);
        self.output.accumulate(&other.output);
    }
}

impl RgcnSurrogate {
    pub fn new(graph: RelationalGraph, hidden: RgcnLayer, output: RgcnLayer) -> Result<Self> {
        if hidden.output_dim() != output.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "hidden layer emits {}, output layer expects {}",
                hidden.output_dim(),
                output.input_dim()
            )));
        }
        if !hidden.is_finite() || !output.is_finite() {
            return Err(Error::InvalidParameter("non-finite surrogate weight".into()));
        }
        Ok(Self { graph, hidden, output })
    }

    pub fn graph(&self) -> &RelationalGraph {
        &self.graph
    }

    pub fn hidden_layer(&self) -> &RgcnLayer {
        &self.hidden
    }

    pub fn output_layer(&self) -> &RgcnLayer {
        &self.output
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden.output_dim()
    }

    pub fn num_edges(&self) -> usize {
        self.graph.num_edges()
    }

    /// All-ones mask: the unperturbed neighborhood.
    pub fn full_mask(&self) -> Vec<f64> {
        vec![1.0; self.num_edges()]
    }

    pub fn forward(&self, mask: &[f64], features: &Array2<f64>) -> Result<Array2<f64>> {
        self.check(mask, features)?;
        Ok(self.trace(mask, features).output)
    }

    /// `∂loss/∂mask` given `∂loss/∂output`.
    pub fn mask_gradient(&self, mask: &[f64], features: &Array2<f64>, output_grad: &Array2<f64>) -> Result<Vec<f64>> {
        Ok(self.backward(mask, features, output_grad)?.mask)
    }

    /// Full backward pass: mask and weight gradients.
    pub fn backward(&self, mask: &[f64], features: &Array2<f64>, output_grad: &Array2<f64>) -> Result<SurrogateGrads> {
        self.check(mask, features)?;
        let expected = (self.graph.num_nodes(), self.output.output_dim());
        if output_grad.dim() != expected {
            return Err(Error::DimensionMismatch(format!(
                "output gradient is {:?}, expected {expected:?}",
                output_grad.dim()
            )));
        }
        let trace = self.trace(mask, features);
        Ok(self.backward_from(mask, features, &trace, output_grad))
    }

    /// Forward pass that also returns the output, for callers that need both.
    pub(crate) fn forward_backward(
        &self,
        mask: &[f64],
        features: &Array2<f64>,
        loss_grad: impl FnOnce(&Array2<f64>) -> Array2<f64>,
    ) -> Result<(Array2<f64>, SurrogateGrads)> {
        self.check(mask, features)?;
        let trace = self.trace(mask, features);
        let g = loss_grad(&trace.output);
        let grads = self.backward_from(mask, features, &trace, &g);
        Ok((trace.output, grads))
    }

    fn check(&self, mask: &[f64], features: &Array2<f64>) -> Result<()> {
        if mask.len() != self.num_edges() {
            return Err(Error::DimensionMismatch(format!(
                "mask has {} entries for {} edges",
                mask.len(),
                self.num_edges()
            )));
        }
        if let Some(bad) = mask.iter().find(|m| !(0.0..=1.0).contains(*m)) {
            return Err(Error::InvalidParameter(format!("mask entry {bad} outside [0, 1]")));
        }
        if features.dim() != (self.graph.num_nodes(), self.hidden.input_dim()) {
            return Err(Error::DimensionMismatch(format!(
                "features are {:?}, expected ({}, {})",
                features.dim(),
                self.graph.num_nodes(),
                self.hidden.input_dim()
            )));
        }
        Ok(())
    }

    fn trace(&self, mask: &[f64], features: &Array2<f64>) -> ForwardTrace {
        let (hidden_pre, hidden_in) = self.layer_forward(&self.hidden, mask, features);
        let hidden_act = hidden_pre.mapv(f64::tanh);
        let (output, output_in) = self.layer_forward(&self.output, mask, &hidden_act);
        ForwardTrace {
            hidden_in,
            hidden_act,
            output_in,
            output,
        }
    }

    fn layer_forward(&self, layer: &RgcnLayer, mask: &[f64], input: &Array2<f64>) -> (Array2<f64>, LayerTrace) {
        let item_msg = input.dot(&layer.item_to_user);
        let user_msg = input.dot(&layer.user_to_item);
        let mut pre = input.dot(&layer.self_loop);
        let deg = self.graph.in_degrees();
        for (e, (&(item, user), &m)) in self.graph.item_to_user().iter().zip(mask).enumerate() {
            let (_, item_node) = self.graph.user_to_item()[e];
            debug_assert_eq!(item, item_node);
            pre.row_mut(user).scaled_add(m / deg[user] as f64, &item_msg.row(item));
            pre.row_mut(item).scaled_add(m / deg[item] as f64, &user_msg.row(user));
        }
        (pre, LayerTrace { item_msg, user_msg })
    }

    /// Backward through one layer. Returns the gradient w.r.t. the layer
    /// input and accumulates mask gradients into `mask_grad`.
    fn layer_backward(
        &self,
        layer: &RgcnLayer,
        mask: &[f64],
        input: &Array2<f64>,
        trace: &LayerTrace,
        pre_grad: &Array2<f64>,
        mask_grad: &mut [f64],
    ) -> (Array2<f64>, LayerGrads) {
        let deg = self.graph.in_degrees();
        let mut item_msg_grad = Array2::<f64>::zeros(trace.item_msg.dim());
        let mut user_msg_grad = Array2::<f64>::zeros(trace.user_msg.dim());
        for (e, &(item, user)) in self.graph.item_to_user().iter().enumerate() {
            let m = mask[e];
            let cu = deg[user] as f64;
            let ci = deg[item] as f64;
            let gu = pre_grad.row(user);
            let gi = pre_grad.row(item);
            mask_grad[e] += gu.dot(&trace.item_msg.row(item)) / cu + gi.dot(&trace.user_msg.row(user)) / ci;
            item_msg_grad.row_mut(item).scaled_add(m / cu, &gu);
            user_msg_grad.row_mut(user).scaled_add(m / ci, &gi);
        }
        let input_t = input.t();
        let grads = LayerGrads {
            item_to_user: input_t.dot(&item_msg_grad),
            user_to_item: input_t.dot(&user_msg_grad),
            self_loop: input_t.dot(pre_grad),
        };
        let input_grad = pre_grad.dot(&layer.self_loop.t())
            + item_msg_grad.dot(&layer.item_to_user.t())
            + user_msg_grad.dot(&layer.user_to_item.t());
        (input_grad, grads)
    }

    fn backward_from(
        &self,
        mask: &[f64],
        features: &Array2<f64>,
        trace: &ForwardTrace,
        output_grad: &Array2<f64>,
    ) -> SurrogateGrads {
        let mut mask_grad = vec![0.0; mask.len()];
        let (act_grad, output) = self.layer_backward(
            &self.output,
            mask,
            &trace.hidden_act,
            &trace.output_in,
            output_grad,
            &mut mask_grad,
        );
        let pre_grad = act_grad * trace.hidden_act.mapv(|h| 1.0 - h * h);
        let (_, hidden) = self.layer_backward(
            &self.hidden,
            mask,
            features,
            &trace.hidden_in,
            &pre_grad,
            &mut mask_grad,
        );
        SurrogateGrads {
            mask: mask_grad,
            hidden,
            output,
        }
    }

    pub(crate) fn weight_shapes(&self) -> Vec<(usize, usize)> {
        [&self.hidden, &self.output]
            .iter()
            .flat_map(|l| [l.item_to_user.dim(), l.user_to_item.dim(), l.self_loop.dim()])
            .collect()
    }

    /// Calls `step(weight, grad)` for the six weight matrices in a fixed order.
    pub(crate) fn apply_update(
        &mut self,
        grads: &SurrogateGrads,
        mut step: impl FnMut(&mut Array2<f64>, &Array2<f64>),
    ) {
        step(&mut self.hidden.item_to_user, &grads.hidden.item_to_user);
        step(&mut self.hidden.user_to_item, &grads.hidden.user_to_item);
        step(&mut self.hidden.self_loop, &grads.hidden.self_loop);
        step(&mut self.output.item_to_user, &grads.output.item_to_user);
        step(&mut self.output.user_to_item, &grads.output.user_to_item);
        step(&mut self.output.self_loop, &grads.output.self_loop);
    }

    pub(crate) fn weights_finite(&self) -> bool {
        self.hidden.is_finite() && self.output.is_finite()
    }
}
