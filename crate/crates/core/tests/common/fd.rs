//! Central finite-difference checks on small random instances.

use cfrec_core::explainer::loss_and_gradient;
use cfrec_core::{GreaseConfig, Mode, PerturbationState};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{gaussian, naive_forward, naive_scores, random_instance, Instance};

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;

#[derive(Debug, Default)]
pub struct GradCheck {
    pub instances: usize,
    pub entries: usize,
    pub worst: f64,
    /// Instances skipped because a coordinate sat on a kink.
    pub skipped: usize,
}

impl GradCheck {
    pub fn passed(&self, min_instances: usize) -> bool {
        self.instances >= min_instances && self.worst <= TOLERANCE
    }
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// At most 8 nodes and 12 edges.
pub fn small_instance(rng: &mut ChaCha8Rng) -> (Instance, usize) {
    let users = rng.random_range(2..=4);
    let items = rng.random_range(2..=8 - users);
    let max_edges = rng.random_range(users.max(items)..=(users * items).min(12));
    let user = rng.random_range(0..users);
    let item = rng.random_range(0..items);
    let d = (
        rng.random_range(2..=4),
        rng.random_range(2..=5),
        rng.random_range(2..=4),
    );
    let inst = random_instance(rng, users, items, max_edges, d, user, item);
    let k = rng.random_range(1..items);
    (inst, k)
}

/// `∂/∂mask Σ G ⊙ forward(mask)` against central differences of the
/// edge-by-edge forward pass.
pub fn check_mask_gradient(count: usize, seed: u64) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = GradCheck::default();
    while out.instances < count {
        let (inst, _) = small_instance(&mut rng);
        let s = &inst.scorer;
        let edges = s.subgraph().num_edges();
        let mask: Vec<f64> = (0..edges).map(|_| rng.random_range(0.05..0.95)).collect();
        let d_out = s.surrogate().output_layer().output_dim();
        let g: Array2<f64> = gaussian(&mut rng, s.subgraph().num_nodes(), d_out, 1.0);
        let analytic = s.surrogate().mask_gradient(&mask, s.features(), &g).unwrap();
        let f = |m: &[f64]| (naive_forward(s, m) * &g).sum();
        for e in 0..edges {
            let (mut hi, mut lo) = (mask.clone(), mask.clone());
            hi[e] += STEP;
            lo[e] -= STEP;
            let numeric = (f(&hi) - f(&lo)) / (2.0 * STEP);
            out.worst = out.worst.max(relative_error(analytic[e], numeric));
            out.entries += 1;
        }
        out.instances += 1;
    }
    out
}

/// Loss of the relaxed objective from independently computed scores:
/// returns the loss, the boundary item of the top-k and the indicator.
pub fn oracle_loss(mode: Mode, scores: &[f64], item: usize, k: usize, eps: f64) -> (f64, usize, f64) {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    let last = order[k - 1];
    let y = scores[item];
    let r = (y - scores[last] + eps).max(0.0);
    let loss = match mode {
        Mode::Counterfactual => y * r,
        Mode::Factual => -y * (r + if r > 0.0 { 0.0 } else { 1.0 }),
    };
    (loss, last, r)
}

fn oracle_objective(inst: &Instance, state: &PerturbationState, cfg: &GreaseConfig) -> (f64, usize, bool) {
    let mask = state.relaxed_mask();
    let scores = naive_scores(inst, &mask);
    let item = inst.scorer.subgraph().anchor_item();
    let (loss, last, r) = oracle_loss(cfg.mode, &scores, item, cfg.k, cfg.epsilon);
    let dist: f64 = mask.iter().zip(state.start()).map(|(m, s)| (m - s).abs()).sum();
    (loss + cfg.beta * dist, last, r > 0.0)
}

/// Gradient of the full explanation objective with respect to the mask
/// logits against central differences of an independent objective.
pub fn check_full_gradient(count: usize, seed: u64) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = GradCheck::default();
    while out.instances < count {
        let (inst, k) = small_instance(&mut rng);
        let mode = if rng.random_bool(0.5) {
            Mode::Factual
        } else {
            Mode::Counterfactual
        };
        let mut cfg = GreaseConfig::new(mode, k);
        cfg.beta = rng.random_range(0.0..0.1);
        let mut state = PerturbationState::new(inst.scorer.subgraph(), mode, cfg.init_logit);
        let logits: Vec<f64> = (0..state.logits().len()).map(|_| rng.random_range(-2.0..2.0)).collect();
        state.set_logits(logits.clone()).unwrap();
        let (loss, analytic) = loss_and_gradient(&inst.scorer, &state, &cfg).unwrap();
        let (oracle, last, positive) = oracle_objective(&inst, &state, &cfg);
        assert!(relative_error(loss, oracle) < 1e-9, "loss {loss} vs oracle {oracle}");
        let mut kinked = false;
        let mut errs = Vec::new();
        for e in 0..logits.len() {
            let mut values = [0.0; 2];
            for (slot, delta) in [STEP, -STEP].into_iter().enumerate() {
                let mut p = logits.clone();
                p[e] += delta;
                state.set_logits(p).unwrap();
                let (v, l, pos) = oracle_objective(&inst, &state, &cfg);
                kinked |= l != last || pos != positive;
                values[slot] = v;
            }
            let numeric = (values[0] - values[1]) / (2.0 * STEP);
            errs.push(relative_error(analytic[e], numeric));
        }
        if kinked {
            out.skipped += 1;
            continue;
        }
        out.entries += errs.len();
        out.worst = errs.into_iter().fold(out.worst, f64::max);
        out.instances += 1;
    }
    out
}
