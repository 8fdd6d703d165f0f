//! Exhaustive search over deletion subsets for counterfactual explanations.

use cfrec_core::{grease_explain, GreaseConfig, Mode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{naive_rank, naive_scores, random_graph, scorer_for, Instance};

#[derive(Debug, Default)]
pub struct OracleCheck {
    pub instances: usize,
    /// Instances where GREASE returned a valid counterfactual.
    pub found: usize,
    /// Found explanations whose cost matched the oracle minimum.
    pub optimal: usize,
    pub violations: Vec<String>,
}

impl OracleCheck {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.found > 0
    }
}

/// Fewest deletions that push the anchor item out of the top-k, scoring
/// with the edge-by-edge forward pass. `None` if no subset within
/// `budget` works.
pub fn min_deletions(inst: &Instance, k: usize, budget: usize) -> Option<usize> {
    let sg = inst.scorer.subgraph();
    let edges = sg.num_edges();
    assert!(edges <= 16, "too many edges for exhaustive search");
    let item = sg.anchor_item();
    let mut best: Option<usize> = None;
    for bits in 0u32..(1 << edges) {
        let cost = bits.count_ones() as usize;
        if cost > budget || best.is_some_and(|b| cost >= b) {
            continue;
        }
        let mask: Vec<f64> = (0..edges).map(|e| if bits >> e & 1 == 1 { 0.0 } else { 1.0 }).collect();
        if naive_rank(&naive_scores(inst, &mask), item) > k {
            best = Some(cost);
        }
    }
    best
}

/// Draws a pair whose item sits in the surrogate's top-k.
fn recommended_instance(rng: &mut ChaCha8Rng, k: usize) -> Instance {
    loop {
        let users = rng.random_range(2..=4);
        let items = rng.random_range(k + 2..=8);
        let graph = random_graph(rng, users, items, 12);
        let user = rng.random_range(0..users);
        let item = rng.random_range(0..items);
        let (scorer, outside) = scorer_for(rng, &graph, user, item, (3, 4, 3));
        let inst = Instance { graph, scorer, outside };
        let full = inst.scorer.surrogate().full_mask();
        if naive_rank(&naive_scores(&inst, &full), item) <= k {
            return inst;
        }
    }
}

pub fn check_cf_oracle(count: usize, seed: u64) -> OracleCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = OracleCheck::default();
    while out.instances < count {
        let k = rng.random_range(1..=3);
        let inst = recommended_instance(&mut rng, k);
        let cfg = GreaseConfig::new(Mode::Counterfactual, k);
        out.instances += 1;
        let result = match grease_explain(&inst.scorer, &cfg) {
            Ok(r) => r,
            Err(e) => {
                out.violations.push(format!("instance {}: {e}", out.instances));
                continue;
            }
        };
        let Some(result) = result else { continue };
        if result.cost > cfg.budget {
            out.violations
                .push(format!("instance {}: cost {} over budget", out.instances, result.cost));
        }
        if !result.valid {
            continue;
        }
        out.found += 1;
        let rank = naive_rank(&naive_scores(&inst, &result.mask), inst.scorer.subgraph().anchor_item());
        if rank <= k {
            out.violations
                .push(format!("instance {}: returned mask leaves rank {rank}", out.instances));
        }
        match min_deletions(&inst, k, cfg.budget) {
            Some(best) if best <= result.cost => out.optimal += usize::from(best == result.cost),
            other => out.violations.push(format!(
                "instance {}: oracle minimum {other:?} vs cost {}",
                out.instances, result.cost
            )),
        }
    }
    out
}
