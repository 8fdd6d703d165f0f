//! Sampling protocol: explain every top-k item of a random slice of users
//! with each method in both modes, and check each explanation against the
//! black box.

mod metrics;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use metrics::{compute_metrics, format_table, MethodMetrics, MetricsReport, Summary};

use crate::baselines::{personalrank_explain, random_explain, DEFAULT_RESTART};
use crate::error::{Error, Result};
use crate::explainer::{grease_explain, ExplanationResult, GreaseConfig, Method, Mode};
use crate::recommender::BlackBox;
use crate::subgraph::l_hop_subgraph;
use crate::surrogate::{train_surrogate, LocalScorer, SurrogateConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub k: usize,
    /// Share of users sampled per repeat.
    pub user_fraction: f64,
    pub repeats: usize,
    pub seed: u64,
    pub hops: usize,
    pub methods: Vec<Method>,
    pub modes: Vec<Mode>,
    pub fa_budget: usize,
    pub cf_budget: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub init_logit: f64,
    pub restart: f64,
    pub surrogate: SurrogateConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let grease = GreaseConfig::new(Mode::Counterfactual, 10);
        Self {
            k: 10,
            user_fraction: 0.1,
            repeats: 5,
            seed: 0,
            hops: 2,
            methods: Method::ALL.to_vec(),
            modes: vec![Mode::Factual, Mode::Counterfactual],
            fa_budget: Mode::Factual.default_budget(),
            cf_budget: Mode::Counterfactual.default_budget(),
            iterations: grease.iterations,
            learning_rate: grease.learning_rate,
            beta: grease.beta,
            epsilon: grease.epsilon,
            init_logit: grease.init_logit,
            restart: DEFAULT_RESTART,
            surrogate: SurrogateConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.user_fraction > 0.0 && self.user_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "user fraction {} not in (0, 1]",
                self.user_fraction
            )));
        }
        if self.repeats == 0 || self.hops == 0 {
            return Err(Error::InvalidParameter("repeats and hops must be positive".into()));
        }
        if self.methods.is_empty() || self.modes.is_empty() {
            return Err(Error::InvalidParameter("no methods or modes selected".into()));
        }
        for mode in [Mode::Factual, Mode::Counterfactual] {
            self.grease_config(mode).validate()?;
        }
        self.surrogate.validate()
    }

    pub fn budget(&self, mode: Mode) -> usize {
        match mode {
            Mode::Factual => self.fa_budget,
            Mode::Counterfactual => self.cf_budget,
        }
    }

    pub fn grease_config(&self, mode: Mode) -> GreaseConfig {
        GreaseConfig {
            iterations: self.iterations,
            learning_rate: self.learning_rate,
            beta: self.beta,
            epsilon: self.epsilon,
            k: self.k,
            mode,
            budget: self.budget(mode),
            init_logit: self.init_logit,
        }
    }
}

/// One explanation attempt, keyed by raw user and item ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRecord {
    pub method: Method,
    pub repeat: usize,
    pub user: u64,
    pub item: u64,
    pub mode: Mode,
    /// Re-added (factual) or deleted (counterfactual) interactions.
    pub edges: Vec<[u64; 2]>,
    pub ec: Option<usize>,
    pub valid_surrogate: bool,
    pub valid_blackbox: bool,
    /// Black-box rank of the item before any change.
    pub rank_before: usize,
    /// Black-box rank under the explanation, when one was found.
    pub rank_after: Option<usize>,
    pub iterations: usize,
    pub surrogate_accepted: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub records: Vec<ExplanationRecord>,
    pub report: MetricsReport,
}

/// Users drawn for `repeat`, ascending.
pub fn sample_users(num_users: usize, fraction: f64, seed: u64, repeat: usize) -> Vec<usize> {
    let count = ((fraction * num_users as f64).round() as usize).clamp(1, num_users.max(1));
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, repeat as u64, 0));
    let mut users = sample(&mut rng, num_users, count.min(num_users)).into_vec();
    users.sort_unstable();
    users
}

/// Deterministic per-pair seed.
pub fn pair_seed(seed: u64, repeat: usize, user: usize, item: usize) -> u64 {
    mix(seed, repeat as u64, ((user as u64) << 32) ^ item as u64)
}

fn mix(a: u64, b: u64, c: u64) -> u64 {
    // splitmix64 finalizer over a simple combination
    let mut z = a
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(b.wrapping_mul(0xbf58_476d_1ce4_e5b9))
        .wrapping_add(c.wrapping_mul(0x94d0_49bb_1331_11eb))
        .wrapping_add(0x2545_f491_4f6c_dd1d);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Runs the full protocol. Pairs are processed in parallel; the record
/// order depends only on the inputs.
pub fn run_experiment(cfg: &ExperimentConfig, blackbox: &BlackBox) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let num_users = blackbox.graph().num_users();
    let mut pairs = Vec::new();
    for repeat in 0..cfg.repeats {
        for user in sample_users(num_users, cfg.user_fraction, cfg.seed, repeat) {
            for (item, _) in blackbox.top_k(user, cfg.k)?.items {
                pairs.push((repeat, user, item));
            }
        }
    }
    let records: Vec<ExplanationRecord> = pairs
        .par_iter()
        .map(|&(repeat, user, item)| explain_pair(cfg, blackbox, repeat, user, item))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let report = compute_metrics(&records, cfg.k);
    Ok(ExperimentOutput { records, report })
}

/// Every enabled method in every enabled mode for one pair. Failures
/// become unsuccessful records instead of errors.
pub fn explain_pair(
    cfg: &ExperimentConfig,
    blackbox: &BlackBox,
    repeat: usize,
    user: usize,
    item: usize,
) -> Vec<ExplanationRecord> {
    let graph = blackbox.graph();
    let seed = pair_seed(cfg.seed, repeat, user, item);
    let rank_before = blackbox.rank_of(user, item).unwrap_or(usize::MAX);
    let blank = |method: Method, mode: Mode, accepted: bool, error: Option<String>| ExplanationRecord {
        method,
        repeat,
        user: graph.user_id(user),
        item: graph.item_id(item),
        mode,
        edges: Vec::new(),
        ec: None,
        valid_surrogate: false,
        valid_blackbox: false,
        rank_before,
        rank_after: None,
        iterations: 0,
        surrogate_accepted: accepted,
        error,
    };
    let scorer = l_hop_subgraph(graph, user, item, cfg.hops).and_then(|sg| {
        let scfg = SurrogateConfig {
            seed,
            k: cfg.k,
            ..cfg.surrogate.clone()
        };
        train_surrogate(blackbox, &sg, &scfg).map(|(scorer, _)| scorer)
    });
    let scorer = match scorer {
        Ok(s) => s,
        Err(e) => {
            let msg = Some(e.to_string());
            return cfg
                .methods
                .iter()
                .flat_map(|&m| cfg.modes.iter().map(move |&mode| (m, mode)))
                .map(|(m, mode)| blank(m, mode, false, msg.clone()))
                .collect();
        }
    };
    let mut out = Vec::new();
    for &method in &cfg.methods {
        for &mode in &cfg.modes {
            let found = run_method(cfg, &scorer, method, mode, seed);
            let record = match found {
                Ok(Some(result)) => match validate_on_blackbox(blackbox, &scorer, &result, cfg.k) {
                    Ok((valid_blackbox, rank_after)) => ExplanationRecord {
                        edges: result
                            .edges
                            .iter()
                            .map(|&(u, i)| [graph.user_id(u), graph.item_id(i)])
                            .collect(),
                        ec: Some(result.cost),
                        valid_surrogate: result.valid,
                        valid_blackbox,
                        rank_after: Some(rank_after),
                        iterations: result.iterations,
                        ..blank(method, mode, true, None)
                    },
                    Err(e) => blank(method, mode, true, Some(e.to_string())),
                },
                Ok(None) => blank(method, mode, true, None),
                Err(e) => blank(method, mode, true, Some(e.to_string())),
            };
            out.push(record);
        }
    }
    out
}

fn run_method(
    cfg: &ExperimentConfig,
    scorer: &LocalScorer,
    method: Method,
    mode: Mode,
    seed: u64,
) -> Result<Option<ExplanationResult>> {
    let budget = cfg.budget(mode);
    match method {
        Method::Grease => grease_explain(scorer, &cfg.grease_config(mode)),
        Method::PersonalRank => personalrank_explain(scorer, mode, cfg.k, budget, cfg.restart),
        Method::Random => random_explain(scorer, mode, cfg.k, budget, mix(seed, mode as u64, 1)),
    }
}

/// Black-box validity and rank of an explanation: the black box is
/// re-propagated with the explanation's absent edges deleted.
pub fn validate_on_blackbox(
    blackbox: &BlackBox,
    scorer: &LocalScorer,
    result: &ExplanationResult,
    k: usize,
) -> Result<(bool, usize)> {
    let sg = scorer.subgraph();
    let removed = result.removed_edges(sg);
    let rank = blackbox.rank_without(sg.anchor_user(), sg.anchor_item(), &removed)?;
    Ok((result.mode.is_success(rank, k), rank))
}

/// One JSON object per line.
pub fn write_records(mut out: impl std::io::Write, records: &[ExplanationRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_records(input: impl std::io::BufRead) -> Result<Vec<ExplanationRecord>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: n + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
