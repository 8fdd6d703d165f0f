//! Interaction files, train/test splitting and a planted-block generator.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;

/// Reads `user<TAB>item[<TAB>...]` lines. Blank lines and lines starting
/// with `#` are skipped.
pub fn load_interactions(path: impl AsRef<Path>) -> Result<Vec<(u64, u64)>> {
    parse_interactions(BufReader::new(File::open(path)?))
}

pub fn parse_interactions(reader: impl BufRead) -> Result<Vec<(u64, u64)>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let mut next_id = |what: &str| -> Result<u64> {
            let raw = fields.next().ok_or_else(|| Error::Parse {
                line: n + 1,
                message: format!("missing {what} id"),
            })?;
            raw.trim().parse().map_err(|_| Error::Parse {
                line: n + 1,
                message: format!("bad {what} id {raw:?}"),
            })
        };
        let user = next_id("user")?;
        let item = next_id("item")?;
        out.push((user, item));
    }
    Ok(out)
}

pub fn write_interactions(mut out: impl Write, interactions: &[(u64, u64)]) -> Result<()> {
    for &(u, i) in interactions {
        writeln!(out, "{u}\t{i}")?;
    }
    Ok(())
}

/// Training graph plus held-out interactions (raw ids).
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub train: BipartiteGraph,
    pub test: Vec<(u64, u64)>,
}

/// Per-user random split. A user with `h ≥ 2` distinct interactions keeps
/// `max(1, ⌊ratio·h⌋)` of them for training; a user with one keeps it.
pub fn split_train_test(name: &str, interactions: &[(u64, u64)], ratio: f64, seed: u64) -> Result<Dataset> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidParameter(format!("split ratio {ratio} not in (0, 1)")));
    }
    if interactions.is_empty() {
        return Err(Error::EmptyInteractions);
    }
    let mut seen = HashSet::new();
    let mut order: Vec<u64> = Vec::new();
    let mut per_user: HashMap<u64, Vec<usize>> = HashMap::new();
    for (pos, &(u, i)) in interactions.iter().enumerate() {
        if !seen.insert((u, i)) {
            continue;
        }
        per_user
            .entry(u)
            .or_insert_with(|| {
                order.push(u);
                Vec::new()
            })
            .push(pos);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; interactions.len()];
    let mut test_pos = Vec::new();
    for u in &order {
        let mut positions = per_user[u].clone();
        let h = positions.len();
        let keep = if h < 2 {
            h
        } else {
            ((ratio * h as f64 + 1e-9).floor() as usize).max(1)
        };
        positions.shuffle(&mut rng);
        for &p in &positions[..keep] {
            in_train[p] = true;
        }
        test_pos.extend_from_slice(&positions[keep..]);
    }
    test_pos.sort_unstable();
    let train: Vec<(u64, u64)> = interactions
        .iter()
        .zip(&in_train)
        .filter(|(_, &t)| t)
        .map(|(&e, _)| e)
        .collect();
    Ok(Dataset {
        name: name.to_string(),
        train: BipartiteGraph::from_interactions(&train)?,
        test: test_pos.into_iter().map(|p| interactions[p]).collect(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub num_users: usize,
    pub num_items: usize,
    pub blocks: usize,
    /// Edge probability for a user–item pair in the same block.
    pub intra_prob: f64,
    /// Edge probability for a pair in different blocks.
    pub noise_prob: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            num_users: 200,
            num_items: 300,
            blocks: 2,
            intra_prob: 0.08,
            noise_prob: 0.005,
            seed: 0,
        }
    }
}

/// Block of user or item `index` when `count` nodes are cut into `blocks`
/// contiguous runs.
pub fn block_of(index: usize, count: usize, blocks: usize) -> usize {
    index * blocks / count
}

/// Planted-block interactions, users and items numbered from 0, in
/// `(user, item)` order.
pub fn gen_synthetic(cfg: &SyntheticConfig) -> Result<Vec<(u64, u64)>> {
    if cfg.blocks < 2 {
        return Err(Error::InvalidParameter("need at least 2 blocks".into()));
    }
    if cfg.num_users < cfg.blocks || cfg.num_items < cfg.blocks {
        return Err(Error::InvalidParameter("fewer nodes than blocks".into()));
    }
    for p in [cfg.intra_prob, cfg.noise_prob] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("probability {p} not in [0, 1]")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::new();
    for u in 0..cfg.num_users {
        let bu = block_of(u, cfg.num_users, cfg.blocks);
        for i in 0..cfg.num_items {
            let p = if block_of(i, cfg.num_items, cfg.blocks) == bu {
                cfg.intra_prob
            } else {
                cfg.noise_prob
            };
            if rng.random::<f64>() < p {
                out.push((u as u64, i as u64));
            }
        }
    }
    Ok(out)
}
