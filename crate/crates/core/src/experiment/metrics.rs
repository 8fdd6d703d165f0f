use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::ExplanationRecord;
use crate::explainer::{Method, Mode};

/// Mean and sample standard deviation over repeats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Zero when there is a single repeat.
    pub std: f64,
    pub repeats: usize,
}

impl Summary {
    /// `None` for an empty slice.
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, std, repeats: n })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub method: Method,
    /// Share of factual attempts valid on the black box.
    pub ps: Option<Summary>,
    /// Share of counterfactual attempts valid on the black box.
    pub pn: Option<Summary>,
    pub ec_fa: Option<Summary>,
    pub ec_cf: Option<Summary>,
    pub fa_attempts: usize,
    pub cf_attempts: usize,
    pub fa_valid: usize,
    pub cf_valid: usize,
    /// Distinct `(repeat, user, item)` pairs attempted.
    pub pairs: usize,
    pub surrogate_rejections: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub k: usize,
    pub methods: Vec<MethodMetrics>,
}

impl MetricsReport {
    pub fn method(&self, method: Method) -> Option<&MethodMetrics> {
        self.methods.iter().find(|m| m.method == method)
    }
}

#[derive(Default)]
struct Cell {
    attempts: usize,
    valid: usize,
    costs: Vec<f64>,
}

/// Aggregates records into per-method scores. A rate or cost with nothing to
/// average over is `None`, never 0.
pub fn compute_metrics(records: &[ExplanationRecord], k: usize) -> MetricsReport {
    // method → mode → repeat → cell
    let mut cells: BTreeMap<Method, BTreeMap<Mode, BTreeMap<usize, Cell>>> = BTreeMap::new();
    let mut pairs: BTreeMap<Method, BTreeSet<(usize, u64, u64)>> = BTreeMap::new();
    let mut rejected: BTreeMap<Method, BTreeSet<(usize, u64, u64)>> = BTreeMap::new();
    for r in records {
        let cell = cells
            .entry(r.method)
            .or_default()
            .entry(r.mode)
            .or_default()
            .entry(r.repeat)
            .or_default();
        cell.attempts += 1;
        if r.valid_blackbox {
            cell.valid += 1;
            if let Some(ec) = r.ec {
                cell.costs.push(ec as f64);
            }
        }
        let key = (r.repeat, r.user, r.item);
        pairs.entry(r.method).or_default().insert(key);
        if !r.surrogate_accepted {
            rejected.entry(r.method).or_default().insert(key);
        }
    }
    let methods = cells
        .into_iter()
        .map(|(method, modes)| {
            let side = |mode: Mode| {
                let Some(repeats) = modes.get(&mode) else {
                    return (None, None, 0, 0);
                };
                let rates: Vec<f64> = repeats
                    .values()
                    .filter(|c| c.attempts > 0)
                    .map(|c| c.valid as f64 / c.attempts as f64)
                    .collect();
                let costs: Vec<f64> = repeats
                    .values()
                    .filter(|c| !c.costs.is_empty())
                    .map(|c| c.costs.iter().sum::<f64>() / c.costs.len() as f64)
                    .collect();
                let attempts = repeats.values().map(|c| c.attempts).sum();
                let valid = repeats.values().map(|c| c.valid).sum();
                (Summary::of(&rates), Summary::of(&costs), attempts, valid)
            };
            let (ps, ec_fa, fa_attempts, fa_valid) = side(Mode::Factual);
            let (pn, ec_cf, cf_attempts, cf_valid) = side(Mode::Counterfactual);
            MethodMetrics {
                method,
                ps,
                pn,
                ec_fa,
                ec_cf,
                fa_attempts,
                cf_attempts,
                fa_valid,
                cf_valid,
                pairs: pairs.get(&method).map_or(0, |s| s.len()),
                surrogate_rejections: rejected.get(&method).map_or(0, |s| s.len()),
            }
        })
        .collect();
    MetricsReport { k, methods }
}

fn cell(s: Option<Summary>) -> String {
    match s {
        Some(s) => format!("{:.3}±{:.3}", s.mean, s.std),
        None => "-".to_string(),
    }
}

/// Plain-text table: one row per method, counterfactual columns first.
pub fn format_table(report: &MetricsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "top-{}", report.k);
    let _ = writeln!(
        out,
        "{:<14}{:>16}{:>16}{:>16}{:>16}{:>8}{:>10}",
        "method", "PN", "EC(CF)", "PS", "EC(FA)", "pairs", "rejected"
    );
    for m in &report.methods {
        let _ = writeln!(
            out,
            "{:<14}{:>16}{:>16}{:>16}{:>16}{:>8}{:>10}",
            m.method.as_str(),
            cell(m.pn),
            cell(m.ec_cf),
            cell(m.ps),
            cell(m.ec_fa),
            m.pairs,
            m.surrogate_rejections
        );
    }
    out
}
