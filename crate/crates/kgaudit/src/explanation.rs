//! Explanation-quality metrics over the reasoning paths attached to ranked
//! lists.
//!
//! Per-list metrics look at the explained entries in the top `k` (entries
//! carrying a path). Lists with no explained entries in the window are
//! undefined (`None`) for every metric except fidelity, which then scores 0
//! and still counts toward the per-method mean.

use crate::error::{Error, Result};
use crate::kg::{
    path_pattern_of, path_type_of, sort_chronologically, EntityId, Interaction, KnowledgeGraph,
    PathPattern, PathType, ProductId, ReasoningPath, UserId,
};
use crate::rec::{RecEntry, RecommendedList};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

/// Recency and popularity weights shared by every explanation metric of one
/// run.
#[derive(Clone, Debug, Default)]
pub struct ExplanationWeights {
    /// Recency weight of each user's most recent training interaction with a
    /// product, after per-user min-max normalization and exponential
    /// smoothing.
    lir: HashMap<(UserId, ProductId), f64>,
    /// Popularity weight of each entity: log-degree over the maximum
    /// log-degree among entities of the same type.
    sep: HashMap<EntityId, f64>,
    pub beta: f64,
}

impl ExplanationWeights {
    pub fn lir_weight(&self, user: UserId, linking: ProductId) -> Option<f64> {
        self.lir.get(&(user, linking)).copied()
    }

    pub fn sep_weight(&self, entity: EntityId) -> Option<f64> {
        self.sep.get(&entity).copied()
    }
}

/// Computes recency weights per training interaction and popularity weights
/// per graph entity.
///
/// Per user, interaction timestamps are min-max normalized to `[0, 1]` (all
/// equal maps to 0.5) and smoothed chronologically with
/// `w_i = (1 - beta) * w_{i-1} + beta * v_i`, `w_1 = v_1`. With
/// `beta` in `(0, 1]` the weights are non-decreasing over time, so the most
/// recent interaction per `(user, product)` carries that pair's weight.
pub fn precompute_weights(
    train: &[Interaction],
    kg: &KnowledgeGraph,
    beta: f64,
) -> Result<ExplanationWeights> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::Config(format!(
            "smoothing beta must be in (0, 1], got {beta}"
        )));
    }
    let mut per_user: BTreeMap<UserId, Vec<Interaction>> = BTreeMap::new();
    for i in train {
        per_user.entry(i.user).or_default().push(*i);
    }

    let mut lir = HashMap::new();
    for (user, mut rows) in per_user {
        sort_chronologically(&mut rows);
        let t_min = rows.first().map(|i| i.timestamp).unwrap_or(0);
        let t_max = rows.last().map(|i| i.timestamp).unwrap_or(0);
        let span = (t_max - t_min) as f64;
        let mut w = 0.0;
        for (i, row) in rows.iter().enumerate() {
            let v = if span == 0.0 {
                0.5
            } else {
                (row.timestamp - t_min) as f64 / span
            };
            w = if i == 0 {
                v
            } else {
                (1.0 - beta) * w + beta * v
            };
            lir.insert((user, row.product), w);
        }
    }

    let mut typed: Vec<(EntityId, u32, f64)> = Vec::with_capacity(kg.entity_count());
    let mut max_log_degree: HashMap<u32, f64> = HashMap::new();
    for &e in kg.entities() {
        let t = kg.entity_type(e).ok_or(Error::UnknownId {
            kind: "entity",
            id: e.0,
        })?;
        let d = (1.0 + kg.degree(e)? as f64).ln();
        typed.push((e, t.0, d));
        let slot = max_log_degree.entry(t.0).or_insert(0.0);
        if d > *slot {
            *slot = d;
        }
    }
    let mut sep = HashMap::new();
    for (e, t, d) in typed {
        let max = max_log_degree[&t];
        sep.insert(e, if max == 0.0 { 0.0 } else { d / max });
    }

    Ok(ExplanationWeights { lir, sep, beta })
}

fn explained(
    list: &RecommendedList,
    k: usize,
) -> impl Iterator<Item = (&RecEntry, &ReasoningPath)> {
    list.top(k)
        .iter()
        .filter_map(|e| e.path.as_ref().map(|p| (e, p)))
}

fn explained_count(list: &RecommendedList, k: usize) -> usize {
    explained(list, k).count()
}

/// Share of the top-`k` entries carrying a reasoning path, over
/// `min(k, list length)`. Empty lists score 0.
pub fn fidelity_at_k(list: &RecommendedList, k: usize) -> f64 {
    let denom = k.min(list.entries.len());
    if denom == 0 {
        return 0.0;
    }
    explained_count(list, k) as f64 / denom as f64
}

/// Mean recency weight of the linking interactions behind the explained
/// top-`k` entries.
pub fn lir_at_k(list: &RecommendedList, weights: &ExplanationWeights, k: usize) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (_, path) in explained(list, k) {
        let linking = path.linking_product().ok()?;
        if let Some(w) = weights.lir_weight(path.user, linking) {
            sum += w;
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Mean popularity weight of the shared entities behind the explained
/// top-`k` entries.
pub fn sep_at_k(list: &RecommendedList, weights: &ExplanationWeights, k: usize) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (_, path) in explained(list, k) {
        let shared = path.shared_entity().ok()?;
        if let Some(w) = weights.sep_weight(shared) {
            sum += w;
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Distinct linking interactions over explained entries in the top `k`.
///
/// Linking interactions resolve to the most recent training interaction with
/// the linking product, so distinct linking products equal distinct linking
/// interactions.
pub fn lid_at_k(list: &RecommendedList, k: usize) -> Option<f64> {
    let mut n = 0usize;
    let mut distinct: HashSet<ProductId> = HashSet::new();
    for (_, path) in explained(list, k) {
        distinct.insert(path.linking_product().ok()?);
        n += 1;
    }
    (n > 0).then(|| distinct.len() as f64 / n as f64)
}

/// Distinct shared entities over explained entries in the top `k`.
pub fn sed_at_k(list: &RecommendedList, k: usize) -> Option<f64> {
    let mut n = 0usize;
    let mut distinct: HashSet<EntityId> = HashSet::new();
    for (_, path) in explained(list, k) {
        distinct.insert(path.shared_entity().ok()?);
        n += 1;
    }
    (n > 0).then(|| distinct.len() as f64 / n as f64)
}

/// Distinct path types over explained entries in the top `k`.
pub fn ptd_at_k(list: &RecommendedList, k: usize) -> Option<f64> {
    let mut n = 0usize;
    let mut distinct: HashSet<PathType> = HashSet::new();
    for (_, path) in explained(list, k) {
        distinct.insert(path_type_of(path).ok()?);
        n += 1;
    }
    (n > 0).then(|| distinct.len() as f64 / n as f64)
}

/// Path types present among explained entries in the top `k`.
pub fn path_types_at_k(list: &RecommendedList, k: usize) -> BTreeSet<PathType> {
    explained(list, k)
        .filter_map(|(_, p)| path_type_of(p).ok())
        .collect()
}

/// Path patterns present among explained entries in the top `k`.
pub fn path_patterns_at_k(
    list: &RecommendedList,
    kg: &KnowledgeGraph,
    k: usize,
) -> Result<BTreeSet<PathPattern>> {
    explained(list, k)
        .map(|(_, p)| path_pattern_of(p, kg))
        .collect()
}

fn concentration<T: Ord>(counts: BTreeMap<T, u64>, run_total: usize) -> f64 {
    if run_total <= 1 {
        return 0.0;
    }
    let n: u64 = counts.values().sum();
    let entropy: f64 = counts
        .values()
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.log2()
        })
        .sum();
    entropy / (run_total as f64).log2()
}

/// Entropy of the list's path-type distribution, normalized by the log of
/// the number of distinct path types seen run-wide at this cutoff.
pub fn ptc_at_k(list: &RecommendedList, run_total_types: usize, k: usize) -> Option<f64> {
    let mut counts: BTreeMap<PathType, u64> = BTreeMap::new();
    let mut n = 0usize;
    for (_, path) in explained(list, k) {
        *counts.entry(path_type_of(path).ok()?).or_insert(0) += 1;
        n += 1;
    }
    (n > 0).then(|| concentration(counts, run_total_types))
}

/// Entropy of the list's path-pattern distribution, normalized by the log of
/// the number of distinct patterns seen run-wide at this cutoff.
pub fn ppc_at_k(
    list: &RecommendedList,
    kg: &KnowledgeGraph,
    run_total_patterns: usize,
    k: usize,
) -> Option<f64> {
    let mut counts: BTreeMap<PathPattern, u64> = BTreeMap::new();
    let mut n = 0usize;
    for (_, path) in explained(list, k) {
        *counts.entry(path_pattern_of(path, kg).ok()?).or_insert(0) += 1;
        n += 1;
    }
    (n > 0).then(|| concentration(counts, run_total_patterns))
}
