//! Utility and beyond-utility recommendation metrics.
//!
//! All functions score one user's ranked list at a cutoff `k`; averaging
//! over users happens in the evaluation driver. Metrics that are undefined
//! for a user (no relevant products in the test window) return `None` and
//! are excluded from per-method means.

use crate::error::{Error, Result};
use crate::kg::{EntityId, ProductId};
use crate::rec::{PopularityModel, RecommendedList};
use std::collections::{BTreeMap, BTreeSet, HashSet};

/// Positional weight `1/log2(rank + 1)` shared by gain and exposure
/// computations.
pub fn rank_discount(rank: usize) -> f64 {
    1.0 / ((rank + 1) as f64).log2()
}

/// Binary-relevance normalized discounted cumulative gain at `k`.
///
/// Hits gain `1/log2(rank + 1)`; the ideal ranking places one relevant
/// product on each of the first `min(k, |relevant|)` positions. `None` when
/// the user has no relevant products.
pub fn ndcg_at_k(list: &RecommendedList, relevant: &HashSet<ProductId>, k: usize) -> Option<f64> {
    if relevant.is_empty() {
        return None;
    }
    let dcg: f64 = list
        .top(k)
        .iter()
        .enumerate()
        .filter(|(_, e)| relevant.contains(&e.product))
        .map(|(i, _)| rank_discount(i + 1))
        .sum();
    let ideal: f64 = (1..=k.min(relevant.len())).map(rank_discount).sum();
    Some(dcg / ideal)
}

/// Reciprocal rank of the first relevant product in the top `k`, 0 when none
/// appears. `None` when the user has no relevant products.
pub fn mrr_at_k(list: &RecommendedList, relevant: &HashSet<ProductId>, k: usize) -> Option<f64> {
    if relevant.is_empty() {
        return None;
    }
    let hit = list
        .top(k)
        .iter()
        .position(|e| relevant.contains(&e.product));
    Some(hit.map_or(0.0, |i| 1.0 / (i + 1) as f64))
}

/// Share of the catalog covered by the union of top-`k` recommendations
/// across lists.
pub fn coverage_at_k<'a>(
    lists: impl IntoIterator<Item = &'a RecommendedList>,
    k: usize,
    catalog_size: usize,
) -> Result<f64> {
    if catalog_size == 0 {
        return Err(Error::Validation(
            "coverage is undefined over an empty catalog".into(),
        ));
    }
    let mut covered: HashSet<ProductId> = HashSet::new();
    for list in lists {
        covered.extend(list.top(k).iter().map(|e| e.product));
    }
    Ok(covered.len() as f64 / catalog_size as f64)
}

/// Number of distinct categories among the top-`k` products divided by `k`.
/// Products without categories contribute nothing to the numerator.
pub fn diversity_at_k(
    list: &RecommendedList,
    category_of: &BTreeMap<ProductId, BTreeSet<EntityId>>,
    k: usize,
) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let mut categories: HashSet<EntityId> = HashSet::new();
    for e in list.top(k) {
        if let Some(cats) = category_of.get(&e.product) {
            categories.extend(cats.iter().copied());
        }
    }
    categories.len() as f64 / k as f64
}

/// Mean of `1 - count(p) / max_count` over the top-`k` products. Products
/// never interacted with during training contribute 1. Empty lists score 0.
pub fn novelty_at_k(list: &RecommendedList, pop: &PopularityModel, k: usize) -> f64 {
    let top = list.top(k);
    if top.is_empty() {
        return 0.0;
    }
    let max = pop.max_count();
    let sum: f64 = top
        .iter()
        .map(|e| {
            if max == 0 {
                1.0
            } else {
                1.0 - pop.count(e.product) as f64 / max as f64
            }
        })
        .sum();
    sum / top.len() as f64
}

/// Share of the top-`k` products absent from the popularity baseline's
/// top-`k` for the same user.
pub fn serendipity_at_k(
    list: &RecommendedList,
    baseline: &RecommendedList,
    k: usize,
) -> Result<f64> {
    if list.user != baseline.user {
        return Err(Error::Validation(format!(
            "serendipity compares lists of one user, got {} and {}",
            list.user, baseline.user
        )));
    }
    if k == 0 {
        return Ok(0.0);
    }
    let expected: HashSet<ProductId> = baseline.top(k).iter().map(|e| e.product).collect();
    let unexpected = list
        .top(k)
        .iter()
        .filter(|e| !expected.contains(&e.product))
        .count();
    Ok(unexpected as f64 / k as f64)
}
