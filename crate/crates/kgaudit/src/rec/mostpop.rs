//! Popularity baseline: products ranked by training interaction count.

use super::list::{RecEntry, RecommendedList};
use crate::kg::{Interaction, ProductId, UserId};
use std::collections::{BTreeSet, HashMap, HashSet};

/// Training interaction counts with a fixed catalog-wide ranking.
///
/// Products are ranked by count descending, id ascending; catalog products
/// never interacted with rank last with count 0.
#[derive(Clone, Debug)]
pub struct PopularityModel {
    counts: HashMap<ProductId, u64>,
    ranking: Vec<ProductId>,
    max_count: u64,
}

impl PopularityModel {
    pub fn train(train: &[Interaction], catalog: &BTreeSet<ProductId>) -> Self {
        let mut counts: HashMap<ProductId, u64> = HashMap::new();
        for i in train {
            *counts.entry(i.product).or_insert(0) += 1;
        }
        let mut ranking: Vec<ProductId> = catalog.iter().copied().collect();
        ranking.sort_by_key(|p| (std::cmp::Reverse(counts.get(p).copied().unwrap_or(0)), *p));
        let max_count = counts.values().copied().max().unwrap_or(0);
        Self {
            counts,
            ranking,
            max_count,
        }
    }

    /// Training interactions with `p`; 0 for products never interacted with.
    pub fn count(&self, p: ProductId) -> u64 {
        self.counts.get(&p).copied().unwrap_or(0)
    }

    pub fn max_count(&self) -> u64 {
        self.max_count
    }

    /// The full catalog ranking, count descending then id ascending.
    pub fn ranking(&self) -> &[ProductId] {
        &self.ranking
    }

    /// The `k` most popular products the user has not seen. The list is
    /// shorter than `k` when the unseen pool is exhausted.
    pub fn recommend(&self, user: UserId, k: usize, seen: &HashSet<ProductId>) -> RecommendedList {
        let entries: Vec<RecEntry> = self
            .ranking
            .iter()
            .filter(|p| !seen.contains(p))
            .take(k)
            .enumerate()
            .map(|(i, &p)| RecEntry {
                rank: (i + 1) as u32,
                product: p,
                score: self.count(p) as f64,
                path: None,
            })
            .collect();
        RecommendedList { user, entries }
    }
}
