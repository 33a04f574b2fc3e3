//! Demographic-parity fairness across consumer and provider groups.
//!
//! Consumer fairness compares per-group means of any per-user metric;
//! provider fairness compares the positionally discounted exposure that each
//! provider group's products receive in the recommended lists. Both collapse
//! to a single delta: the mean absolute pairwise difference between group
//! means.

use crate::ingest::{AgeGroup, Demographics, Gender};
use crate::kg::{ProductId, ProviderId, UserId};
use crate::metrics::rank_discount;
use crate::rec::RecommendedList;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Group label reserved for products whose provider is unknown or carries no
/// attribute for the active dimension.
pub const UNATTRIBUTED: &str = "unattributed";

/// The sensitive attribute a grouping is built on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Gender,
    Age,
}

impl Dimension {
    pub fn labels(self) -> Vec<&'static str> {
        match self {
            Dimension::Gender => Gender::ALL.iter().map(|g| g.label()).collect(),
            Dimension::Age => AgeGroup::ALL.iter().map(|a| a.label()).collect(),
        }
    }

    pub fn label_of(self, d: &Demographics) -> Option<&'static str> {
        match self {
            Dimension::Gender => d.gender.map(|g| g.label()),
            Dimension::Age => d.age.map(|a| a.label()),
        }
    }
}

impl std::fmt::Display for Dimension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Dimension::Gender => "gender",
            Dimension::Age => "age",
        })
    }
}

/// Subjects (users or providers) partitioned by one sensitive attribute.
///
/// Subjects whose attribute is missing are left out of the mapping.
#[derive(Clone, Debug)]
pub struct GroupAssignment<K> {
    pub dimension: Dimension,
    pub mapping: BTreeMap<K, &'static str>,
}

impl<K: Ord + Copy> GroupAssignment<K> {
    pub fn new(attributes: &BTreeMap<K, Demographics>, dimension: Dimension) -> Self {
        let mapping = attributes
            .iter()
            .filter_map(|(&k, d)| dimension.label_of(d).map(|l| (k, l)))
            .collect();
        GroupAssignment { dimension, mapping }
    }

    pub fn group_of(&self, subject: K) -> Option<&'static str> {
        self.mapping.get(&subject).copied()
    }

    /// Labels of the dimension that have at least one assigned subject.
    pub fn populated_labels(&self) -> Vec<&'static str> {
        self.dimension
            .labels()
            .into_iter()
            .filter(|l| self.mapping.values().any(|v| v == l))
            .collect()
    }
}

/// Mean absolute difference over all unordered pairs; `None` below 2 values.
pub fn mean_abs_pairwise_delta(means: &[f64]) -> Option<f64> {
    if means.len() < 2 {
        return None;
    }
    let mut sum = 0.0;
    let mut pairs = 0u32;
    for (i, a) in means.iter().enumerate() {
        for b in &means[i + 1..] {
            sum += (a - b).abs();
            pairs += 1;
        }
    }
    Some(sum / f64::from(pairs))
}

/// Per-group means of one metric and their parity delta.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FairnessReport {
    pub dimension: Dimension,
    /// Mean metric value per group label; empty groups are absent here and
    /// listed in `empty_groups` instead.
    pub group_means: BTreeMap<String, f64>,
    /// Labels of the dimension with no contributing subject.
    pub empty_groups: Vec<String>,
    /// Mean absolute pairwise difference between the populated group means;
    /// `None` when fewer than two groups are populated.
    pub delta: Option<f64>,
}

/// Groups per-user metric values and reports the parity delta.
///
/// Users without a group label, or whose metric is undefined, contribute to
/// no group. Empty groups are excluded from the pairing and flagged.
pub fn group_delta(
    per_user: &BTreeMap<UserId, f64>,
    assignment: &GroupAssignment<UserId>,
) -> FairnessReport {
    let mut sums: BTreeMap<&'static str, (f64, u64)> = BTreeMap::new();
    for (&user, &value) in per_user {
        if let Some(label) = assignment.group_of(user) {
            let slot = sums.entry(label).or_insert((0.0, 0));
            slot.0 += value;
            slot.1 += 1;
        }
    }
    let mut group_means = BTreeMap::new();
    let mut empty_groups = Vec::new();
    let mut means = Vec::new();
    for label in assignment.dimension.labels() {
        match sums.get(label) {
            Some(&(sum, n)) => {
                let mean = sum / n as f64;
                group_means.insert(label.to_string(), mean);
                means.push(mean);
            }
            None => empty_groups.push(label.to_string()),
        }
    }
    FairnessReport {
        dimension: assignment.dimension,
        group_means,
        empty_groups,
        delta: mean_abs_pairwise_delta(&means),
    }
}

/// Positionally weighted share of one list's top-`k` attention per provider
/// group, with `1/log2(rank+1)` weights normalized to sum to 1 per list.
///
/// Products with no known provider, or an unattributed provider, accrue to
/// the reserved [`UNATTRIBUTED`] group. `None` for empty lists.
pub fn exposure_shares_at_k(
    list: &RecommendedList,
    provider_of: &BTreeMap<ProductId, ProviderId>,
    assignment: &GroupAssignment<ProviderId>,
    k: usize,
) -> Option<BTreeMap<&'static str, f64>> {
    let top = list.top(k);
    if top.is_empty() {
        return None;
    }
    let mut weights: BTreeMap<&'static str, f64> = BTreeMap::new();
    let mut total = 0.0;
    for entry in top {
        let w = rank_discount(entry.rank as usize);
        let label = provider_of
            .get(&entry.product)
            .and_then(|&p| assignment.group_of(p))
            .unwrap_or(UNATTRIBUTED);
        *weights.entry(label).or_insert(0.0) += w;
        total += w;
    }
    let mut shares: BTreeMap<&'static str, f64> = assignment
        .dimension
        .labels()
        .into_iter()
        .map(|l| (l, 0.0))
        .collect();
    shares.insert(UNATTRIBUTED, 0.0);
    for (label, w) in weights {
        shares.insert(label, w / total);
    }
    Some(shares)
}

/// Mean exposure share per provider group over all non-empty lists, with the
/// parity delta across populated attributed groups.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExposureReport {
    pub dimension: Dimension,
    /// Mean per-list exposure share of each attributed group.
    pub group_exposure: BTreeMap<String, f64>,
    /// Mean per-list share of products that resolve to no attributed
    /// provider; zero when every product is attributed.
    pub unattributed_share: f64,
    /// Labels of the dimension with no assigned provider.
    pub empty_groups: Vec<String>,
    /// Mean absolute pairwise difference between attributed group exposures;
    /// `None` when fewer than two groups have assigned providers.
    pub delta: Option<f64>,
    /// Number of lists the means were taken over.
    pub lists: usize,
}

/// Averages per-list exposure shares into per-group exposure and its delta.
///
/// Groups with no assigned provider are flagged and excluded from the
/// pairing; the unattributed share is reported separately, never paired.
pub fn provider_exposure<'a>(
    lists: impl IntoIterator<Item = &'a RecommendedList>,
    provider_of: &BTreeMap<ProductId, ProviderId>,
    assignment: &GroupAssignment<ProviderId>,
    k: usize,
) -> ExposureReport {
    let mut sums: BTreeMap<&'static str, f64> = BTreeMap::new();
    let mut unattributed_sum = 0.0;
    let mut n = 0usize;
    for list in lists {
        let Some(shares) = exposure_shares_at_k(list, provider_of, assignment, k) else {
            continue;
        };
        n += 1;
        for (label, share) in shares {
            if label == UNATTRIBUTED {
                unattributed_sum += share;
            } else {
                *sums.entry(label).or_insert(0.0) += share;
            }
        }
    }
    let populated = assignment.populated_labels();
    let mut group_exposure = BTreeMap::new();
    let mut means = Vec::new();
    for label in &populated {
        let mean = if n == 0 { 0.0 } else { sums[label] / n as f64 };
        group_exposure.insert(label.to_string(), mean);
        means.push(mean);
    }
    let empty_groups = assignment
        .dimension
        .labels()
        .into_iter()
        .filter(|l| !populated.contains(l))
        .map(|l| l.to_string())
        .collect();
    ExposureReport {
        dimension: assignment.dimension,
        group_exposure,
        unattributed_share: if n == 0 {
            0.0
        } else {
            unattributed_sum / n as f64
        },
        empty_groups,
        delta: if n == 0 {
            None
        } else {
            mean_abs_pairwise_delta(&means)
        },
        lists: n,
    }
}
