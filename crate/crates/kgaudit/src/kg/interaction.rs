//! User-product interaction records and the per-user training index.

use super::ids::{ProductId, UserId};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// One user-product interaction event.
///
/// `(user, product, timestamp)` triplets are unique after ingestion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub user: UserId,
    pub product: ProductId,
    pub rating: f64,
    pub timestamp: u64,
}

/// Sorts interactions by timestamp, keeping input order for equal timestamps
/// (and thereby product-id order for rows that are otherwise identical).
///
/// This is the one ordering rule used everywhere a chronological sequence is
/// needed: splitting, recency weights, and linking-interaction lookup.
pub fn sort_chronologically(interactions: &mut [Interaction]) {
    interactions.sort_by_key(|i| i.timestamp);
}

/// Per-user index over training interactions.
///
/// Each user's interactions are held in chronological order; the most recent
/// interaction per `(user, product)` pair is indexed for linking-interaction
/// lookup.
#[derive(Clone, Debug, Default)]
pub struct TrainIndex {
    by_user: HashMap<UserId, Vec<Interaction>>,
    latest: HashMap<(UserId, ProductId), Interaction>,
}

impl TrainIndex {
    pub fn new(train: &[Interaction]) -> Self {
        let mut by_user: HashMap<UserId, Vec<Interaction>> = HashMap::new();
        for i in train {
            by_user.entry(i.user).or_default().push(*i);
        }
        let mut latest = HashMap::new();
        for list in by_user.values_mut() {
            sort_chronologically(list);
            for i in list.iter() {
                latest.insert((i.user, i.product), *i);
            }
        }
        Self { by_user, latest }
    }

    /// The user's training interactions in chronological order; empty for
    /// unknown users.
    pub fn user(&self, u: UserId) -> &[Interaction] {
        self.by_user.get(&u).map_or(&[], Vec::as_slice)
    }

    pub fn user_count(&self) -> usize {
        self.by_user.len()
    }

    /// All indexed users in ascending id order.
    pub fn sorted_users(&self) -> Vec<UserId> {
        let mut users: Vec<UserId> = self.by_user.keys().copied().collect();
        users.sort_unstable();
        users
    }

    /// Whether `u` interacted with `p` during training.
    pub fn contains(&self, u: UserId, p: ProductId) -> bool {
        self.latest.contains_key(&(u, p))
    }

    /// The most recent training interaction of `u` with `p`.
    pub fn latest(&self, u: UserId, p: ProductId) -> Option<&Interaction> {
        self.latest.get(&(u, p))
    }

    /// Distinct products of `u`, ordered from most recently interacted to
    /// least recently.
    pub fn products_most_recent_first(&self, u: UserId) -> Vec<ProductId> {
        let mut out = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for i in self.user(u).iter().rev() {
            if seen.insert(i.product) {
                out.push(i.product);
            }
        }
        out
    }
}
