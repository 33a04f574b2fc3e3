//! Ranked recommendation lists.

use crate::error::{Error, Result};
use crate::kg::{ProductId, ReasoningPath, UserId};
use std::collections::HashSet;

/// One ranked recommendation, optionally explained by a reasoning path.
#[derive(Clone, Debug, PartialEq)]
pub struct RecEntry {
    pub rank: u32,
    pub product: ProductId,
    pub score: f64,
    pub path: Option<ReasoningPath>,
}

/// A ranked top-k list for one user.
///
/// Invariants checked by [`RecommendedList::check`]: ranks are contiguous
/// from 1, products are unique, scores are finite and non-increasing, and
/// every attached path belongs to this user and ends at its entry's product.
#[derive(Clone, Debug, PartialEq)]
pub struct RecommendedList {
    pub user: UserId,
    pub entries: Vec<RecEntry>,
}

impl RecommendedList {
    pub fn check(&self) -> Result<()> {
        let mut products = HashSet::new();
        let mut prev_score = f64::INFINITY;
        for (i, e) in self.entries.iter().enumerate() {
            if e.rank as usize != i + 1 {
                return Err(Error::Validation(format!(
                    "user {}: rank {} at position {}, ranks must be contiguous from 1",
                    self.user,
                    e.rank,
                    i + 1
                )));
            }
            if !products.insert(e.product) {
                return Err(Error::Validation(format!(
                    "user {}: product {} recommended twice",
                    self.user, e.product
                )));
            }
            if !e.score.is_finite() {
                return Err(Error::Validation(format!(
                    "user {}: score at rank {} is not finite",
                    self.user, e.rank
                )));
            }
            if e.score > prev_score {
                return Err(Error::Validation(format!(
                    "user {}: score increases at rank {}",
                    self.user, e.rank
                )));
            }
            prev_score = e.score;
            if let Some(path) = &e.path {
                if path.user != self.user {
                    return Err(Error::Validation(format!(
                        "user {}: path at rank {} belongs to user {}",
                        self.user, e.rank, path.user
                    )));
                }
                if path.recommended_product()? != e.product {
                    return Err(Error::Validation(format!(
                        "user {}: path at rank {} does not end at product {}",
                        self.user, e.rank, e.product
                    )));
                }
            }
        }
        Ok(())
    }

    /// Entries with rank at most `k`.
    pub fn top(&self, k: usize) -> &[RecEntry] {
        &self.entries[..k.min(self.entries.len())]
    }

    /// Whether the list holds fewer than `k` entries.
    pub fn is_underfilled(&self, k: usize) -> bool {
        self.entries.len() < k
    }
}
