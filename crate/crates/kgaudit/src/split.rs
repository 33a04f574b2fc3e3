//! Chronological per-user splitting of interactions.

use crate::error::{Error, Result};
use crate::kg::{sort_chronologically, Interaction, UserId};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Fractions of each user's chronologically ordered interactions assigned to
/// the train, validation, and test partitions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub valid_fraction: f64,
    pub test_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.6,
            valid_fraction: 0.2,
            test_fraction: 0.2,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train_fraction, self.valid_fraction, self.test_fraction];
        if parts.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::Config(
                "split fractions must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions must sum to 1, got {sum}"
            )));
        }
        if self.train_fraction == 0.0 {
            return Err(Error::Config("train fraction must be positive".into()));
        }
        Ok(())
    }
}

/// The three partitions of a chronological split.
///
/// Each partition is ordered by user id, then chronologically within the
/// user. Users with fewer than three interactions are excluded entirely and
/// listed in `dropped_users`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitBundle {
    pub train: Vec<Interaction>,
    pub valid: Vec<Interaction>,
    pub test: Vec<Interaction>,
    pub dropped_users: Vec<UserId>,
}

/// Floor that absorbs the representation error of products like `0.6 * 5`,
/// which is stored just below 3 and would otherwise floor to 2.
fn stable_floor(x: f64) -> usize {
    (x + 1e-6).floor() as usize
}

/// Splits interactions per user along the time axis.
///
/// Each user's interactions are ordered by timestamp (ties keep input order);
/// the first `⌊train·n⌋` go to train (at least one), the next
/// `⌊(train+valid)·n⌋ − ⌊train·n⌋` to validation, and the rest to test. With
/// the default 60/20/20 fractions every kept user contributes to all three
/// partitions.
pub fn chronological_split(interactions: &[Interaction], cfg: &SplitConfig) -> Result<SplitBundle> {
    cfg.validate()?;
    let mut per_user: BTreeMap<UserId, Vec<Interaction>> = BTreeMap::new();
    for i in interactions {
        per_user.entry(i.user).or_default().push(*i);
    }

    let mut out = SplitBundle::default();
    for (user, mut list) in per_user {
        let n = list.len();
        if n < 3 {
            out.dropped_users.push(user);
            continue;
        }
        sort_chronologically(&mut list);
        let train_end = stable_floor(cfg.train_fraction * n as f64).clamp(1, n);
        let valid_end =
            stable_floor((cfg.train_fraction + cfg.valid_fraction) * n as f64).clamp(train_end, n);
        out.train.extend_from_slice(&list[..train_end]);
        out.valid.extend_from_slice(&list[train_end..valid_end]);
        out.test.extend_from_slice(&list[valid_end..]);
    }
    Ok(out)
}
