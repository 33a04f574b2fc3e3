//! Path-counting baseline: scores candidates by the number of reasoning
//! paths reaching them.

use super::list::{RecEntry, RecommendedList};
use crate::error::{Error, Result};
use crate::kg::{
    path_type_of, Direction, EntityId, KnowledgeGraph, PathStep, PathType, ProductId,
    ReasoningPath, RelationId, TrainIndex, UserId,
};
use std::cmp::Reverse;
use std::collections::{BTreeSet, HashMap, HashSet};

/// Selection key of a candidate's representative path: most recent linking
/// interaction first, then lowest shared-entity degree, then smallest path
/// type, then smallest entity sequence.
type PathKey = (Reverse<u64>, u32, PathType, Vec<EntityId>);

struct Candidate {
    count: u64,
    best_key: PathKey,
    best_path: ReasoningPath,
}

/// Enumerates reasoning paths from a user's training products through the
/// graph and recommends the unseen catalog products reached most often.
pub struct PathCountRecommender<'a> {
    kg: &'a KnowledgeGraph,
    catalog: &'a BTreeSet<ProductId>,
    train: &'a TrainIndex,
    interaction_relation: RelationId,
}

impl<'a> PathCountRecommender<'a> {
    pub fn new(
        kg: &'a KnowledgeGraph,
        catalog: &'a BTreeSet<ProductId>,
        train: &'a TrainIndex,
        interaction_relation: RelationId,
    ) -> Self {
        Self {
            kg,
            catalog,
            train,
            interaction_relation,
        }
    }

    /// Ranks the top `k` unseen catalog products by the number of simple
    /// paths of at most `max_hops` steps (interaction hop included) that
    /// reach them. Ties in count are broken by product id; each candidate
    /// carries its representative path.
    pub fn recommend(
        &self,
        user: UserId,
        k: usize,
        max_hops: usize,
        seen: &HashSet<ProductId>,
    ) -> Result<RecommendedList> {
        if max_hops < 2 {
            return Err(Error::Config(format!(
                "max_hops must be at least 2, got {max_hops}"
            )));
        }
        let linking = self.train.products_most_recent_first(user);
        if linking.is_empty() {
            return Err(Error::Validation(format!(
                "user {user} has no training interactions to reason from"
            )));
        }

        let mut candidates: HashMap<ProductId, Candidate> = HashMap::new();
        for p1 in linking {
            let link_ts = self
                .train
                .latest(user, p1)
                .map(|i| i.timestamp)
                .unwrap_or_default();
            let mut steps = vec![PathStep {
                relation: self.interaction_relation,
                direction: Direction::Forward,
                entity: p1.entity(),
            }];
            let mut visited: HashSet<EntityId> = [p1.entity()].into();
            self.walk(
                user,
                link_ts,
                p1.entity(),
                max_hops - 1,
                seen,
                &mut steps,
                &mut visited,
                &mut candidates,
            )?;
        }

        let mut ranked: Vec<(ProductId, Candidate)> = candidates.into_iter().collect();
        ranked.sort_by(|(pa, ca), (pb, cb)| cb.count.cmp(&ca.count).then(pa.cmp(pb)));
        let entries = ranked
            .into_iter()
            .take(k)
            .enumerate()
            .map(|(i, (product, c))| RecEntry {
                rank: (i + 1) as u32,
                product,
                score: c.count as f64,
                path: Some(c.best_path),
            })
            .collect();
        Ok(RecommendedList { user, entries })
    }

    #[allow(clippy::too_many_arguments)]
    fn walk(
        &self,
        user: UserId,
        link_ts: u64,
        at: EntityId,
        remaining: usize,
        seen: &HashSet<ProductId>,
        steps: &mut Vec<PathStep>,
        visited: &mut HashSet<EntityId>,
        candidates: &mut HashMap<ProductId, Candidate>,
    ) -> Result<()> {
        if remaining == 0 {
            return Ok(());
        }
        let forward = self
            .kg
            .out_edges(at)
            .iter()
            .map(|&(r, e)| (r, Direction::Forward, e));
        let inverse = self
            .kg
            .in_edges(at)
            .iter()
            .map(|&(r, e)| (r, Direction::Inverse, e));
        for (relation, direction, entity) in forward.chain(inverse) {
            if visited.contains(&entity) {
                continue;
            }
            steps.push(PathStep {
                relation,
                direction,
                entity,
            });
            let as_product = entity.as_product();
            if self.catalog.contains(&as_product) && !seen.contains(&as_product) {
                self.record(user, link_ts, as_product, steps, candidates)?;
            }
            visited.insert(entity);
            self.walk(
                user,
                link_ts,
                entity,
                remaining - 1,
                seen,
                steps,
                visited,
                candidates,
            )?;
            visited.remove(&entity);
            steps.pop();
        }
        Ok(())
    }

    fn record(
        &self,
        user: UserId,
        link_ts: u64,
        product: ProductId,
        steps: &[PathStep],
        candidates: &mut HashMap<ProductId, Candidate>,
    ) -> Result<()> {
        let path = ReasoningPath {
            user,
            steps: steps.to_vec(),
        };
        let shared_degree = self.kg.degree(path.shared_entity()?)?;
        let entity_seq: Vec<EntityId> = path.steps.iter().map(|s| s.entity).collect();
        let key: PathKey = (
            Reverse(link_ts),
            shared_degree,
            path_type_of(&path)?,
            entity_seq,
        );
        candidates
            .entry(product)
            .and_modify(|c| {
                c.count += 1;
                if key < c.best_key {
                    c.best_key = key.clone();
                    c.best_path = path.clone();
                }
            })
            .or_insert(Candidate {
                count: 1,
                best_key: key,
                best_path: path,
            });
        Ok(())
    }
}
