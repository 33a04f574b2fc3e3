//! Knowledge graph storage with bidirectional adjacency and degree lookup.

use super::ids::{EntityId, RelationId, TypeId};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// One directed fact `head --relation--> tail`.
///
/// After preprocessing every head is a catalog product and every tail an
/// external (non-product) entity; freshly parsed graphs may hold arbitrary
/// triples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

/// Traversal direction of a relation within a reasoning path.
///
/// `Forward` follows a stored triple head to tail, `Inverse` walks it tail to
/// head. Inverse traversal stays a flag on the step; no synthetic inverse
/// relation ids exist.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Inverse,
}

/// An immutable knowledge graph over a declared entity set.
///
/// Degree counts incident triples in either direction. Equality compares the
/// triple list and entity declarations; adjacency and degree are derived from
/// those at construction.
#[derive(Clone, Debug)]
pub struct KnowledgeGraph {
    triples: Vec<Triple>,
    entity_type: Vec<Option<TypeId>>,
    out_edges: Vec<Vec<(RelationId, EntityId)>>,
    in_edges: Vec<Vec<(RelationId, EntityId)>>,
    degree: Vec<u32>,
    members: Vec<EntityId>,
    relation_ids: Vec<RelationId>,
    duplicates_dropped: u64,
}

impl PartialEq for KnowledgeGraph {
    fn eq(&self, other: &Self) -> bool {
        self.triples == other.triples && self.entity_type == other.entity_type
    }
}

impl KnowledgeGraph {
    /// Builds a graph from declared `(entity, type)` pairs and triples.
    ///
    /// Exact duplicate triples are dropped (the count is kept for warning
    /// output). Fails if a triple endpoint or a duplicate declaration refers
    /// to an entity outside the declared set.
    pub fn new(entities: Vec<(EntityId, TypeId)>, triples: Vec<Triple>) -> Result<Self> {
        let span = entities
            .iter()
            .map(|(e, _)| e.index() + 1)
            .max()
            .unwrap_or(0);
        let mut entity_type: Vec<Option<TypeId>> = vec![None; span];
        let mut members = Vec::with_capacity(entities.len());
        for (e, t) in &entities {
            let slot = &mut entity_type[e.index()];
            if let Some(prev) = slot {
                if *prev != *t {
                    return Err(Error::Invariant(format!(
                        "entity {e} declared with two types ({} and {})",
                        prev.0, t.0
                    )));
                }
            } else {
                *slot = Some(*t);
                members.push(*e);
            }
        }
        members.sort_unstable();

        let mut seen = std::collections::HashSet::with_capacity(triples.len());
        let mut kept = Vec::with_capacity(triples.len());
        let mut duplicates_dropped = 0u64;
        for t in triples {
            for end in [t.head, t.tail] {
                if end.index() >= span || entity_type[end.index()].is_none() {
                    return Err(Error::Invariant(format!(
                        "triple endpoint {end} has no declared entity type"
                    )));
                }
            }
            if seen.insert(t) {
                kept.push(t);
            } else {
                duplicates_dropped += 1;
            }
        }

        let mut out_edges: Vec<Vec<(RelationId, EntityId)>> = vec![Vec::new(); span];
        let mut in_edges: Vec<Vec<(RelationId, EntityId)>> = vec![Vec::new(); span];
        let mut degree = vec![0u32; span];
        let mut relation_ids = Vec::new();
        for t in &kept {
            out_edges[t.head.index()].push((t.relation, t.tail));
            in_edges[t.tail.index()].push((t.relation, t.head));
            degree[t.head.index()] += 1;
            degree[t.tail.index()] += 1;
            relation_ids.push(t.relation);
        }
        for adj in out_edges.iter_mut().chain(in_edges.iter_mut()) {
            adj.sort_unstable();
        }
        relation_ids.sort_unstable();
        relation_ids.dedup();

        Ok(Self {
            triples: kept,
            entity_type,
            out_edges,
            in_edges,
            degree,
            members,
            relation_ids,
            duplicates_dropped,
        })
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }

    /// Declared entities in ascending id order.
    pub fn entities(&self) -> &[EntityId] {
        &self.members
    }

    pub fn entity_count(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, e: EntityId) -> bool {
        self.entity_type(e).is_some()
    }

    pub fn entity_type(&self, e: EntityId) -> Option<TypeId> {
        self.entity_type.get(e.index()).copied().flatten()
    }

    /// Distinct relation ids appearing in triples, ascending.
    pub fn relation_ids(&self) -> &[RelationId] {
        &self.relation_ids
    }

    /// Distinct entity-type ids among declared entities, ascending.
    pub fn type_ids(&self) -> Vec<TypeId> {
        let mut ids: Vec<TypeId> = self.entity_type.iter().copied().flatten().collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Number of triples incident to `e` in either direction.
    ///
    /// Isolated declared entities have degree 0; undeclared ids are an error.
    pub fn degree(&self, e: EntityId) -> Result<u32> {
        if self.contains(e) {
            Ok(self.degree[e.index()])
        } else {
            Err(Error::UnknownId {
                kind: "entity",
                id: e.0,
            })
        }
    }

    /// Outgoing `(relation, tail)` pairs of `e`, sorted.
    pub fn out_edges(&self, e: EntityId) -> &[(RelationId, EntityId)] {
        self.out_edges.get(e.index()).map_or(&[], Vec::as_slice)
    }

    /// Incoming `(relation, head)` pairs of `e`, sorted.
    pub fn in_edges(&self, e: EntityId) -> &[(RelationId, EntityId)] {
        self.in_edges.get(e.index()).map_or(&[], Vec::as_slice)
    }

    /// Whether a step `from --relation--> to` (or its inverse) is backed by a
    /// stored triple.
    pub fn has_step(
        &self,
        from: EntityId,
        relation: RelationId,
        dir: Direction,
        to: EntityId,
    ) -> bool {
        let adj = match dir {
            Direction::Forward => self.out_edges(from),
            Direction::Inverse => self.in_edges(from),
        };
        adj.binary_search(&(relation, to)).is_ok()
    }

    /// Entities reachable from `e` over `relation` in `dir`.
    pub fn neighbors(
        &self,
        e: EntityId,
        relation: RelationId,
        dir: Direction,
    ) -> impl Iterator<Item = EntityId> + '_ {
        let adj = match dir {
            Direction::Forward => self.out_edges(e),
            Direction::Inverse => self.in_edges(e),
        };
        let lo = adj.partition_point(|&(r, _)| r < relation);
        let hi = adj.partition_point(|&(r, _)| r <= relation);
        adj[lo..hi].iter().map(|&(_, n)| n)
    }

    /// Largest degree among declared entities of type `t`; 0 if none exist.
    pub fn max_degree_of_type(&self, t: TypeId) -> u32 {
        self.members
            .iter()
            .filter(|e| self.entity_type[e.index()] == Some(t))
            .map(|e| self.degree[e.index()])
            .max()
            .unwrap_or(0)
    }

    /// Exact duplicate triples dropped at construction.
    pub fn duplicates_dropped(&self) -> u64 {
        self.duplicates_dropped
    }
}
