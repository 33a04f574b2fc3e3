//! Reasoning paths and their structural operations.

use super::graph::{Direction, KnowledgeGraph};
use super::ids::{EntityId, ProductId, RelationId, TypeId, UserId};
use super::interaction::{Interaction, TrainIndex};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// One traversal step: the relation walked, the direction it was walked in,
/// and the entity reached.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathStep {
    pub relation: RelationId,
    pub direction: Direction,
    pub entity: EntityId,
}

/// A reasoning path from a user to a recommended product.
///
/// The first step is the interaction hop to the linking product (always
/// forward, validated against training interactions rather than the graph);
/// every later step walks a knowledge-graph triple in either direction. The
/// entity of the last step is the recommended product. Well-formed paths have
/// at least two steps.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReasoningPath {
    pub user: UserId,
    pub steps: Vec<PathStep>,
}

impl ReasoningPath {
    /// Number of entities on the path (excluding the user).
    pub fn entity_count(&self) -> usize {
        self.steps.len()
    }

    fn check_wellformed(&self) -> Result<()> {
        if self.steps.len() < 2 {
            return Err(Error::InvalidPath(format!(
                "a reasoning path needs at least 2 entities, got {}",
                self.steps.len()
            )));
        }
        Ok(())
    }

    /// The product reached by the interaction hop.
    pub fn linking_product(&self) -> Result<ProductId> {
        self.check_wellformed()?;
        Ok(self.steps[0].entity.as_product())
    }

    /// The product the path ends at.
    pub fn recommended_product(&self) -> Result<ProductId> {
        self.check_wellformed()?;
        Ok(self.steps[self.steps.len() - 1].entity.as_product())
    }

    /// The entity one step before the recommended product.
    ///
    /// For two-entity paths this is the linking product itself.
    pub fn shared_entity(&self) -> Result<EntityId> {
        self.check_wellformed()?;
        Ok(self.steps[self.steps.len() - 2].entity)
    }
}

/// The relation/direction sequence of a path, used to group paths coarsely.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PathType(pub Vec<(RelationId, Direction)>);

/// A path type refined with the entity types visited between the user and
/// the recommended product.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PathPattern {
    pub steps: Vec<(RelationId, Direction)>,
    pub inner_types: Vec<TypeId>,
}

/// The relation/direction sequence of `path`, interaction hop included.
pub fn path_type_of(path: &ReasoningPath) -> Result<PathType> {
    path.check_wellformed()?;
    Ok(PathType(
        path.steps
            .iter()
            .map(|s| (s.relation, s.direction))
            .collect(),
    ))
}

/// The path type of `path` refined with the types of all entities before the
/// recommended product.
pub fn path_pattern_of(path: &ReasoningPath, kg: &KnowledgeGraph) -> Result<PathPattern> {
    let ty = path_type_of(path)?;
    let mut inner_types = Vec::with_capacity(path.steps.len() - 1);
    for step in &path.steps[..path.steps.len() - 1] {
        let t = kg.entity_type(step.entity).ok_or(Error::UnknownId {
            kind: "entity",
            id: step.entity.0,
        })?;
        inner_types.push(t);
    }
    Ok(PathPattern {
        steps: ty.0,
        inner_types,
    })
}

/// The training interaction a path's explanation is anchored to: the user's
/// most recent training interaction with the linking product.
pub fn linking_interaction_of(path: &ReasoningPath, train: &TrainIndex) -> Result<Interaction> {
    let product = path.linking_product()?;
    train.latest(path.user, product).copied().ok_or_else(|| {
        Error::InvalidPath(format!(
            "user {} has no training interaction with linking product {}",
            path.user, product
        ))
    })
}

/// Context needed to check reasoning paths against a dataset.
pub struct PathValidator<'a> {
    pub kg: &'a KnowledgeGraph,
    pub catalog: &'a BTreeSet<ProductId>,
    pub train: &'a TrainIndex,
}

impl PathValidator<'_> {
    /// Checks that `path` is a structurally valid explanation of
    /// recommending `product` to `user`.
    ///
    /// The first step must be a forward hop to a catalog product the user
    /// interacted with during training; every later step must be backed by a
    /// knowledge-graph triple in the stated direction; the path must end at
    /// `product`, which must be in the catalog.
    pub fn validate(&self, path: &ReasoningPath, user: UserId, product: ProductId) -> Result<()> {
        path.check_wellformed()?;
        if path.user != user {
            return Err(Error::InvalidPath(format!(
                "path user {} does not match list user {user}",
                path.user
            )));
        }
        let first = &path.steps[0];
        if first.direction != Direction::Forward {
            return Err(Error::InvalidPath(
                "interaction hop must be traversed forward".into(),
            ));
        }
        let linking = first.entity.as_product();
        if !self.catalog.contains(&linking) {
            return Err(Error::InvalidPath(format!(
                "linking entity {linking} is not a catalog product"
            )));
        }
        if !self.train.contains(user, linking) {
            return Err(Error::InvalidPath(format!(
                "user {user} never interacted with linking product {linking} in training"
            )));
        }
        let mut at = first.entity;
        for (i, step) in path.steps.iter().enumerate().skip(1) {
            if !self
                .kg
                .has_step(at, step.relation, step.direction, step.entity)
            {
                return Err(Error::InvalidPath(format!(
                    "step {i} from entity {at} to entity {} over relation {} has no backing triple",
                    step.entity, step.relation
                )));
            }
            at = step.entity;
        }
        let last = at.as_product();
        if last != product {
            return Err(Error::InvalidPath(format!(
                "path ends at product {last}, expected {product}"
            )));
        }
        if !self.catalog.contains(&product) {
            return Err(Error::InvalidPath(format!(
                "recommended product {product} is not in the catalog"
            )));
        }
        Ok(())
    }
}
