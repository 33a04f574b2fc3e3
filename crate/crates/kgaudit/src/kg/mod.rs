//! Shared domain model: identifiers, the knowledge graph, interactions, and
//! reasoning paths.

mod graph;
mod ids;
mod interaction;
mod path;

pub use graph::{Direction, KnowledgeGraph, Triple};
pub use ids::{EntityId, Interner, ProductId, ProviderId, RelationId, TypeId, UserId};
pub use interaction::{sort_chronologically, Interaction, TrainIndex};
pub use path::{
    linking_interaction_of, path_pattern_of, path_type_of, PathPattern, PathStep, PathType,
    PathValidator, ReasoningPath,
};
