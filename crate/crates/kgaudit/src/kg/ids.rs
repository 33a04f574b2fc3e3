//! Identifier newtypes and label interning.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;

macro_rules! id_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(
            Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl $name {
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(
    /// Dense user identifier.
    UserId
);
id_type!(
    /// Dense entity identifier. Products live in this id space.
    EntityId
);
id_type!(
    /// Dense product identifier, sharing the entity id space: the product
    /// with id `n` is the entity with id `n`.
    ProductId
);
id_type!(
    /// Dense relation identifier.
    RelationId
);
id_type!(
    /// Dense provider identifier.
    ProviderId
);
id_type!(
    /// Dense entity-type identifier.
    TypeId
);

impl ProductId {
    /// The entity this product is.
    pub fn entity(self) -> EntityId {
        EntityId(self.0)
    }
}

impl EntityId {
    /// Reinterprets this entity as a product. Only meaningful for catalog
    /// members; callers check membership first.
    pub fn as_product(self) -> ProductId {
        ProductId(self.0)
    }
}

/// Bidirectional map between string labels and dense `u32` ids.
///
/// Ids are assigned in first-seen order, so ingesting the same input twice
/// yields the same mapping.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Interner {
    by_label: HashMap<String, u32>,
    labels: Vec<String>,
}

impl Interner {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the id for `label`, assigning the next free id if unseen.
    pub fn intern(&mut self, label: &str) -> u32 {
        if let Some(&id) = self.by_label.get(label) {
            return id;
        }
        let id = self.labels.len() as u32;
        self.labels.push(label.to_string());
        self.by_label.insert(label.to_string(), id);
        id
    }

    pub fn get(&self, label: &str) -> Option<u32> {
        self.by_label.get(label).copied()
    }

    pub fn label(&self, id: u32) -> Option<&str> {
        self.labels.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// All `(id, label)` pairs in id order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, &str)> {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, l)| (i as u32, l.as_str()))
    }
}
