//! Dataset summary statistics.

use super::preprocess::ShareBase;
use crate::kg::{Interaction, KnowledgeGraph, ProductId, UserId};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashSet};

/// Size and sparsity summary of a preprocessed dataset.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub users: u64,
    pub products: u64,
    pub interactions: u64,
    /// Interactions over the user-product grid.
    pub density: f64,
    pub entities: u64,
    pub entity_types: u64,
    /// Number of triples.
    pub relations: u64,
    pub relation_types: u64,
    /// Triples over the product-external grid.
    pub kg_sparsity: f64,
    pub avg_degree_overall: f64,
    pub avg_degree_products: f64,
}

/// Stats of one alternate preprocessing variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantStats {
    pub share_base: ShareBase,
    pub kcore_applied: bool,
    pub stats: DatasetStats,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Computes summary statistics for a filtered dataset.
pub fn compute_stats(
    interactions: &[Interaction],
    kg: &KnowledgeGraph,
    catalog: &BTreeSet<ProductId>,
) -> DatasetStats {
    let users: HashSet<UserId> = interactions.iter().map(|i| i.user).collect();
    let n_users = users.len() as u64;
    let n_products = catalog.len() as u64;
    let n_inter = interactions.len() as u64;
    let n_entities = kg.entity_count() as u64;
    let n_triples = kg.triple_count() as u64;
    let externals = n_entities.saturating_sub(n_products);
    let degree_products: u64 = catalog
        .iter()
        .map(|p| kg.degree(p.entity()).unwrap_or(0) as u64)
        .sum();
    DatasetStats {
        users: n_users,
        products: n_products,
        interactions: n_inter,
        density: ratio(n_inter as f64, (n_users * n_products) as f64),
        entities: n_entities,
        entity_types: kg.type_ids().len() as u64,
        relations: n_triples,
        relation_types: kg.relation_ids().len() as u64,
        kg_sparsity: ratio(n_triples as f64, (n_products * externals) as f64),
        avg_degree_overall: ratio(2.0 * n_triples as f64, n_entities as f64),
        avg_degree_products: ratio(degree_products as f64, n_products as f64),
    }
}
