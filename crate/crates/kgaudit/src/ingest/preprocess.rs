//! The preprocessing pipeline: knowledge-graph filtering, catalog alignment,
//! iterative interaction-count filtering, and bundle assembly.

use super::attributes::Demographics;
use super::bundle::DatasetBundle;
use super::parse::RawDataset;
use super::stats::{compute_stats, DatasetStats, VariantStats};
use crate::error::{Error, Result};
use crate::kg::{
    EntityId, Interaction, KnowledgeGraph, ProductId, ProviderId, RelationId, Triple, UserId,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

/// Denominator used when computing a relation type's share of the graph.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShareBase {
    /// Triples surviving the product-head/external-tail rule.
    #[default]
    AfterHeadRule,
    /// All triples of the unfiltered graph.
    RawTotal,
}

impl ShareBase {
    pub fn other(self) -> ShareBase {
        match self {
            ShareBase::AfterHeadRule => ShareBase::RawTotal,
            ShareBase::RawTotal => ShareBase::AfterHeadRule,
        }
    }
}

/// Settings of the preprocessing pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    /// Minimum interactions per kept user.
    pub min_user_interactions: u32,
    /// Minimum interactions per kept product.
    pub min_product_interactions: u32,
    /// Relation types holding strictly less than this share of triples are
    /// dropped.
    pub min_relation_share: f64,
    pub share_base: ShareBase,
    /// Relation whose tails are product categories.
    pub category_relation: Option<String>,
    /// Relation whose tails identify the product's provider, used for
    /// products absent from the provider file.
    pub provider_relation: Option<String>,
    /// Label of the user-to-product interaction hop in reasoning paths.
    pub interaction_relation: String,
    /// Drop users whose sensitive attributes are incomplete.
    pub require_attributes: bool,
    /// Keep only this many users, sampled deterministically from `seed`.
    pub sample_users: Option<u64>,
    pub seed: u64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            min_user_interactions: 20,
            min_product_interactions: 10,
            min_relation_share: 0.03,
            share_base: ShareBase::AfterHeadRule,
            category_relation: None,
            provider_relation: None,
            interaction_relation: "interacted".into(),
            require_attributes: true,
            sample_users: None,
            seed: 0,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.min_relation_share) {
            return Err(Error::Config(format!(
                "min_relation_share must be in [0, 1], got {}",
                self.min_relation_share
            )));
        }
        if self.interaction_relation.is_empty() {
            return Err(Error::Config(
                "interaction_relation must be non-empty".into(),
            ));
        }
        Ok(())
    }
}

/// One relation type removed by the share rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrunedRelation {
    pub relation: RelationId,
    /// Triples the relation had after the head rule.
    pub count: u64,
    /// Its share of the configured base.
    pub share: f64,
}

/// Keeps triples whose head is a catalog product and whose tail is not, then
/// drops relation types whose share of the result is strictly below
/// `min_share`.
///
/// Shares are computed once, after the head rule; pruning is not iterated.
/// The share comparison tolerates the representation error of
/// `min_share * total`, so a relation sitting exactly on the threshold is
/// kept.
pub fn filter_kg(
    kg: &KnowledgeGraph,
    catalog: &BTreeSet<ProductId>,
    min_share: f64,
    base: ShareBase,
) -> Result<(KnowledgeGraph, Vec<PrunedRelation>)> {
    if !(0.0..=1.0).contains(&min_share) {
        return Err(Error::Config(format!(
            "min_relation_share must be in [0, 1], got {min_share}"
        )));
    }
    let head_kept: Vec<Triple> = kg
        .triples()
        .iter()
        .filter(|t| {
            catalog.contains(&t.head.as_product()) && !catalog.contains(&t.tail.as_product())
        })
        .copied()
        .collect();

    let base_total = match base {
        ShareBase::AfterHeadRule => head_kept.len(),
        ShareBase::RawTotal => kg.triple_count(),
    };
    let mut counts: BTreeMap<RelationId, u64> = BTreeMap::new();
    for t in &head_kept {
        *counts.entry(t.relation).or_insert(0) += 1;
    }
    let threshold = min_share * base_total as f64;
    let mut pruned = Vec::new();
    let mut dropped: BTreeSet<RelationId> = BTreeSet::new();
    for (&relation, &count) in &counts {
        if (count as f64) < threshold - 1e-6 {
            dropped.insert(relation);
            pruned.push(PrunedRelation {
                relation,
                count,
                share: if base_total == 0 {
                    0.0
                } else {
                    count as f64 / base_total as f64
                },
            });
        }
    }
    let kept: Vec<Triple> = head_kept
        .into_iter()
        .filter(|t| !dropped.contains(&t.relation))
        .collect();
    Ok((rebuild_from_triples(kg, kept)?, pruned))
}

/// Builds a graph over exactly the entities incident to `triples`, copying
/// entity types from `kg`.
fn rebuild_from_triples(kg: &KnowledgeGraph, triples: Vec<Triple>) -> Result<KnowledgeGraph> {
    let mut incident: BTreeSet<EntityId> = BTreeSet::new();
    for t in &triples {
        incident.insert(t.head);
        incident.insert(t.tail);
    }
    let mut declared = Vec::with_capacity(incident.len());
    for e in incident {
        let t = kg.entity_type(e).ok_or(Error::UnknownId {
            kind: "entity",
            id: e.0,
        })?;
        declared.push((e, t));
    }
    KnowledgeGraph::new(declared, triples)
}

/// Keeps only triples whose head is in `catalog`, dropping entities that
/// become isolated. Relation shares are not recomputed.
pub fn restrict_to_catalog(
    kg: &KnowledgeGraph,
    catalog: &BTreeSet<ProductId>,
) -> Result<KnowledgeGraph> {
    let kept: Vec<Triple> = kg
        .triples()
        .iter()
        .filter(|t| catalog.contains(&t.head.as_product()))
        .copied()
        .collect();
    rebuild_from_triples(kg, kept)
}

/// Repeatedly drops users with fewer than `min_user` interactions and
/// products with fewer than `min_product` interactions until both thresholds
/// hold simultaneously. Input order is preserved.
pub fn kcore_filter(
    interactions: &[Interaction],
    min_user: u32,
    min_product: u32,
) -> Vec<Interaction> {
    let mut rows = interactions.to_vec();
    loop {
        let mut user_count: HashMap<UserId, u32> = HashMap::new();
        let mut product_count: HashMap<ProductId, u32> = HashMap::new();
        for i in &rows {
            *user_count.entry(i.user).or_insert(0) += 1;
            *product_count.entry(i.product).or_insert(0) += 1;
        }
        let before = rows.len();
        rows.retain(|i| {
            user_count[&i.user] >= min_user && product_count[&i.product] >= min_product
        });
        if rows.len() == before {
            return rows;
        }
    }
}

/// Drops interactions whose product has no surviving triple in `kg`, and
/// returns the catalog of remaining products.
pub fn align_catalog(
    interactions: &[Interaction],
    kg: &KnowledgeGraph,
) -> (Vec<Interaction>, BTreeSet<ProductId>) {
    let rows: Vec<Interaction> = interactions
        .iter()
        .filter(|i| kg.degree(i.product.entity()).is_ok_and(|d| d > 0))
        .copied()
        .collect();
    let catalog = rows.iter().map(|i| i.product).collect();
    (rows, catalog)
}

/// Tallies emitted by a preprocessing run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PreprocessWarnings {
    pub duplicate_interactions: u64,
    pub duplicate_triples: u64,
    pub users_missing_attributes: u64,
    pub users_sampled_out: u64,
    pub pruned_relations: Vec<PrunedRelation>,
}

/// Result of the full preprocessing pipeline.
#[derive(Clone, Debug)]
pub struct PreprocessOutcome {
    pub bundle: DatasetBundle,
    pub stats: DatasetStats,
    /// Stats of the three alternate pipeline variants (other share base,
    /// interaction-count filter skipped), for cross-checking against
    /// dataset statistics computed elsewhere.
    pub variants: Vec<VariantStats>,
    pub warnings: PreprocessWarnings,
}

fn distinct_products(interactions: &[Interaction]) -> BTreeSet<ProductId> {
    interactions.iter().map(|i| i.product).collect()
}

type VariantArtifacts = (
    Vec<Interaction>,
    KnowledgeGraph,
    BTreeSet<ProductId>,
    Vec<PrunedRelation>,
);

fn run_variant(
    interactions: &[Interaction],
    kg: &KnowledgeGraph,
    cfg: &PreprocessConfig,
    base: ShareBase,
    apply_kcore: bool,
) -> Result<VariantArtifacts> {
    let catalog0 = distinct_products(interactions);
    let (kg1, pruned) = filter_kg(kg, &catalog0, cfg.min_relation_share, base)?;
    let (inter1, _) = align_catalog(interactions, &kg1);
    let inter2 = if apply_kcore {
        kcore_filter(
            &inter1,
            cfg.min_user_interactions,
            cfg.min_product_interactions,
        )
    } else {
        inter1
    };
    let catalog = distinct_products(&inter2);
    let kg2 = restrict_to_catalog(&kg1, &catalog)?;
    Ok((inter2, kg2, catalog, pruned))
}

fn verify_thresholds(rows: &[Interaction], min_user: u32, min_product: u32) -> Result<()> {
    let mut user_count: HashMap<UserId, u32> = HashMap::new();
    let mut product_count: HashMap<ProductId, u32> = HashMap::new();
    for i in rows {
        *user_count.entry(i.user).or_insert(0) += 1;
        *product_count.entry(i.product).or_insert(0) += 1;
    }
    if user_count.values().any(|&c| c < min_user)
        || product_count.values().any(|&c| c < min_product)
    {
        return Err(Error::Invariant(
            "interaction-count thresholds do not hold after filtering".into(),
        ));
    }
    Ok(())
}

/// Runs the full preprocessing pipeline on a parsed raw dataset.
///
/// Stages: deduplicate interactions, drop users with incomplete sensitive
/// attributes (when required), optionally sample users deterministically,
/// filter the graph against the interacted catalog, align the catalog to the
/// filtered graph, apply the interaction-count filter, and restrict the
/// graph to the final catalog. Alternate variant stats are computed for the
/// other share base and for a run without the interaction-count filter.
pub fn preprocess(raw: RawDataset, cfg: &PreprocessConfig) -> Result<PreprocessOutcome> {
    cfg.validate()?;
    let RawDataset {
        interactions,
        kg,
        user_attributes,
        product_providers,
        provider_attributes,
        mut ids,
    } = raw;

    let mut warnings = PreprocessWarnings {
        duplicate_triples: kg.duplicates_dropped(),
        ..Default::default()
    };

    let mut seen: HashSet<(UserId, ProductId, u64)> = HashSet::new();
    let mut rows: Vec<Interaction> = Vec::with_capacity(interactions.len());
    for i in interactions {
        if seen.insert((i.user, i.product, i.timestamp)) {
            rows.push(i);
        } else {
            warnings.duplicate_interactions += 1;
        }
    }

    if cfg.require_attributes {
        let complete: HashSet<UserId> = user_attributes
            .iter()
            .filter(|(_, d)| d.is_complete())
            .map(|(u, _)| *u)
            .collect();
        let before: HashSet<UserId> = rows.iter().map(|i| i.user).collect();
        rows.retain(|i| complete.contains(&i.user));
        warnings.users_missing_attributes =
            (before.len() - rows.iter().map(|i| i.user).collect::<HashSet<_>>().len()) as u64;
    }

    if let Some(k) = cfg.sample_users {
        let mut users: Vec<UserId> = rows
            .iter()
            .map(|i| i.user)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if (k as usize) < users.len() {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            users.shuffle(&mut rng);
            let kept: HashSet<UserId> = users.iter().take(k as usize).copied().collect();
            warnings.users_sampled_out = (users.len() - kept.len()) as u64;
            rows.retain(|i| kept.contains(&i.user));
        }
    }

    let (final_rows, final_kg, catalog, pruned) =
        run_variant(&rows, &kg, cfg, cfg.share_base, true)?;
    warnings.pruned_relations = pruned;
    verify_thresholds(
        &final_rows,
        cfg.min_user_interactions,
        cfg.min_product_interactions,
    )?;
    let stats = compute_stats(&final_rows, &final_kg, &catalog);

    let mut variants = Vec::new();
    for (base, kcore_applied) in [
        (cfg.share_base.other(), true),
        (cfg.share_base, false),
        (cfg.share_base.other(), false),
    ] {
        let (v_rows, v_kg, v_catalog, _) = run_variant(&rows, &kg, cfg, base, kcore_applied)?;
        variants.push(VariantStats {
            share_base: base,
            kcore_applied,
            stats: compute_stats(&v_rows, &v_kg, &v_catalog),
        });
    }

    let category_relation = cfg
        .category_relation
        .as_deref()
        .and_then(|l| ids.relations.get(l).map(RelationId));
    let mut category_of: BTreeMap<ProductId, BTreeSet<EntityId>> = BTreeMap::new();
    if let Some(rel) = category_relation {
        for &p in &catalog {
            let cats: BTreeSet<EntityId> = final_kg
                .neighbors(p.entity(), rel, crate::kg::Direction::Forward)
                .collect();
            if !cats.is_empty() {
                category_of.insert(p, cats);
            }
        }
    }

    let provider_relation = cfg
        .provider_relation
        .as_deref()
        .and_then(|l| ids.relations.get(l).map(RelationId));
    let mut provider_of: BTreeMap<ProductId, ProviderId> = BTreeMap::new();
    for &p in &catalog {
        if let Some(&prov) = product_providers.get(&p) {
            provider_of.insert(p, prov);
            continue;
        }
        if let Some(rel) = provider_relation {
            let first = final_kg
                .neighbors(p.entity(), rel, crate::kg::Direction::Forward)
                .min();
            if let Some(e) = first {
                let label = ids.entities.label(e.0).ok_or(Error::UnknownId {
                    kind: "entity",
                    id: e.0,
                })?;
                let prov = ProviderId(ids.providers.intern(label));
                provider_of.insert(p, prov);
            }
        }
    }

    let kept_users: HashSet<UserId> = final_rows.iter().map(|i| i.user).collect();
    let user_attributes: BTreeMap<UserId, Demographics> = user_attributes
        .into_iter()
        .filter(|(u, _)| kept_users.contains(u))
        .collect();
    let used_providers: BTreeSet<ProviderId> = provider_of.values().copied().collect();
    let provider_attributes: BTreeMap<ProviderId, Demographics> = provider_attributes
        .into_iter()
        .filter(|(p, _)| used_providers.contains(p))
        .collect();

    let interaction_relation = RelationId(ids.relations.intern(&cfg.interaction_relation));

    let bundle = DatasetBundle {
        kg: final_kg,
        interactions: final_rows,
        catalog,
        user_attributes,
        provider_of,
        provider_attributes,
        category_of,
        interaction_relation,
        ids,
    };
    Ok(PreprocessOutcome {
        bundle,
        stats,
        variants,
        warnings,
    })
}
