//! On-disk persistence of a preprocessed dataset.
//!
//! A bundle is a directory of tab-separated member files plus a
//! `manifest.json`. Member files are written in a deterministic order and
//! hashed into a dataset id, so two runs over the same inputs produce
//! byte-identical bundles with equal ids.

use super::attributes::{parse_age, parse_gender, Demographics};
use super::parse::IdMaps;
use crate::error::{Error, Result};
use crate::kg::{
    EntityId, Interaction, Interner, KnowledgeGraph, ProductId, ProviderId, RelationId, Triple,
    TypeId, UserId,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

/// A preprocessed dataset ready for splitting and evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetBundle {
    pub kg: KnowledgeGraph,
    /// Filtered interactions in pipeline order.
    pub interactions: Vec<Interaction>,
    /// Distinct products appearing in `interactions`.
    pub catalog: BTreeSet<ProductId>,
    pub user_attributes: BTreeMap<UserId, Demographics>,
    pub provider_of: BTreeMap<ProductId, ProviderId>,
    pub provider_attributes: BTreeMap<ProviderId, Demographics>,
    pub category_of: BTreeMap<ProductId, BTreeSet<EntityId>>,
    /// Relation id of the user-to-product hop in reasoning paths.
    pub interaction_relation: RelationId,
    pub ids: IdMaps,
}

#[derive(Serialize, Deserialize)]
struct BundleManifest {
    format_version: u32,
    dataset_id: String,
    interaction_relation: u32,
    users: u64,
    products: u64,
    interactions: u64,
    triples: u64,
}

const DATA_FILES: [&str; 9] = [
    "interactions.tsv",
    "triples.tsv",
    "entity_types.tsv",
    "user_attributes.tsv",
    "provider_of.tsv",
    "provider_attributes.tsv",
    "category_of.tsv",
    "labels.tsv",
    "relation_labels.tsv",
];

fn render_demographics(d: &Demographics) -> String {
    let g = d.gender.map_or("NA", |g| g.label());
    let a = d.age.map_or("NA", |a| a.label());
    format!("{g}\t{a}")
}

fn render_interner(out: &mut String, it: &Interner) {
    for (id, label) in it.iter() {
        writeln!(out, "{id}\t{label}").unwrap();
    }
}

fn parse_interner(text: &str, file: &str) -> Result<Interner> {
    let mut it = Interner::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (id, label) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(file, i + 1, "expected 2 fields"))?;
        let id: u32 = id
            .parse()
            .map_err(|_| Error::parse(file, i + 1, format!("bad id {id:?}")))?;
        if it.intern(label) != id {
            return Err(Error::parse(
                file,
                i + 1,
                "label ids must be dense and ascending",
            ));
        }
    }
    Ok(it)
}

impl DatasetBundle {
    /// Writes the bundle under `dir` and returns its dataset id.
    pub fn save(&self, dir: &Path) -> Result<String> {
        std::fs::create_dir_all(dir)?;
        let mut files: BTreeMap<&str, String> = BTreeMap::new();

        let mut s = String::new();
        for i in &self.interactions {
            writeln!(
                s,
                "{}\t{}\t{}\t{}",
                i.user, i.product, i.rating, i.timestamp
            )
            .unwrap();
        }
        files.insert("interactions.tsv", s);

        let mut s = String::new();
        for t in self.kg.triples() {
            writeln!(s, "{}\t{}\t{}", t.head, t.relation, t.tail).unwrap();
        }
        files.insert("triples.tsv", s);

        let mut s = String::new();
        for &e in self.kg.entities() {
            let t = self
                .kg
                .entity_type(e)
                .ok_or(Error::Invariant("graph member without a type".into()))?;
            writeln!(s, "{e}\t{t}").unwrap();
        }
        files.insert("entity_types.tsv", s);

        let mut s = String::new();
        for (u, d) in &self.user_attributes {
            writeln!(s, "{u}\t{}", render_demographics(d)).unwrap();
        }
        files.insert("user_attributes.tsv", s);

        let mut s = String::new();
        for (p, prov) in &self.provider_of {
            writeln!(s, "{p}\t{prov}").unwrap();
        }
        files.insert("provider_of.tsv", s);

        let mut s = String::new();
        for (prov, d) in &self.provider_attributes {
            writeln!(s, "{prov}\t{}", render_demographics(d)).unwrap();
        }
        files.insert("provider_attributes.tsv", s);

        let mut s = String::new();
        for (p, cats) in &self.category_of {
            for c in cats {
                writeln!(s, "{p}\t{c}").unwrap();
            }
        }
        files.insert("category_of.tsv", s);

        // Interner label maps. The four id spaces go into one file with a
        // space tag; relations get their own file so relation labels stay
        // easy to inspect.
        let mut s = String::new();
        for (tag, it) in [
            ("user", &self.ids.users),
            ("entity", &self.ids.entities),
            ("provider", &self.ids.providers),
            ("entity_type", &self.ids.entity_types),
        ] {
            let mut block = String::new();
            render_interner(&mut block, it);
            for line in block.lines() {
                writeln!(s, "{tag}\t{line}").unwrap();
            }
        }
        files.insert("labels.tsv", s);

        let mut s = String::new();
        render_interner(&mut s, &self.ids.relations);
        files.insert("relation_labels.tsv", s);

        let mut hasher = Sha256::new();
        for name in DATA_FILES {
            hasher.update(name.as_bytes());
            hasher.update([0]);
            hasher.update(files[name].as_bytes());
        }
        let dataset_id = format!("{:x}", hasher.finalize());

        for (name, content) in &files {
            std::fs::write(dir.join(name), content)?;
        }
        let manifest = BundleManifest {
            format_version: 1,
            dataset_id: dataset_id.clone(),
            interaction_relation: self.interaction_relation.0,
            users: self
                .interactions
                .iter()
                .map(|i| i.user)
                .collect::<BTreeSet<_>>()
                .len() as u64,
            products: self.catalog.len() as u64,
            interactions: self.interactions.len() as u64,
            triples: self.kg.triple_count() as u64,
        };
        std::fs::write(
            dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)? + "\n",
        )?;
        Ok(dataset_id)
    }

    /// Reads a bundle from `dir`, verifying its dataset id.
    pub fn load(dir: &Path) -> Result<(DatasetBundle, String)> {
        let read = |name: &str| -> Result<String> {
            let path = dir.join(name);
            if !path.is_file() {
                return Err(Error::MissingInput(path));
            }
            Ok(std::fs::read_to_string(path)?)
        };
        let manifest: BundleManifest = serde_json::from_str(&read("manifest.json")?)?;
        if manifest.format_version != 1 {
            return Err(Error::Validation(format!(
                "unsupported bundle format version {}",
                manifest.format_version
            )));
        }

        let mut files: BTreeMap<&str, String> = BTreeMap::new();
        for name in DATA_FILES {
            files.insert(name, read(name)?);
        }
        let mut hasher = Sha256::new();
        for name in DATA_FILES {
            hasher.update(name.as_bytes());
            hasher.update([0]);
            hasher.update(files[name].as_bytes());
        }
        let dataset_id = format!("{:x}", hasher.finalize());
        if dataset_id != manifest.dataset_id {
            return Err(Error::Validation(format!(
                "bundle content hash {dataset_id} does not match manifest id {}",
                manifest.dataset_id
            )));
        }

        let mut ids = IdMaps::default();
        let mut user_block = String::new();
        let mut entity_block = String::new();
        let mut provider_block = String::new();
        let mut type_block = String::new();
        for (i, line) in files["labels.tsv"].lines().enumerate() {
            let (tag, rest) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse("labels.tsv", i + 1, "expected a space tag"))?;
            let block = match tag {
                "user" => &mut user_block,
                "entity" => &mut entity_block,
                "provider" => &mut provider_block,
                "entity_type" => &mut type_block,
                other => {
                    return Err(Error::parse(
                        "labels.tsv",
                        i + 1,
                        format!("unknown id space {other:?}"),
                    ))
                }
            };
            block.push_str(rest);
            block.push('\n');
        }
        ids.users = parse_interner(&user_block, "labels.tsv")?;
        ids.entities = parse_interner(&entity_block, "labels.tsv")?;
        ids.providers = parse_interner(&provider_block, "labels.tsv")?;
        ids.entity_types = parse_interner(&type_block, "labels.tsv")?;
        ids.relations = parse_interner(&files["relation_labels.tsv"], "relation_labels.tsv")?;

        let parse_u32 = |file: &str, line: usize, s: &str| -> Result<u32> {
            s.parse()
                .map_err(|_| Error::parse(file, line, format!("bad id {s:?}")))
        };

        let mut interactions = Vec::new();
        for (i, line) in files["interactions.tsv"].lines().enumerate() {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(Error::parse("interactions.tsv", i + 1, "expected 4 fields"));
            }
            interactions.push(Interaction {
                user: UserId(parse_u32("interactions.tsv", i + 1, f[0])?),
                product: ProductId(parse_u32("interactions.tsv", i + 1, f[1])?),
                rating: f[2].parse().map_err(|_| {
                    Error::parse("interactions.tsv", i + 1, format!("bad rating {:?}", f[2]))
                })?,
                timestamp: f[3].parse().map_err(|_| {
                    Error::parse(
                        "interactions.tsv",
                        i + 1,
                        format!("bad timestamp {:?}", f[3]),
                    )
                })?,
            });
        }

        let mut triples = Vec::new();
        for (i, line) in files["triples.tsv"].lines().enumerate() {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 {
                return Err(Error::parse("triples.tsv", i + 1, "expected 3 fields"));
            }
            triples.push(Triple {
                head: EntityId(parse_u32("triples.tsv", i + 1, f[0])?),
                relation: RelationId(parse_u32("triples.tsv", i + 1, f[1])?),
                tail: EntityId(parse_u32("triples.tsv", i + 1, f[2])?),
            });
        }

        let mut declared = Vec::new();
        for (i, line) in files["entity_types.tsv"].lines().enumerate() {
            let (e, t) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse("entity_types.tsv", i + 1, "expected 2 fields"))?;
            declared.push((
                EntityId(parse_u32("entity_types.tsv", i + 1, e)?),
                TypeId(parse_u32("entity_types.tsv", i + 1, t)?),
            ));
        }
        let kg = KnowledgeGraph::new(declared, triples)?;

        let parse_demo = |file: &str, line: usize, g: &str, a: &str| -> Result<Demographics> {
            Ok(Demographics {
                gender: parse_gender(g).map_err(|m| Error::parse(file, line, m))?,
                age: parse_age(a).map_err(|m| Error::parse(file, line, m))?,
            })
        };

        let mut user_attributes = BTreeMap::new();
        for (i, line) in files["user_attributes.tsv"].lines().enumerate() {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 {
                return Err(Error::parse(
                    "user_attributes.tsv",
                    i + 1,
                    "expected 3 fields",
                ));
            }
            user_attributes.insert(
                UserId(parse_u32("user_attributes.tsv", i + 1, f[0])?),
                parse_demo("user_attributes.tsv", i + 1, f[1], f[2])?,
            );
        }

        let mut provider_of = BTreeMap::new();
        for (i, line) in files["provider_of.tsv"].lines().enumerate() {
            let (p, prov) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse("provider_of.tsv", i + 1, "expected 2 fields"))?;
            provider_of.insert(
                ProductId(parse_u32("provider_of.tsv", i + 1, p)?),
                ProviderId(parse_u32("provider_of.tsv", i + 1, prov)?),
            );
        }

        let mut provider_attributes = BTreeMap::new();
        for (i, line) in files["provider_attributes.tsv"].lines().enumerate() {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 {
                return Err(Error::parse(
                    "provider_attributes.tsv",
                    i + 1,
                    "expected 3 fields",
                ));
            }
            provider_attributes.insert(
                ProviderId(parse_u32("provider_attributes.tsv", i + 1, f[0])?),
                parse_demo("provider_attributes.tsv", i + 1, f[1], f[2])?,
            );
        }

        let mut category_of: BTreeMap<ProductId, BTreeSet<EntityId>> = BTreeMap::new();
        for (i, line) in files["category_of.tsv"].lines().enumerate() {
            let (p, c) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse("category_of.tsv", i + 1, "expected 2 fields"))?;
            category_of
                .entry(ProductId(parse_u32("category_of.tsv", i + 1, p)?))
                .or_default()
                .insert(EntityId(parse_u32("category_of.tsv", i + 1, c)?));
        }

        let catalog: BTreeSet<ProductId> = interactions.iter().map(|i| i.product).collect();
        for p in &catalog {
            if kg.degree(p.entity()).map_or(0, |d| d) == 0 {
                return Err(Error::Validation(format!(
                    "catalog product {p} has no triples in the bundled graph"
                )));
            }
        }

        Ok((
            DatasetBundle {
                kg,
                interactions,
                catalog,
                user_attributes,
                provider_of,
                provider_attributes,
                category_of,
                interaction_relation: RelationId(manifest.interaction_relation),
                ids,
            },
            dataset_id,
        ))
    }
}
