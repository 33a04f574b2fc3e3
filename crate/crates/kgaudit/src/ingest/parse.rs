//! Row-addressed parsing of the raw delimited input files.

use super::attributes::{parse_age, parse_gender, Demographics};
use crate::error::{Error, Result};
use crate::kg::{
    EntityId, Interaction, Interner, KnowledgeGraph, ProductId, ProviderId, RelationId, Triple,
    TypeId, UserId,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Entity type assigned to entities that appear in triples without a
/// declared type.
pub const UNKNOWN_TYPE: &str = "unknown";

/// Interners shared by every parsed file of one dataset.
///
/// Products are interned in the entity space, so a product label resolves to
/// the same id whether it appears in an interaction or a triple.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IdMaps {
    pub users: Interner,
    pub entities: Interner,
    pub relations: Interner,
    pub providers: Interner,
    pub entity_types: Interner,
}

fn check_label(file: &str, line: usize, label: &str) -> Result<()> {
    if label.is_empty() {
        return Err(Error::parse(file, line, "empty label"));
    }
    if label.contains('\t') || label.contains('\n') {
        return Err(Error::parse(file, line, "label contains a tab or newline"));
    }
    Ok(())
}

/// Splits non-blank lines of `text` into exactly `arity` fields, reporting
/// `(line_number, fields)` pairs. Blank lines are skipped.
pub(crate) fn rows<'a>(
    text: &'a str,
    delim: char,
    file: &'a str,
    arity: usize,
) -> impl Iterator<Item = Result<(usize, Vec<&'a str>)>> + 'a {
    text.lines().enumerate().filter_map(move |(i, line)| {
        let lineno = i + 1;
        if line.trim().is_empty() {
            return None;
        }
        let fields: Vec<&str> = line.split(delim).collect();
        if fields.len() != arity {
            return Some(Err(Error::parse(
                file,
                lineno,
                format!("expected {arity} fields, got {}", fields.len()),
            )));
        }
        Some(Ok((lineno, fields)))
    })
}

/// Parses `user, product, rating, timestamp` rows in input order.
///
/// Duplicate `(user, product, timestamp)` rows survive parsing; the
/// preprocessing pipeline deduplicates them.
pub fn parse_interactions(
    text: &str,
    delim: char,
    file: &str,
    ids: &mut IdMaps,
) -> Result<Vec<Interaction>> {
    let mut out = Vec::new();
    for row in rows(text, delim, file, 4) {
        let (lineno, f) = row?;
        check_label(file, lineno, f[0])?;
        check_label(file, lineno, f[1])?;
        let rating: f64 = f[2]
            .trim()
            .parse()
            .map_err(|_| Error::parse(file, lineno, format!("bad rating {:?}", f[2])))?;
        if !rating.is_finite() {
            return Err(Error::parse(file, lineno, "rating must be finite"));
        }
        let timestamp: u64 = f[3]
            .trim()
            .parse()
            .map_err(|_| Error::parse(file, lineno, format!("bad timestamp {:?}", f[3])))?;
        out.push(Interaction {
            user: UserId(ids.users.intern(f[0])),
            product: ProductId(ids.entities.intern(f[1])),
            rating,
            timestamp,
        });
    }
    Ok(out)
}

/// Parses `head, relation, tail` triples in input order.
pub fn parse_triples(text: &str, delim: char, file: &str, ids: &mut IdMaps) -> Result<Vec<Triple>> {
    let mut out = Vec::new();
    for row in rows(text, delim, file, 3) {
        let (lineno, f) = row?;
        for field in &f {
            check_label(file, lineno, field)?;
        }
        out.push(Triple {
            head: EntityId(ids.entities.intern(f[0])),
            relation: RelationId(ids.relations.intern(f[1])),
            tail: EntityId(ids.entities.intern(f[2])),
        });
    }
    Ok(out)
}

/// Parses `entity, type` declarations. Re-declaring an entity with a
/// different type is a row error; exact repeats are ignored.
pub fn parse_entity_types(
    text: &str,
    delim: char,
    file: &str,
    ids: &mut IdMaps,
) -> Result<Vec<(EntityId, TypeId)>> {
    let mut declared: BTreeMap<EntityId, TypeId> = BTreeMap::new();
    let mut out = Vec::new();
    for row in rows(text, delim, file, 2) {
        let (lineno, f) = row?;
        check_label(file, lineno, f[0])?;
        check_label(file, lineno, f[1])?;
        let e = EntityId(ids.entities.intern(f[0]));
        let t = TypeId(ids.entity_types.intern(f[1]));
        match declared.get(&e) {
            Some(prev) if *prev != t => {
                return Err(Error::parse(
                    file,
                    lineno,
                    format!("entity {:?} re-declared with a different type", f[0]),
                ));
            }
            Some(_) => {}
            None => {
                declared.insert(e, t);
                out.push((e, t));
            }
        }
    }
    Ok(out)
}

/// Builds the raw knowledge graph from parsed declarations and triples.
///
/// Entities referenced by a triple or an interaction without a declared type
/// are declared with the reserved type [`UNKNOWN_TYPE`], so the graph covers
/// every id the dataset can mention.
pub fn assemble_graph(
    mut declared: Vec<(EntityId, TypeId)>,
    triples: Vec<Triple>,
    ids: &mut IdMaps,
) -> Result<KnowledgeGraph> {
    let unknown = TypeId(ids.entity_types.intern(UNKNOWN_TYPE));
    let mut has_type = vec![false; ids.entities.len()];
    for (e, _) in &declared {
        has_type[e.index()] = true;
    }
    for (id, _) in ids.entities.iter() {
        if !has_type[id as usize] {
            declared.push((EntityId(id), unknown));
        }
    }
    KnowledgeGraph::new(declared, triples)
}

/// Parses `user, gender, age` rows into a per-user attribute map.
pub fn parse_user_attributes(
    text: &str,
    delim: char,
    file: &str,
    ids: &mut IdMaps,
) -> Result<BTreeMap<UserId, Demographics>> {
    let mut out = BTreeMap::new();
    for row in rows(text, delim, file, 3) {
        let (lineno, f) = row?;
        check_label(file, lineno, f[0])?;
        let user = UserId(ids.users.intern(f[0]));
        let gender = parse_gender(f[1]).map_err(|m| Error::parse(file, lineno, m))?;
        let age = parse_age(f[2]).map_err(|m| Error::parse(file, lineno, m))?;
        if out.insert(user, Demographics { gender, age }).is_some() {
            return Err(Error::parse(
                file,
                lineno,
                format!("duplicate attribute row for user {:?}", f[0]),
            ));
        }
    }
    Ok(out)
}

/// Parses `product, provider` rows.
pub fn parse_product_providers(
    text: &str,
    delim: char,
    file: &str,
    ids: &mut IdMaps,
) -> Result<BTreeMap<ProductId, ProviderId>> {
    let mut out = BTreeMap::new();
    for row in rows(text, delim, file, 2) {
        let (lineno, f) = row?;
        check_label(file, lineno, f[0])?;
        check_label(file, lineno, f[1])?;
        let product = ProductId(ids.entities.intern(f[0]));
        let provider = ProviderId(ids.providers.intern(f[1]));
        if out.insert(product, provider).is_some() {
            return Err(Error::parse(
                file,
                lineno,
                format!("duplicate provider row for product {:?}", f[0]),
            ));
        }
    }
    Ok(out)
}

/// Parses `provider, gender, age` rows.
pub fn parse_provider_attributes(
    text: &str,
    delim: char,
    file: &str,
    ids: &mut IdMaps,
) -> Result<BTreeMap<ProviderId, Demographics>> {
    let mut out = BTreeMap::new();
    for row in rows(text, delim, file, 3) {
        let (lineno, f) = row?;
        check_label(file, lineno, f[0])?;
        let provider = ProviderId(ids.providers.intern(f[0]));
        let gender = parse_gender(f[1]).map_err(|m| Error::parse(file, lineno, m))?;
        let age = parse_age(f[2]).map_err(|m| Error::parse(file, lineno, m))?;
        if out.insert(provider, Demographics { gender, age }).is_some() {
            return Err(Error::parse(
                file,
                lineno,
                format!("duplicate attribute row for provider {:?}", f[0]),
            ));
        }
    }
    Ok(out)
}

/// Locations of the raw input files of one dataset.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InputPaths {
    pub interactions: PathBuf,
    pub kg_triples: PathBuf,
    pub entity_types: PathBuf,
    pub user_attributes: Option<PathBuf>,
    pub product_providers: Option<PathBuf>,
    pub provider_attributes: Option<PathBuf>,
}

/// A fully parsed raw dataset, before any filtering.
#[derive(Clone, Debug)]
pub struct RawDataset {
    pub interactions: Vec<Interaction>,
    pub kg: KnowledgeGraph,
    pub user_attributes: BTreeMap<UserId, Demographics>,
    pub product_providers: BTreeMap<ProductId, ProviderId>,
    pub provider_attributes: BTreeMap<ProviderId, Demographics>,
    pub ids: IdMaps,
}

fn read_file(path: &Path) -> Result<String> {
    if !path.is_file() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    Ok(std::fs::read_to_string(path)?)
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Reads and parses every configured raw input file.
pub fn load_raw(paths: &InputPaths, delim: char) -> Result<RawDataset> {
    let mut ids = IdMaps::default();
    let interactions = parse_interactions(
        &read_file(&paths.interactions)?,
        delim,
        &file_name(&paths.interactions),
        &mut ids,
    )?;
    let triples = parse_triples(
        &read_file(&paths.kg_triples)?,
        delim,
        &file_name(&paths.kg_triples),
        &mut ids,
    )?;
    let declared = parse_entity_types(
        &read_file(&paths.entity_types)?,
        delim,
        &file_name(&paths.entity_types),
        &mut ids,
    )?;
    let user_attributes = match &paths.user_attributes {
        Some(p) => parse_user_attributes(&read_file(p)?, delim, &file_name(p), &mut ids)?,
        None => BTreeMap::new(),
    };
    let product_providers = match &paths.product_providers {
        Some(p) => parse_product_providers(&read_file(p)?, delim, &file_name(p), &mut ids)?,
        None => BTreeMap::new(),
    };
    let provider_attributes = match &paths.provider_attributes {
        Some(p) => parse_provider_attributes(&read_file(p)?, delim, &file_name(p), &mut ids)?,
        None => BTreeMap::new(),
    };
    let kg = assemble_graph(declared, triples, &mut ids)?;
    Ok(RawDataset {
        interactions,
        kg,
        user_attributes,
        product_providers,
        provider_attributes,
        ids,
    })
}
