//! Reading and writing method output files: ranked lists and reasoning paths.
//!
//! A recommendation file holds `user, rank, product, score` rows; a path
//! file holds `user, product, path` rows where the path field is a
//! space-separated token walk `U<user> <relation>[~inv] E<entity> ...
//! <relation>[~inv] P<product>`. Tokens carry the raw dataset labels, so
//! files produced by external tools resolve against the same interners the
//! dataset was ingested with. Labels inside a path must be whitespace-free.

use super::list::{RecEntry, RecommendedList};
use crate::error::{Error, Result};
use crate::explanation::ExplanationWeights;
use crate::ingest::{rows, IdMaps};
use crate::kg::{
    Direction, EntityId, PathStep, PathValidator, ProductId, ReasoningPath, RelationId, UserId,
};
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

/// Which path to keep when a file supplies several for one recommendation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PathPolicy {
    /// The first valid path in file order.
    #[default]
    First,
    /// The valid path with the heaviest linking-interaction recency weight.
    MaxLir,
    /// The valid path whose shared entity is most popular within its type.
    MaxSep,
}

impl std::str::FromStr for PathPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first" => Ok(PathPolicy::First),
            "max-lir" => Ok(PathPolicy::MaxLir),
            "max-sep" => Ok(PathPolicy::MaxSep),
            other => Err(Error::Config(format!(
                "unknown path policy {other:?}, expected first, max-lir, or max-sep"
            ))),
        }
    }
}

fn user_label(ids: &IdMaps, u: UserId) -> Result<&str> {
    ids.users
        .label(u.0)
        .ok_or_else(|| Error::Invariant(format!("user {u} has no label")))
}

fn entity_label(ids: &IdMaps, e: EntityId) -> Result<&str> {
    ids.entities
        .label(e.0)
        .ok_or_else(|| Error::Invariant(format!("entity {e} has no label")))
}

fn relation_label(ids: &IdMaps, r: RelationId) -> Result<&str> {
    ids.relations
        .label(r.0)
        .ok_or_else(|| Error::Invariant(format!("relation {r} has no label")))
}

fn token_label(label: &str) -> Result<&str> {
    if label.chars().any(char::is_whitespace) {
        return Err(Error::Validation(format!(
            "label {label:?} contains whitespace and cannot appear in a path string"
        )));
    }
    Ok(label)
}

/// Renders `user, rank, product, score` rows for every entry of `lists`.
pub fn render_rec_file(lists: &[RecommendedList], ids: &IdMaps, delim: char) -> Result<String> {
    let mut out = String::new();
    for list in lists {
        let user = user_label(ids, list.user)?;
        for e in &list.entries {
            let product = entity_label(ids, e.product.entity())?;
            let _ = writeln!(
                out,
                "{user}{delim}{}{delim}{product}{delim}{}",
                e.rank, e.score
            );
        }
    }
    Ok(out)
}

/// Renders `user, product, path` rows for every explained entry of `lists`.
pub fn render_path_file(lists: &[RecommendedList], ids: &IdMaps, delim: char) -> Result<String> {
    let mut out = String::new();
    for list in lists {
        let user = token_label(user_label(ids, list.user)?)?;
        for e in &list.entries {
            let Some(path) = &e.path else { continue };
            let product = token_label(entity_label(ids, e.product.entity())?)?;
            let mut walk = format!("U{user}");
            for (i, step) in path.steps.iter().enumerate() {
                let rel = token_label(relation_label(ids, step.relation)?)?;
                if rel.contains('~') {
                    return Err(Error::Validation(format!(
                        "relation label {rel:?} contains '~', which marks inverse traversal"
                    )));
                }
                let suffix = match step.direction {
                    Direction::Forward => "",
                    Direction::Inverse => "~inv",
                };
                let marker = if i + 1 == path.steps.len() { 'P' } else { 'E' };
                let entity = token_label(entity_label(ids, step.entity)?)?;
                let _ = write!(walk, " {rel}{suffix} {marker}{entity}");
            }
            let _ = writeln!(out, "{user}{delim}{product}{delim}{walk}");
        }
    }
    Ok(out)
}

fn resolve(
    interner: &crate::kg::Interner,
    label: &str,
    what: &str,
    file: &str,
    lineno: usize,
) -> Result<u32> {
    interner
        .get(label)
        .ok_or_else(|| Error::parse(file, lineno, format!("unknown {what} {label:?}")))
}

/// Parses a recommendation file against the dataset's interners. Rows may
/// interleave users; each user's entries are ordered by rank and the
/// assembled lists are invariant-checked.
pub fn parse_rec_file(
    text: &str,
    delim: char,
    file: &str,
    ids: &IdMaps,
) -> Result<Vec<RecommendedList>> {
    let mut by_user: BTreeMap<UserId, Vec<RecEntry>> = BTreeMap::new();
    for row in rows(text, delim, file, 4) {
        let (lineno, f) = row?;
        let user = UserId(resolve(&ids.users, f[0], "user", file, lineno)?);
        let rank: u32 = f[1]
            .trim()
            .parse()
            .map_err(|_| Error::parse(file, lineno, format!("bad rank {:?}", f[1])))?;
        if rank == 0 {
            return Err(Error::parse(file, lineno, "ranks start at 1"));
        }
        let product = ProductId(resolve(&ids.entities, f[2], "product", file, lineno)?);
        let score: f64 = f[3]
            .trim()
            .parse()
            .map_err(|_| Error::parse(file, lineno, format!("bad score {:?}", f[3])))?;
        if !score.is_finite() {
            return Err(Error::parse(file, lineno, "score must be finite"));
        }
        by_user.entry(user).or_default().push(RecEntry {
            rank,
            product,
            score,
            path: None,
        });
    }
    let mut lists = Vec::with_capacity(by_user.len());
    for (user, mut entries) in by_user {
        entries.sort_by_key(|e| e.rank);
        let list = RecommendedList { user, entries };
        list.check().map_err(|e| match e {
            Error::Validation(m) => Error::Validation(format!("{file}: {m}")),
            e => e,
        })?;
        lists.push(list);
    }
    Ok(lists)
}

/// Parses a path file into `(user, product, path)` rows. Resolution is
/// purely syntactic; semantic checks happen when paths are attached.
pub fn parse_path_file(
    text: &str,
    delim: char,
    file: &str,
    ids: &IdMaps,
) -> Result<Vec<(UserId, ProductId, ReasoningPath)>> {
    let mut out = Vec::new();
    for row in rows(text, delim, file, 3) {
        let (lineno, f) = row?;
        let user = UserId(resolve(&ids.users, f[0], "user", file, lineno)?);
        let product = ProductId(resolve(&ids.entities, f[1], "product", file, lineno)?);
        let tokens: Vec<&str> = f[2].split_whitespace().collect();
        if tokens.len() < 3 || tokens.len().is_multiple_of(2) {
            return Err(Error::parse(
                file,
                lineno,
                "path must alternate relation and entity tokens after the U token",
            ));
        }
        let u_tok = tokens[0]
            .strip_prefix('U')
            .ok_or_else(|| Error::parse(file, lineno, "path must start with a U token"))?;
        if ids.users.get(u_tok) != Some(user.0) {
            return Err(Error::parse(
                file,
                lineno,
                "path user token does not match the user field",
            ));
        }
        let pairs = tokens[1..].chunks_exact(2);
        let n_pairs = tokens.len() / 2;
        let mut steps = Vec::with_capacity(n_pairs);
        for (i, pair) in pairs.enumerate() {
            let (rel_label, direction) = match pair[0].strip_suffix("~inv") {
                Some(r) => (r, Direction::Inverse),
                None => (pair[0], Direction::Forward),
            };
            let relation = RelationId(resolve(
                &ids.relations,
                rel_label,
                "relation",
                file,
                lineno,
            )?);
            let marker = if i + 1 == n_pairs { 'P' } else { 'E' };
            let ent_label = pair[1].strip_prefix(marker).ok_or_else(|| {
                Error::parse(
                    file,
                    lineno,
                    format!("expected a {marker}-prefixed token, got {:?}", pair[1]),
                )
            })?;
            let entity = EntityId(resolve(&ids.entities, ent_label, "entity", file, lineno)?);
            steps.push(PathStep {
                relation,
                direction,
                entity,
            });
        }
        if steps.last().map(|s| s.entity.as_product()) != Some(product) {
            return Err(Error::parse(
                file,
                lineno,
                "path does not end at the product field",
            ));
        }
        out.push((user, product, ReasoningPath { user, steps }));
    }
    Ok(out)
}

/// What attaching a batch of paths did.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AttachOutcome {
    /// Entries that received a path.
    pub attached: usize,
    /// Paths rejected by semantic validation.
    pub invalid: u64,
    /// Paths whose `(user, product)` pair is not in any list.
    pub unmatched: u64,
}

/// Attaches parsed paths to their list entries, validating each against the
/// dataset and resolving duplicates per `policy`. Rejected paths are counted,
/// never fatal.
pub fn attach_paths(
    lists: &mut [RecommendedList],
    paths: &[(UserId, ProductId, ReasoningPath)],
    validator: &PathValidator,
    weights: &ExplanationWeights,
    policy: PathPolicy,
) -> AttachOutcome {
    let mut slot: HashMap<(UserId, ProductId), (usize, usize)> = HashMap::new();
    for (li, list) in lists.iter().enumerate() {
        for (ei, e) in list.entries.iter().enumerate() {
            slot.insert((list.user, e.product), (li, ei));
        }
    }
    let mut best: HashMap<(usize, usize), f64> = HashMap::new();
    let mut out = AttachOutcome::default();
    for (user, product, path) in paths {
        let Some(&(li, ei)) = slot.get(&(*user, *product)) else {
            out.unmatched += 1;
            continue;
        };
        if validator.validate(path, *user, *product).is_err() {
            out.invalid += 1;
            continue;
        }
        let score = match policy {
            PathPolicy::First => 0.0,
            PathPolicy::MaxLir => path
                .linking_product()
                .ok()
                .and_then(|p| weights.lir_weight(*user, p))
                .unwrap_or(0.0),
            PathPolicy::MaxSep => path
                .shared_entity()
                .ok()
                .and_then(|e| weights.sep_weight(e))
                .unwrap_or(0.0),
        };
        let entry = &mut lists[li].entries[ei];
        if entry.path.is_none() {
            entry.path = Some(path.clone());
            best.insert((li, ei), score);
            out.attached += 1;
        } else if policy != PathPolicy::First
            && score > best.get(&(li, ei)).copied().unwrap_or(f64::NEG_INFINITY)
        {
            entry.path = Some(path.clone());
            best.insert((li, ei), score);
        }
    }
    out
}
