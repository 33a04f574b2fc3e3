//! Seeded generation of synthetic raw datasets for tests and benchmarks.
//!
//! The generated files exercise every input the pipeline accepts: timed
//! interactions, a typed knowledge graph linking products to categories,
//! tags, and providers, and demographic attribute tables with deliberate
//! gaps. Output is a pure function of the configuration, so fixtures are
//! reproducible anywhere.

use crate::error::Result;
use crate::ingest::{
    assemble_graph, parse_entity_types, parse_interactions, parse_product_providers,
    parse_provider_attributes, parse_triples, parse_user_attributes, IdMaps, InputPaths,
    PreprocessConfig, RawDataset, ShareBase,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::path::Path;

/// The relation label synthetic interactions are declared under.
pub const INTERACTION_RELATION: &str = "watched";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynthConfig {
    pub users: usize,
    pub products: usize,
    pub providers: usize,
    pub categories: usize,
    pub tags: usize,
    pub min_interactions: usize,
    pub max_interactions: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            users: 120,
            products: 80,
            providers: 10,
            categories: 8,
            tags: 16,
            min_interactions: 10,
            max_interactions: 25,
            seed: 0xC0FFEE,
        }
    }
}

impl SynthConfig {
    /// A small dataset that keeps integration tests fast.
    pub fn small() -> Self {
        SynthConfig {
            users: 30,
            products: 24,
            providers: 5,
            categories: 6,
            tags: 8,
            min_interactions: 6,
            max_interactions: 12,
            seed: 11,
        }
    }

    /// Pipeline settings sized for the generated data: thresholds the
    /// synthetic interaction counts can meet, no relation pruning, and no
    /// attribute requirement (every tenth user is generated without one).
    pub fn preprocess(&self) -> PreprocessConfig {
        PreprocessConfig {
            min_user_interactions: 3,
            min_product_interactions: 2,
            min_relation_share: 0.0,
            share_base: ShareBase::AfterHeadRule,
            category_relation: Some("belongs_to".into()),
            provider_relation: Some("produced_by".into()),
            interaction_relation: INTERACTION_RELATION.into(),
            require_attributes: false,
            sample_users: None,
            seed: self.seed,
        }
    }
}

/// The six raw input files of one synthetic dataset, as tab-delimited text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawFiles {
    pub interactions: String,
    pub kg_triples: String,
    pub entity_types: String,
    pub user_attributes: String,
    pub product_providers: String,
    pub provider_attributes: String,
}

impl RawFiles {
    /// Parses the in-memory files exactly as `load_raw` would from disk.
    pub fn parse(&self) -> Result<RawDataset> {
        let mut ids = IdMaps::default();
        let interactions =
            parse_interactions(&self.interactions, '\t', "interactions.tsv", &mut ids)?;
        let triples = parse_triples(&self.kg_triples, '\t', "kg.tsv", &mut ids)?;
        let declared = parse_entity_types(&self.entity_types, '\t', "types.tsv", &mut ids)?;
        let user_attributes =
            parse_user_attributes(&self.user_attributes, '\t', "users.tsv", &mut ids)?;
        let product_providers =
            parse_product_providers(&self.product_providers, '\t', "providers.tsv", &mut ids)?;
        let provider_attributes = parse_provider_attributes(
            &self.provider_attributes,
            '\t',
            "provider_attrs.tsv",
            &mut ids,
        )?;
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

    /// Writes the files under `dir` and returns their locations.
    pub fn write(&self, dir: &Path) -> Result<InputPaths> {
        std::fs::create_dir_all(dir)?;
        let files = [
            ("interactions.tsv", &self.interactions),
            ("kg.tsv", &self.kg_triples),
            ("types.tsv", &self.entity_types),
            ("users.tsv", &self.user_attributes),
            ("providers.tsv", &self.product_providers),
            ("provider_attrs.tsv", &self.provider_attributes),
        ];
        for (name, content) in files {
            std::fs::write(dir.join(name), content)?;
        }
        Ok(InputPaths {
            interactions: dir.join("interactions.tsv"),
            kg_triples: dir.join("kg.tsv"),
            entity_types: dir.join("types.tsv"),
            user_attributes: Some(dir.join("users.tsv")),
            product_providers: Some(dir.join("providers.tsv")),
            provider_attributes: Some(dir.join("provider_attrs.tsv")),
        })
    }
}

fn pick_gender(rng: &mut ChaCha8Rng) -> &'static str {
    match rng.gen_range(0..10) {
        0 => "NA",
        n if n % 2 == 0 => "F",
        _ => "M",
    }
}

fn pick_age(rng: &mut ChaCha8Rng) -> &'static str {
    const CODES: [&str; 8] = ["1", "18", "25", "35", "45", "50", "56", "NA"];
    CODES[rng.gen_range(0..CODES.len())]
}

/// Generates one synthetic dataset; identical configurations produce
/// byte-identical files.
pub fn generate(cfg: &SynthConfig) -> RawFiles {
    assert!(cfg.users > 0 && cfg.products > 0, "need users and products");
    assert!(
        cfg.providers > 0 && cfg.categories > 0 && cfg.tags > 0,
        "need providers, categories, and tags"
    );
    assert!(
        cfg.min_interactions >= 1 && cfg.min_interactions <= cfg.max_interactions,
        "interaction range is empty"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut kg_triples = String::new();
    let mut entity_types = String::new();
    let mut product_providers = String::new();
    for p in 0..cfg.products {
        let _ = writeln!(entity_types, "p{p}\tmovie");
        let n_cats = rng.gen_range(1..=2.min(cfg.categories));
        let mut cats: Vec<usize> = (0..cfg.categories).collect();
        cats.shuffle(&mut rng);
        for c in &cats[..n_cats] {
            let _ = writeln!(kg_triples, "p{p}\tbelongs_to\tc{c}");
        }
        let n_tags = rng.gen_range(1..=3.min(cfg.tags));
        let mut tags: Vec<usize> = (0..cfg.tags).collect();
        tags.shuffle(&mut rng);
        for t in &tags[..n_tags] {
            let _ = writeln!(kg_triples, "p{p}\tabout\tg{t}");
        }
        let v = rng.gen_range(0..cfg.providers);
        let _ = writeln!(kg_triples, "p{p}\tproduced_by\tv{v}");
        let _ = writeln!(product_providers, "p{p}\tv{v}");
    }
    for c in 0..cfg.categories {
        let _ = writeln!(entity_types, "c{c}\tcategory");
    }
    for t in 0..cfg.tags {
        let _ = writeln!(entity_types, "g{t}\ttag");
    }
    for v in 0..cfg.providers {
        let _ = writeln!(entity_types, "v{v}\tprovider");
    }

    let mut interactions = String::new();
    let mut user_attributes = String::new();
    for u in 0..cfg.users {
        let n = rng
            .gen_range(cfg.min_interactions..=cfg.max_interactions)
            .min(cfg.products);
        let mut picks: Vec<usize> = (0..cfg.products).collect();
        picks.shuffle(&mut rng);
        picks.truncate(n);
        let mut ts: u64 = rng.gen_range(10_000..20_000);
        for p in picks {
            let rating = rng.gen_range(1..=5);
            let _ = writeln!(interactions, "u{u}\tp{p}\t{rating}\t{ts}");
            ts += rng.gen_range(60..10_000);
        }
        if u % 10 != 9 {
            let _ = writeln!(
                user_attributes,
                "u{u}\t{}\t{}",
                pick_gender(&mut rng),
                pick_age(&mut rng)
            );
        }
    }

    let mut provider_attributes = String::new();
    for v in 0..cfg.providers {
        let _ = writeln!(
            provider_attributes,
            "v{v}\t{}\t{}",
            pick_gender(&mut rng),
            pick_age(&mut rng)
        );
    }

    RawFiles {
        interactions,
        kg_triples,
        entity_types,
        user_attributes,
        product_providers,
        provider_attributes,
    }
}
