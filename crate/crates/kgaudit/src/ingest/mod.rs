//! Ingestion: raw file parsing, the preprocessing pipeline, dataset bundle
//! persistence, and summary statistics.

mod attributes;
mod bundle;
mod parse;
mod preprocess;
mod stats;

pub use attributes::{parse_age, parse_gender, AgeGroup, Demographics, Gender};
pub use bundle::DatasetBundle;
pub(crate) use parse::rows;
pub use parse::{
    assemble_graph, load_raw, parse_entity_types, parse_interactions, parse_product_providers,
    parse_provider_attributes, parse_triples, parse_user_attributes, IdMaps, InputPaths,
    RawDataset, UNKNOWN_TYPE,
};
pub use preprocess::{
    align_catalog, filter_kg, kcore_filter, preprocess, restrict_to_catalog, PreprocessConfig,
    PreprocessOutcome, PreprocessWarnings, PrunedRelation, ShareBase,
};
pub use stats::{compute_stats, DatasetStats, VariantStats};
