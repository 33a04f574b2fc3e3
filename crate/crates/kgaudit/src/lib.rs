//! Batch audit toolkit for knowledge-graph recommenders.
//!
//! The pipeline runs in stages: raw delimited files are ingested and filtered
//! into a [`ingest::DatasetBundle`], interactions are split chronologically per
//! user ([`split`]), baseline recommenders produce ranked lists with reasoning
//! paths ([`rec`]), and method outputs are scored with utility, beyond-utility,
//! explanation-quality, and fairness metrics ([`metrics`], [`explanation`],
//! [`fairness`]) plus significance tests ([`stattest`]). The [`eval`] module
//! drives a full run and [`report`] renders it to JSON, CSV, and SVG.

pub mod error;
pub mod eval;
pub mod exec;
pub mod explanation;
pub mod fairness;
pub mod ingest;
pub mod kg;
pub mod metrics;
pub mod rec;
pub mod report;
pub mod split;
pub mod stattest;
pub mod synth;

pub use error::{Error, Result};
