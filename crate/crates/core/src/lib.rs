//! Library behind the `readlm` pipeline: corpus ingestion and word
//! frequencies, skip-gram embedding training, contextual word probability
//! and sentence perplexity scoring, perplexity-rank stimulus selection,
//! eye-movement viewing measures, correlation/regression statistics, and a
//! planted-coefficient simulator that makes the whole chain verifiable.

pub mod config;
pub mod corpus;
pub mod embedding;
mod error;
pub mod eye;
pub mod scoring;
pub mod selection;
pub mod sim;
pub mod stats;
pub mod tsv;

pub use error::{Error, Result};

/// Build identifier printed by `--version` and embedded as a comment line
/// in every output file.
pub const BUILD_ID: &str = concat!("readlm ", env!("CARGO_PKG_VERSION"));
