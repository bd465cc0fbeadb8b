//! Evaluation toolkit for open-ended text generation.
//!
//! The crate covers the whole quantitative loop used to compare generated
//! text (lyrics, in the original use case) against a human reference corpus:
//!
//! * [`corpus`]: ingestion, markup cleaning, tokenization and corpus statistics.
//! * [`ngram_metrics`]: rep-n, distinct-n and diversity degeneration metrics.
//! * [`featurize`]: hashed character n-gram features and external feature files.
//! * [`divergence`]: MAUVE-style divergence frontier scoring over quantized features.
//! * [`frechet`]: Fréchet distance between Gaussian fits of two feature sets.
//! * [`sampling`]: nucleus (top-p) sampling and a character n-gram language model.
//! * [`annotations`]: survey filtering, score normalization and Krippendorff's alpha.

pub mod annotations;
pub mod corpus;
pub mod divergence;
pub mod error;
pub mod featurize;
pub mod frechet;
pub mod ngram_metrics;
pub mod sampling;

pub use error::{Error, Result};
