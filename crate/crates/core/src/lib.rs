//! Linguistic probing and feature-augmented classification for
//! utterance-level dementia detection from picture-description transcripts.
//!
//! The crate covers the whole pipeline that runs on top of exported
//! sentence embeddings:
//!
//! - [`corpus`]: JSON Lines transcripts, tokenization, split assignment
//! - [`parsetree`]: Penn Treebank constituency trees
//! - [`features`]: the 119-dimensional syntactic and content-word feature set
//! - [`embio`]: per-layer embedding files
//! - [`mlp`]: feed-forward classifier, gradient check and grid search
//! - [`probing`]: the five probing tasks and layer-wise probes
//! - [`classify`]: features-only, embedding-only and combined classifiers
//! - [`pipeline`]: end-to-end runs used by the command-line tool
//! - [`synth`]: synthetic corpora and embedding stores

pub mod classify;
pub mod corpus;
pub mod embio;
pub mod error;
pub mod features;
pub mod mlp;
pub mod parsetree;
pub mod pipeline;
pub mod probing;
pub mod seed;
pub mod synth;
mod table;

pub use error::{Error, Result};
