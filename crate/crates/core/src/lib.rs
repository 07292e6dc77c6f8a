//! Tooling for idiom-aware conversational systems.
//!
//! The crate is split by pipeline stage:
//!
//! * [`corpus`] ingests, cleans and splits the labelled idioms corpus.
//! * [`classify`] trains figure-of-speech classifiers behind a pluggable
//!   backend and computes accuracy, F1 and confusion matrices.
//! * [`dialogue`] implements the decoding stack (temperature, n-gram blocking,
//!   top-k, top-p) over a pluggable language model and measures perplexity.
//! * [`transcripts`] assembles blinded human-evaluation transcripts with
//!   interleaved credibility conversations.
//! * [`adjudicate`] turns annotator votes into majority/unanimous tallies,
//!   the credibility unanimous score and Fleiss' kappa.
//! * [`stats`] aggregates repeated runs and runs Welch's t-test.
//! * [`synthetic`] generates small corpora for desk-scale experiments.

pub mod adjudicate;
pub mod classify;
pub mod corpus;
pub mod dialogue;
mod error;
pub mod stats;
pub mod synthetic;
pub mod transcripts;

pub use error::{Error, Result};
