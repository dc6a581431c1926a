//! Extraction of deterministic finite automata from recurrent recognizers by
//! state merging over a prefix tree, with the Tomita benchmark languages, an
//! Elman RNN trainer, a k-means extraction baseline and an experiment harness.

pub mod automata;
pub mod error;
pub mod extraction;
pub mod harness;
pub mod kmeans;
pub mod languages;
pub mod rnn;

pub use error::{Error, Result};
