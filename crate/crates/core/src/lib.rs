//! Context-aware passage retrieval.
//!
//! Given a question, a passage corpus and the asking user's set of personal
//! contexts, retrieve the relevant passage and the relevant context. The
//! crate provides the data model ([`corpus`]), pluggable lexical and dense
//! scorers ([`scoring`]), the OR/B1/B2/B3 baselines and the PCAS joint
//! ranker ([`pipelines`]), TREC-style evaluation ([`evaluation`]), and the
//! context-set dataset builder ([`dataset`]).

pub mod corpus;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod pipelines;
pub mod scoring;
pub mod synthetic;
pub mod text;

pub use error::{Error, Result};
