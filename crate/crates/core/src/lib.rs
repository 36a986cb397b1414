//! Comment updating as edit-sequence prediction.
//!
//! The crate turns method/comment revisions into explicit edit sequences,
//! featurizes them, runs rule-based baselines and a small GRU edit model with
//! a pointer decoder, reranks candidates, and scores predictions with
//! editing-aware metrics.

pub mod baselines;
pub mod corpus;
pub mod diffcore;
pub mod editlex;
pub mod error;
pub mod features;
pub mod metrics;
pub mod model;
pub mod rerank;
pub mod tokenize;

pub use error::{Error, Result};

pub type EditModelF32 = model::EditModel<f32>;
pub type EditModelF64 = model::EditModel<f64>;
pub type TrainerF32 = model::Trainer<f32>;
