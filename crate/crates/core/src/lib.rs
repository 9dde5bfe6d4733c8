//! Multimodal reaction-yield regression.
//!
//! A transformer encoder reads the tokenized reaction SMILES, an MLP reads a
//! descriptor vector, and a linear head on their concatenation predicts the
//! yield fraction. The crate also carries the evaluation protocol (random
//! folds, group-disjoint splits) and a condition-ranking benchmark.

pub mod condopt;
pub mod data;
pub mod descriptors;
pub mod eval;
pub mod model;
pub mod pipeline;
pub mod seed;
pub mod smiles;
pub mod synth;
pub mod tensor;
