//! Toolkit for customizing event extraction to new event types.
//!
//! The pipeline runs in stages, each backed by a module here:
//!
//! * [`corpus`]: offset-bearing tokenized documents and seeded document splits.
//! * [`embeddings`] and [`wordnet`]: sources of related words.
//! * [`expansion`]: per-type trigger lexicons curated by a human.
//! * [`distsup`]: trigger examples located in unannotated text.
//! * [`rolemap`]: generic Actor/Place/Time argument labels.
//! * [`neuralnet`] and [`models`]: the CNN trigger and argument classifiers.
//! * [`eval`]: exact-offset scoring, leave-one-out folds and experiment arms.
//!
//! The numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar for everyday use. Training runs in `f64`.

pub mod corpus;
pub mod distsup;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod expansion;
pub mod io;
pub mod models;
pub mod neuralnet;
pub mod rolemap;
pub mod scalar;
pub mod wordnet;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision tensor.
pub type Tensor64 = neuralnet::Tensor<f64>;
/// Single-precision tensor.
pub type Tensor32 = neuralnet::Tensor<f32>;
/// Word embeddings stored in double precision.
pub type Embeddings = embeddings::EmbeddingTable<f64>;
/// Word embeddings stored in single precision.
pub type Embeddings32 = embeddings::EmbeddingTable<f32>;
/// Network parameters in double precision.
pub type LayerStack64 = neuralnet::LayerStack<f64>;
/// Trained classifier in double precision.
pub type Model = models::CnnModel<f64>;
/// Trained classifier downcast for inference.
pub type Model32 = models::CnnModel<f32>;
