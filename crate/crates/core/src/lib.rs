//! K-Deep Simplex: local dictionary learning with simplex-constrained codes.
//!
//! Data points are represented as sparse convex combinations of a small set of
//! learned atoms. Codes come from an unrolled, accelerated projected-gradient
//! encoder; the atoms are trained by backpropagating through that encoder. The
//! resulting codes define a bipartite point/atom graph whose spectral embedding
//! only needs an `m x m` eigensolve.
//!
//! The crate is `no_std` (with `alloc`). The `std` feature is on by default and
//! `parallel` enables a rayon-backed batch map in the trainer.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod datagen;
pub mod encoder;
pub mod error;
pub mod linalg;
pub mod simplex;
pub mod spectral;
pub mod trainer;

pub use encoder::{encode, loss, loss_grad_x, EncoderParams, EncoderTape, Momentum, StepSize};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use simplex::{project_simplex, projection_vjp};
pub use spectral::{
    cluster_pipeline, clustering_accuracy, kmeans, spectral_embed, CodeMatrix, Embedding,
    LaplacianMode,
};
pub use trainer::{train, TrainConfig, TrainOutput};

/// Entries above this value count towards a code's support.
pub const SUPPORT_THRESHOLD: f64 = 1e-3;

/// Tolerance on `sum(x) == 1` when checking simplex membership.
pub const SIMPLEX_TOL: f64 = 1e-9;
