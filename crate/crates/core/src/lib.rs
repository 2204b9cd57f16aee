//! Domain-incremental continual learning over latent feature vectors.
//!
//! The crate is organised around the lifecycle of one experiment:
//!
//! - [`store`]: latent datasets, CSV/manifest ingestion, synthetic domain-shift
//!   benchmarks, stratified splits and episode sequences.
//! - [`density`]: K-means (with BIC model selection), the incremental KDE
//!   latent generator and the diagonal GMM baseline.
//! - [`classifier`]: the fully connected student/teacher head, cross-entropy
//!   and KL distillation losses, backpropagation and optimizers.
//! - [`continual`]: the episode loop and every replay/regularisation strategy.
//! - [`metrics`]: ACC/ILM/BWT over the train-test matrix and generator
//!   fidelity metrics (cosine, Euclidean, FID, MMD).
//! - [`experiment`]: config-driven sweeps and report/CSV emission.

pub mod classifier;
pub mod continual;
pub mod density;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod rng;
pub mod store;

pub use error::{Error, Result};
