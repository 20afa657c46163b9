//! Multilabel weight imprinting over frozen, L2-normalized embeddings.
//!
//! - [`store`]: embedding datasets, the `.mwie` container and a synthetic generator.
//! - [`imprint`]: the imprinted classifier, sigmoid/softmax heads, BCE + Adam training
//!   and the `.mwic` container.
//! - [`episode`]: seeded n-way k-shot episode sampling over example groups.
//! - [`metrics`]: the thirteen evaluation metrics and threshold selection.
//! - [`continual`]: label-by-label continual learning with experience replay.
//! - [`experiment`]: episode-averaged runs, ablation grids and their CSV outputs.

mod codec;
pub mod continual;
pub mod episode;
pub mod error;
pub mod experiment;
pub mod imprint;
pub mod matrix;
pub mod metrics;
pub mod store;

pub use error::{Error, Result};
pub use matrix::Matrix;
