//! WLAN fingerprint indoor localization with a semi-supervised discriminant
//! embedding of received signal strength.
//!
//! The offline stage clusters the radio map with kernel fuzzy c-means,
//! admits matching unlabeled observations, and learns a linear embedding
//! from within/between-class neighbor graphs. The online stage projects a
//! query into that embedding and matches it by k-nearest neighbors.

pub mod error;
pub mod eval;
pub mod kfcm;
pub mod locate;
pub mod model;
pub mod radio_map;
pub mod sde;
pub mod sim;

pub use error::{Error, Result};
pub use model::{EmbeddingModel, IntrinsicDim, TrainParams};
pub use radio_map::{ObservationSet, Point, RadioMap, ReferencePoint, RssVector};

/// Value substituted for an AP that was not heard.
pub const DEFAULT_FILL_DBM: f64 = 0.0;
