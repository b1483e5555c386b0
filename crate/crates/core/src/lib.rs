//! Streaming imbalanced-classification toolkit.
//!
//! The crate covers the full pipeline for fraud-style class-imbalanced
//! streams: a frame data model, exact k-NN, eight rebalancing techniques, a
//! random-forest classifier, rank-based metrics, a racing selector that picks
//! the best balancer per training window, and the window protocols (batch,
//! accumulative, and piece-wise incremental data balancing) that tie them
//! together.

pub mod forest;
pub mod frame;
pub mod ingest;
pub mod metrics;
pub mod racing;
pub mod neighbors;
pub mod resampling;
pub mod seed;
pub mod split;
pub mod streaming;
pub mod stats;

pub use frame::{Frame, ImbalanceRatio, Instance, InstanceId, Label, Provenance};
pub use resampling::{BalancerSpec, Technique};
pub use seed::SeedPolicy;
