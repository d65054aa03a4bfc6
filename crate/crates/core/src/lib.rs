//! Simulator for differentially private clustered federated learning.
//!
//! Clients run per-sample clipped DPSGD on local data; the server clusters
//! their first-round model updates with a spherical Gaussian mixture, uses the
//! mixture's confidence to decide when to hand clustering over to private,
//! accuracy-based local selection, and aggregates one model per cluster.
//! Baselines (global, local, MR-MTL, IFCA, oracle clustering) share the same
//! machinery, and every client's total spend is tracked with a Rényi-DP
//! accountant.

pub mod clustering;
pub mod data;
pub mod datagen;
pub mod error;
pub mod experiment;
pub mod federation;
pub mod mathcore;
pub mod privacy;
pub mod trainer;

pub use data::Dataset;
pub use error::{Error, Result};
pub use mathcore::ParamVector;
