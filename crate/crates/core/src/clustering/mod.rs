//! Spherical Gaussian-mixture clustering of model updates and the
//! confidence scores derived from a fitted mixture.

mod ari;
mod confidence;
mod gmm;

pub use ari::{adjusted_rand_index, same_partition};
pub use confidence::{
    confidence, select_num_clusters, separation_score, switch_round, theoretical_overlap,
    ClusterCountSelection, ConfidenceReport,
};
pub use gmm::{fit_gmm, GmmFit, GmmOptions, VarianceFloor};
