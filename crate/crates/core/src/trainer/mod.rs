//! Per-sample clipped, noise-injected local training and the update-variance
//! predictor.

mod dpsgd;
mod logistic;
mod mlp;
mod predictor;

pub use dpsgd::{
    clip, clip_in_place, dp_batch_gradient, dpsgd_local, dpsgd_local_proximal,
    predicted_update_variance, DpsgdParams, DpsgdStreams, LocalTrainReport,
};
pub use logistic::LogisticRegression;
pub use mlp::Mlp;
pub use predictor::{ModelSpec, Predictor};
