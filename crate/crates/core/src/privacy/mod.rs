//! Rényi-DP accounting: mechanism curves, composition, conversion to
//! `(ε, δ)`-DP and noise-scale calibration.

mod curve;
mod mechanisms;
mod plan;

pub use curve::{default_orders, rdp_compose, rdp_to_dp, RdpCurve};
pub use mechanisms::{rdp_exponential_mechanism, rdp_gaussian, rdp_subsampled_gaussian};
pub use plan::{
    account_training, calibrate_noise_scale, PrivacyLedger, TrainingPrivacyPlan,
    DEFAULT_DELTA, DEFAULT_SELECT_FRACTION, Z_SEARCH_MAX, Z_SEARCH_MIN,
};
