//! The round-driven protocol engine: R-DPCFL and the baselines.
//!
//! Clients exchange nothing with the server except their model updates and,
//! during selection rounds, the index of the cluster they privately chose.

mod config;
mod engine;
mod ops;
mod record;

pub use config::{Algorithm, ClusterCount, FederationConfig, FirstBatch};
pub use engine::{
    calibrate_clients, first_round_clustering, run_algorithm, run_global, run_ifca, run_local,
    run_mrmtl, run_oracle, run_rdpcfl, ClientCalibration, FirstRoundOutcome,
};
pub use ops::{
    aggregate_cluster, aggregate_soft, private_select_cluster, sample_soft_assignment,
    ClusterModels,
};
pub use record::{FirstRoundReport, RoundRecord, RunResult};
