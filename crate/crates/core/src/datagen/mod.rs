//! Synthetic clustered classification tasks.
//!
//! A base task is a balanced mixture of Gaussian blobs, one per class. Each
//! client draws its own sample from the base task and the ground-truth
//! cluster `k` of the client decides how that sample is transformed: a
//! `k·90°` rotation of every coordinate pair (covariate shift) or the label
//! permutation `y ↦ (y + k) mod C` (concept shift).

mod io;
mod shift;
mod task;

pub use io::{load_federated, write_federated, ClientManifest, DatasetManifest, MANIFEST_FILE};
pub use shift::{apply_concept_shift, apply_covariate_shift, ShiftKind};
pub use task::{
    generate_base_task, generate_federated, BlobTask, ClientData, DataSpec, FederatedDataset,
};
