use serde::{Deserialize, Serialize};

use super::config::Algorithm;
use crate::mathcore::ParamVector;

/// Metrics after one communication round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Model index each client used this round. For personalised
    /// algorithms every client has its own index.
    pub assignments: Vec<usize>,
    /// Test accuracy of each client's model at the end of the round.
    pub client_accuracy: Vec<f64>,
    /// Mean client accuracy per ground-truth cluster.
    pub cluster_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    pub minority_accuracy: f64,
    /// Assignments equal the ground truth up to relabelling.
    pub clustering_correct: bool,
    /// Largest cumulative `ε` spent by any client so far.
    pub privacy_spent: f64,
}

/// Outcome of R-DPCFL's first round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstRoundReport {
    pub num_clusters: usize,
    /// `(M, MSS)` per candidate count that was fitted.
    pub candidate_scores: Vec<(usize, f64)>,
    pub mss: f64,
    pub mpo: f64,
    pub em_iterations: usize,
    pub hard_assignments: Vec<usize>,
    /// Adjusted Rand index of the hard assignments against the truth.
    pub ari: f64,
    /// `E_c`
    pub switch_round: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub epsilon: f64,
    pub num_clusters: usize,
    /// Calibrated `z` per client.
    pub noise_multipliers: Vec<f64>,
    pub first_round: Option<FirstRoundReport>,
    pub records: Vec<RoundRecord>,
    /// Cluster models at the end of the run, or one personal model per
    /// client for the personalised algorithms.
    pub final_models: Vec<ParamVector>,
    /// False when a diagnostics option bypassed the private mechanisms.
    pub private: bool,
}

impl RunResult {
    pub fn last(&self) -> &RoundRecord {
        self.records.last().expect("a run has at least one round")
    }

    pub fn final_mean_accuracy(&self) -> f64 {
        self.last().mean_accuracy
    }

    pub fn final_minority_accuracy(&self) -> f64 {
        self.last().minority_accuracy
    }

    pub fn final_assignments(&self) -> &[usize] {
        &self.last().assignments
    }

    pub fn clustering_correct(&self) -> bool {
        self.last().clustering_correct
    }

    pub fn max_privacy_spent(&self) -> f64 {
        self.last().privacy_spent
    }
}
