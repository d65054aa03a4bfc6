use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SCHEMA_VERSION};
use crate::error::Result;
use crate::federation::{Algorithm, RunResult};

pub const RESULTS_HEADER: [&str; 6] = ["seed", "algorithm", "epsilon", "round", "metric", "value"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub seed: u64,
    pub algorithm: Algorithm,
    pub epsilon: f64,
    pub round: usize,
    pub metric: String,
    pub value: f64,
}

/// Long-format results, one metric value per row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultsTable {
    rows: Vec<ResultRow>,
}

impl ResultsTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rows(&self) -> &[ResultRow] {
        &self.rows
    }

    pub fn push(&mut self, row: ResultRow) {
        self.rows.push(row);
    }

    pub fn extend_from_run(&mut self, run: &RunResult) {
        let mut push = |round: usize, metric: &str, value: f64| {
            self.rows.push(ResultRow {
                seed: run.seed,
                algorithm: run.algorithm,
                epsilon: run.epsilon,
                round,
                metric: metric.to_string(),
                value,
            })
        };
        if let Some(f) = &run.first_round {
            push(1, "first_round_mss", f.mss);
            push(1, "first_round_mpo", f.mpo);
            push(1, "first_round_ari", f.ari);
            push(1, "em_iterations", f.em_iterations as f64);
            push(1, "num_clusters", f.num_clusters as f64);
            push(1, "switch_round", f.switch_round as f64);
        }
        for r in &run.records {
            push(r.round, "mean_accuracy", r.mean_accuracy);
            push(r.round, "minority_accuracy", r.minority_accuracy);
            push(r.round, "clustering_correct", if r.clustering_correct { 1.0 } else { 0.0 });
            push(r.round, "privacy_spent", r.privacy_spent);
        }
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(RESULTS_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.seed.to_string(),
                r.algorithm.to_string(),
                r.epsilon.to_string(),
                r.round.to_string(),
                r.metric.clone(),
                r.value.to_string(),
            ])?;
        }
        w.into_inner().map_err(|e| e.into_error().into())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()?)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub algorithm: Algorithm,
    pub epsilon: f64,
    pub final_mean_accuracy: f64,
    pub final_minority_accuracy: f64,
    pub clustering_correct: bool,
    pub privacy_spent: f64,
    pub max_noise_multiplier: f64,
    pub num_clusters: usize,
    /// `None` for algorithms without a first-round mixture, or when a single
    /// cluster was chosen.
    pub first_round_mss: Option<f64>,
}

impl RunSummary {
    pub fn from_run(run: &RunResult) -> Self {
        Self {
            seed: run.seed,
            algorithm: run.algorithm,
            epsilon: run.epsilon,
            final_mean_accuracy: run.final_mean_accuracy(),
            final_minority_accuracy: run.final_minority_accuracy(),
            clustering_correct: run.clustering_correct(),
            privacy_spent: run.max_privacy_spent(),
            max_noise_multiplier: run.noise_multipliers.iter().copied().fold(0.0, f64::max),
            num_clusters: run.num_clusters,
            first_round_mss: run.first_round.as_ref().map(|f| f.mss).filter(|m| m.is_finite()),
        }
    }
}

/// Aggregate over seeds for one `(algorithm, ε)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub algorithm: Algorithm,
    pub epsilon: f64,
    pub seeds: usize,
    pub mean_final_accuracy: f64,
    pub mean_minority_accuracy: f64,
    /// Number of seeds whose final assignments match the ground truth.
    pub clustering_success: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub runs: Vec<RunSummary>,
    pub groups: Vec<GroupSummary>,
}

impl ExperimentSummary {
    /// Groups consecutive runs sharing `(algorithm, ε)`; runs must already
    /// be ordered by cell.
    pub fn new(config: ExperimentConfig, runs: Vec<RunSummary>) -> Self {
        let mut groups: Vec<GroupSummary> = Vec::new();
        for r in &runs {
            match groups.last_mut() {
                Some(g) if g.algorithm == r.algorithm && g.epsilon == r.epsilon => {
                    g.seeds += 1;
                    g.mean_final_accuracy += r.final_mean_accuracy;
                    g.mean_minority_accuracy += r.final_minority_accuracy;
                    g.clustering_success += r.clustering_correct as usize;
                }
                _ => groups.push(GroupSummary {
                    algorithm: r.algorithm,
                    epsilon: r.epsilon,
                    seeds: 1,
                    mean_final_accuracy: r.final_mean_accuracy,
                    mean_minority_accuracy: r.final_minority_accuracy,
                    clustering_success: r.clustering_correct as usize,
                }),
            }
        }
        for g in &mut groups {
            g.mean_final_accuracy /= g.seeds as f64;
            g.mean_minority_accuracy /= g.seeds as f64;
        }
        Self {
            schema_version: SCHEMA_VERSION,
            config,
            runs,
            groups,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}
