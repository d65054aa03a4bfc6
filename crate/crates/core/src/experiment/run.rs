use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::results::{ExperimentSummary, ResultsTable, RunSummary};
use crate::datagen::{generate_federated, load_federated, write_federated, DatasetManifest, FederatedDataset};
use crate::error::{invalid, Result};
use crate::federation::{calibrate_clients, run_algorithm, Algorithm, FederationConfig};
use crate::privacy::account_training;

/// Writes the federation for `seed` (the first configured seed when `None`).
pub fn generate_data(cfg: &ExperimentConfig, seed: Option<u64>, dir: &Path) -> Result<DatasetManifest> {
    cfg.validate()?;
    let seed = seed.unwrap_or(cfg.seeds[0]);
    write_federated(&generate_federated(&cfg.data, seed)?, dir)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientCalibrationRow {
    pub client: usize,
    pub dataset_size: usize,
    pub first_batch: usize,
    pub batch_size: usize,
    pub noise_multiplier: f64,
    /// Total `ε` at `δ` that a full run with this `z` spends.
    pub epsilon_spent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub algorithm: Algorithm,
    pub epsilon_target: f64,
    pub delta: f64,
    pub select_fraction: f64,
    pub epsilon_select: f64,
    pub selection_rounds: usize,
    pub clients: Vec<ClientCalibrationRow>,
}

pub fn calibrate(cfg: &ExperimentConfig) -> Result<CalibrationReport> {
    cfg.validate()?;
    let data = load_data(cfg, cfg.seeds[0])?;
    let cal = calibrate_clients(&cfg.training, &data)?;
    let clients = cal
        .plans
        .iter()
        .zip(&cal.noise_multipliers)
        .enumerate()
        .map(|(i, (plan, &z))| {
            Ok(ClientCalibrationRow {
                client: i,
                dataset_size: plan.dataset_size,
                first_batch: plan.first_batch,
                batch_size: plan.batch_size,
                noise_multiplier: z,
                epsilon_spent: account_training(plan, z)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CalibrationReport {
        algorithm: cfg.training.algorithm,
        epsilon_target: cfg.training.epsilon,
        delta: cfg.training.delta,
        select_fraction: cfg.training.select_fraction,
        epsilon_select: cfg.training.epsilon_select(),
        selection_rounds: cal.plans.first().map_or(0, |p| p.n_select_rounds),
        clients,
    })
}

fn load_data(cfg: &ExperimentConfig, seed: u64) -> Result<FederatedDataset> {
    match &cfg.data_dir {
        Some(dir) => load_federated(dir),
        None => generate_federated(&cfg.data, seed),
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub table: ResultsTable,
    pub summary: ExperimentSummary,
}

fn run_cells(
    cfg: &ExperimentConfig,
    algorithms: &[Algorithm],
    epsilons: &[f64],
    jobs: usize,
) -> Result<ExperimentOutput> {
    cfg.validate()?;
    if jobs == 0 {
        return Err(invalid("jobs must be positive"));
    }
    let datasets: Vec<FederatedDataset> = match &cfg.data_dir {
        Some(dir) => vec![load_federated(dir)?],
        None => cfg
            .seeds
            .iter()
            .map(|&s| generate_federated(&cfg.data, s))
            .collect::<Result<_>>()?,
    };
    let data_for = |k: usize| if datasets.len() == 1 { &datasets[0] } else { &datasets[k] };

    let mut cells = Vec::new();
    for &eps in epsilons {
        for &alg in algorithms {
            for k in 0..cfg.seeds.len() {
                cells.push((eps, alg, k));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?;
    let runs = pool.install(|| {
        cells
            .par_iter()
            .map(|&(eps, alg, k)| {
                let training = FederationConfig {
                    algorithm: alg,
                    epsilon: eps,
                    ..cfg.training.clone()
                };
                run_algorithm(&training, data_for(k), cfg.seeds[k])
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut table = ResultsTable::new();
    let mut summaries = Vec::with_capacity(runs.len());
    for run in &runs {
        table.extend_from_run(run);
        summaries.push(RunSummary::from_run(run));
    }
    Ok(ExperimentOutput {
        table,
        summary: ExperimentSummary::new(cfg.clone(), summaries),
    })
}

/// Runs `cfg.training.algorithm` at `cfg.training.epsilon` for every seed.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<ExperimentOutput> {
    run_cells(cfg, &[cfg.training.algorithm], &[cfg.training.epsilon], jobs)
}

/// Every `(ε, algorithm, seed)` combination of the configured grid.
pub fn run_sweep(cfg: &ExperimentConfig, jobs: usize) -> Result<ExperimentOutput> {
    run_cells(cfg, &cfg.algorithms, &cfg.epsilon_grid, jobs)
}
