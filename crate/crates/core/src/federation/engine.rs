use std::collections::BTreeMap;

use rayon::prelude::*;

use super::config::{Algorithm, ClusterCount, FederationConfig};
use super::ops::{
    aggregate_cluster, aggregate_soft, private_select_cluster, sample_soft_assignment,
    ClusterModels,
};
use super::record::{FirstRoundReport, RoundRecord, RunResult};
use crate::clustering::{
    adjusted_rand_index, same_partition, select_num_clusters, switch_round,
    ClusterCountSelection,
};
use crate::datagen::FederatedDataset;
use crate::error::{invalid, Result};
use crate::mathcore::{derive_stream, ParamVector, Party, StreamTag};
use crate::privacy::{calibrate_noise_scale, PrivacyLedger, TrainingPrivacyPlan};
use crate::trainer::{
    dpsgd_local, dpsgd_local_proximal, DpsgdParams, DpsgdStreams, LocalTrainReport, Predictor,
};

/// Per-client privacy plans and their calibrated noise multipliers.
#[derive(Debug, Clone)]
pub struct ClientCalibration {
    pub plans: Vec<TrainingPrivacyPlan>,
    pub noise_multipliers: Vec<f64>,
    ledgers: Vec<PrivacyLedger>,
}

impl ClientCalibration {
    /// Largest cumulative spend over clients after `rounds` rounds and
    /// `selections` private selections.
    pub fn max_spent(&self, rounds: usize, selections: usize) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for l in &self.ledgers {
            worst = worst.max(l.spent(rounds, selections)?);
        }
        Ok(worst)
    }
}

fn selection_rounds(cfg: &FederationConfig, num_clusters: Option<usize>) -> usize {
    match cfg.algorithm {
        Algorithm::Rdpcfl => cfg.selection_window(),
        Algorithm::Ifca if num_clusters.unwrap_or(2) > 1 => cfg.selection_window().max(1),
        _ => 0,
    }
}

/// Calibrates `z` for every client so that its whole run, including any
/// private selections the algorithm performs, stays within `cfg.epsilon`.
/// Clients with equal dataset sizes share one calibration.
pub fn calibrate_clients(cfg: &FederationConfig, data: &FederatedDataset) -> Result<ClientCalibration> {
    cfg.validate()?;
    let m = ifca_clusters(cfg, data);
    let n_select = selection_rounds(cfg, Some(m));
    let mut cache: BTreeMap<usize, (TrainingPrivacyPlan, f64, PrivacyLedger)> = BTreeMap::new();
    let mut plans = Vec::with_capacity(data.clients.len());
    let mut zs = Vec::with_capacity(data.clients.len());
    let mut ledgers = Vec::with_capacity(data.clients.len());
    for c in &data.clients {
        let n = c.train.len();
        if !cache.contains_key(&n) {
            let first = match cfg.algorithm {
                Algorithm::Rdpcfl => cfg.first_batch.resolve(n),
                _ => cfg.batch_size,
            };
            let plan = TrainingPrivacyPlan::new(
                cfg.epsilon,
                cfg.delta,
                n,
                first,
                cfg.batch_size,
                cfg.local_epochs,
                cfg.rounds,
            )
            .with_selection_rounds(n_select)
            .with_epsilon_select(cfg.epsilon_select());
            let z = calibrate_noise_scale(&plan)?;
            let ledger = PrivacyLedger::new(&plan, z)?;
            cache.insert(n, (plan, z, ledger));
        }
        let (plan, z, ledger) = &cache[&n];
        plans.push(plan.clone());
        zs.push(*z);
        ledgers.push(ledger.clone());
    }
    Ok(ClientCalibration {
        plans,
        noise_multipliers: zs,
        ledgers,
    })
}

fn ifca_clusters(cfg: &FederationConfig, data: &FederatedDataset) -> usize {
    match cfg.num_clusters {
        ClusterCount::Fixed(m) => m,
        ClusterCount::Auto => data.num_clusters(),
    }
}

struct Context<'a> {
    cfg: &'a FederationConfig,
    data: &'a FederatedDataset,
    seed: u64,
    predictor: Box<dyn Predictor>,
    calibration: ClientCalibration,
    theta_init: ParamVector,
    truth: Vec<usize>,
}

impl<'a> Context<'a> {
    fn new(cfg: &'a FederationConfig, data: &'a FederatedDataset, seed: u64) -> Result<Self> {
        if data.clients.is_empty() {
            return Err(invalid("federation has no clients"));
        }
        let calibration = calibrate_clients(cfg, data)?;
        let predictor = cfg.model.build(data.dim, data.classes);
        let theta_init =
            predictor.init_params(&mut derive_stream(seed, Party::Server, 0, StreamTag::ModelInit));
        Ok(Self {
            cfg,
            data,
            seed,
            predictor,
            calibration,
            theta_init,
            truth: data.true_assignments(),
        })
    }

    fn n_clients(&self) -> usize {
        self.data.clients.len()
    }

    fn dpsgd_params(&self, client: usize, batch: usize) -> DpsgdParams {
        DpsgdParams {
            batch_size: batch,
            epochs: self.cfg.local_epochs,
            learning_rate: self.cfg.learning_rate,
            clip_norm: self.cfg.clip_norm,
            noise_multiplier: self.calibration.noise_multipliers[client],
        }
    }

    /// Runs local DPSGD on every client in parallel. `start(i)` is client
    /// `i`'s starting model and `anchor(i)` its proximal anchor, if any.
    fn train_all<'m>(
        &self,
        round: usize,
        first_round: bool,
        start: impl Fn(usize) -> &'m ParamVector + Sync,
        anchor: Option<&ParamVector>,
    ) -> Result<Vec<LocalTrainReport>> {
        (0..self.n_clients())
            .into_par_iter()
            .map(|i| {
                let client = &self.data.clients[i];
                let n = client.train.len();
                let batch = if first_round && self.cfg.algorithm == Algorithm::Rdpcfl {
                    self.cfg.first_batch.resolve(n)
                } else {
                    self.cfg.batch_size
                };
                let params = self.dpsgd_params(i, batch);
                let mut streams = DpsgdStreams::for_round(self.seed, i as u32, round as u32);
                match anchor {
                    Some(a) => dpsgd_local_proximal(
                        &*self.predictor,
                        start(i),
                        &client.train,
                        &params,
                        self.cfg.lambda,
                        a,
                        &mut streams,
                    ),
                    None => dpsgd_local(&*self.predictor, start(i), &client.train, &params, &mut streams),
                }
            })
            .collect()
    }

    fn test_accuracy<'m>(&self, model: impl Fn(usize) -> &'m ParamVector + Sync) -> Vec<f64> {
        (0..self.n_clients())
            .into_par_iter()
            .map(|i| self.predictor.accuracy(model(i), &self.data.clients[i].test))
            .collect()
    }

    fn record(
        &self,
        round: usize,
        assignments: Vec<usize>,
        client_accuracy: Vec<f64>,
        rounds_done: usize,
        selections_done: usize,
    ) -> Result<RoundRecord> {
        let k = self.data.num_clusters();
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for (&s, &a) in self.truth.iter().zip(&client_accuracy) {
            sums[s] += a;
            counts[s] += 1;
        }
        let cluster_accuracy: Vec<f64> = sums
            .iter()
            .zip(&counts)
            .map(|(s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
            .collect();
        let mean_accuracy = client_accuracy.iter().sum::<f64>() / client_accuracy.len() as f64;
        Ok(RoundRecord {
            round,
            clustering_correct: same_partition(&assignments, &self.truth),
            assignments,
            minority_accuracy: cluster_accuracy[self.data.minority_cluster()],
            cluster_accuracy,
            mean_accuracy,
            client_accuracy,
            privacy_spent: self.calibration.max_spent(rounds_done, selections_done)?,
        })
    }

    fn result(
        &self,
        num_clusters: usize,
        first_round: Option<FirstRoundReport>,
        records: Vec<RoundRecord>,
        final_models: Vec<ParamVector>,
    ) -> RunResult {
        RunResult {
            algorithm: self.cfg.algorithm,
            seed: self.seed,
            epsilon: self.cfg.epsilon,
            num_clusters,
            noise_multipliers: self.calibration.noise_multipliers.clone(),
            first_round,
            records,
            final_models,
            private: !self.cfg.nonprivate_selection,
        }
    }

    /// Each client's choice among `models`: private accuracy-based selection,
    /// or argmin of training loss when private selection is switched off.
    fn select_clusters(&self, models: &ClusterModels, round: usize) -> Result<Vec<usize>> {
        let eps_select = self.cfg.epsilon_select();
        (0..self.n_clients())
            .into_par_iter()
            .map(|i| {
                let train = &self.data.clients[i].train;
                if self.cfg.nonprivate_selection {
                    let losses: Vec<f64> =
                        models.params.iter().map(|m| self.predictor.loss(m, train)).collect();
                    let mut best = 0;
                    for (k, &l) in losses.iter().enumerate() {
                        if l < losses[best] {
                            best = k;
                        }
                    }
                    return Ok(best);
                }
                let acc: Vec<f64> =
                    models.params.iter().map(|m| self.predictor.accuracy(m, train)).collect();
                let mut stream = derive_stream(self.seed, Party::Client(i as u32), round as u32, StreamTag::Gumbel);
                private_select_cluster(&acc, train.len(), eps_select, &mut stream)
            })
            .collect()
    }

    /// Trains and aggregates one clustered round with fixed assignments.
    fn clustered_round(
        &self,
        models: &ClusterModels,
        assignments: &[usize],
        round: usize,
    ) -> Result<ClusterModels> {
        let reports = self.train_all(round, round == 1, |i| &models.params[assignments[i]], None)?;
        let updates: Vec<ParamVector> = reports.into_iter().map(|r| r.update).collect();
        aggregate_cluster(models, &updates, assignments)
    }
}

/// Round-one updates of R-DPCFL and the mixture fitted to them.
#[derive(Debug, Clone)]
pub struct FirstRoundOutcome {
    pub updates: Vec<ParamVector>,
    pub noise_multipliers: Vec<f64>,
    pub selection: ClusterCountSelection,
    pub report: FirstRoundReport,
}

fn first_round_inner(ctx: &Context<'_>) -> Result<FirstRoundOutcome> {
    let cfg = ctx.cfg;
    let reports = ctx.train_all(1, true, |_| &ctx.theta_init, None)?;
    let updates: Vec<ParamVector> = reports.into_iter().map(|r| r.update).collect();
    let candidates = match cfg.num_clusters {
        ClusterCount::Auto => cfg.cluster_candidates.clone(),
        ClusterCount::Fixed(m) => vec![m],
    };
    let selection = select_num_clusters(&updates, &candidates, &cfg.gmm, ctx.seed)?;
    let hard = selection.fit.hard_assignments();
    let report = FirstRoundReport {
        num_clusters: selection.num_clusters,
        candidate_scores: selection.scores.clone(),
        mss: selection.report.mss,
        mpo: selection.report.mpo,
        em_iterations: selection.fit.em_iterations,
        ari: adjusted_rand_index(&hard, &ctx.truth),
        hard_assignments: hard,
        switch_round: switch_round(selection.report.mpo, cfg.rounds),
    };
    Ok(FirstRoundOutcome {
        updates,
        noise_multipliers: ctx.calibration.noise_multipliers.clone(),
        selection,
        report,
    })
}

/// Runs only R-DPCFL's first round: calibration, full-batch (or `b¹`)
/// DPSGD from the initial model, and the mixture fit on the updates.
pub fn first_round_clustering(
    cfg: &FederationConfig,
    data: &FederatedDataset,
    seed: u64,
) -> Result<FirstRoundOutcome> {
    let cfg = FederationConfig {
        algorithm: Algorithm::Rdpcfl,
        ..cfg.clone()
    };
    first_round_inner(&Context::new(&cfg, data, seed)?)
}

pub fn run_rdpcfl(cfg: &FederationConfig, data: &FederatedDataset, seed: u64) -> Result<RunResult> {
    let cfg = FederationConfig {
        algorithm: Algorithm::Rdpcfl,
        ..cfg.clone()
    };
    let ctx = Context::new(&cfg, data, seed)?;
    let first = first_round_inner(&ctx)?;
    let m = first.report.num_clusters;
    let e_c = first.report.switch_round;
    let window = cfg.selection_window();
    let pi = &first.selection.fit.responsibilities;

    // Round one only probes the update geometry; every cluster model then
    // starts from the initial parameters.
    let mut models = ClusterModels::uniform(&ctx.theta_init, m, 2);
    let mut assignments = first.report.hard_assignments.clone();
    let init_acc = ctx.test_accuracy(|_| &ctx.theta_init);
    let mut records = vec![ctx.record(1, assignments.clone(), init_acc, 1, 0)?];
    let mut selections = 0;

    for e in 2..=cfg.rounds {
        if e <= e_c {
            if cfg.soft_weighting {
                assignments = first.report.hard_assignments.clone();
                let reports = ctx.train_all(e, false, |i| &models.params[assignments[i]], None)?;
                let updates: Vec<ParamVector> = reports.into_iter().map(|r| r.update).collect();
                models = aggregate_soft(&models, &updates, pi)?;
            } else {
                assignments = pi
                    .iter()
                    .enumerate()
                    .map(|(i, row)| {
                        let mut s = derive_stream(seed, Party::Client(i as u32), e as u32, StreamTag::SoftAssign);
                        sample_soft_assignment(row, &mut s)
                    })
                    .collect::<Result<_>>()?;
                models = ctx.clustered_round(&models, &assignments, e)?;
            }
        } else {
            if e <= e_c + window && m > 1 {
                assignments = ctx.select_clusters(&models, e)?;
                selections += 1;
            }
            models = ctx.clustered_round(&models, &assignments, e)?;
        }
        let acc = ctx.test_accuracy(|i| &models.params[assignments[i]]);
        records.push(ctx.record(e, assignments.clone(), acc, e, selections)?);
    }
    Ok(ctx.result(m, Some(first.report), records, models.params))
}

fn run_fixed_clusters(
    ctx: &Context<'_>,
    m: usize,
    fixed: Option<Vec<usize>>,
    window: usize,
) -> Result<RunResult> {
    let mut models = ClusterModels::uniform(&ctx.theta_init, m, 1);
    let mut assignments = fixed.unwrap_or_else(|| vec![0; ctx.n_clients()]);
    let mut records = Vec::with_capacity(ctx.cfg.rounds);
    let mut selections = 0;
    for e in 1..=ctx.cfg.rounds {
        if e <= window && m > 1 {
            assignments = ctx.select_clusters(&models, e)?;
            selections += 1;
        }
        models = ctx.clustered_round(&models, &assignments, e)?;
        let acc = ctx.test_accuracy(|i| &models.params[assignments[i]]);
        records.push(ctx.record(e, assignments.clone(), acc, e, selections)?);
    }
    Ok(ctx.result(m, None, records, models.params))
}

pub fn run_ifca(cfg: &FederationConfig, data: &FederatedDataset, seed: u64) -> Result<RunResult> {
    let cfg = FederationConfig {
        algorithm: Algorithm::Ifca,
        ..cfg.clone()
    };
    let ctx = Context::new(&cfg, data, seed)?;
    let m = ifca_clusters(&cfg, data);
    run_fixed_clusters(&ctx, m, None, selection_rounds(&cfg, Some(m)))
}

pub fn run_global(cfg: &FederationConfig, data: &FederatedDataset, seed: u64) -> Result<RunResult> {
    let cfg = FederationConfig {
        algorithm: Algorithm::Global,
        ..cfg.clone()
    };
    let ctx = Context::new(&cfg, data, seed)?;
    run_fixed_clusters(&ctx, 1, None, 0)
}

pub fn run_oracle(cfg: &FederationConfig, data: &FederatedDataset, seed: u64) -> Result<RunResult> {
    let cfg = FederationConfig {
        algorithm: Algorithm::Oracle,
        ..cfg.clone()
    };
    let ctx = Context::new(&cfg, data, seed)?;
    let truth = ctx.truth.clone();
    run_fixed_clusters(&ctx, data.num_clusters(), Some(truth), 0)
}

fn run_personal(ctx: &Context<'_>, proximal: bool) -> Result<RunResult> {
    let n = ctx.n_clients();
    let ids: Vec<usize> = (0..n).collect();
    let mut personal = vec![ctx.theta_init.clone(); n];
    let mut mean = ctx.theta_init.clone();
    let mut records = Vec::with_capacity(ctx.cfg.rounds);
    for e in 1..=ctx.cfg.rounds {
        let anchor = proximal.then_some(&mean);
        let reports = ctx.train_all(e, false, |i| &personal[i], anchor)?;
        for (p, r) in personal.iter_mut().zip(&reports) {
            p.axpy(1.0, &r.update)?;
        }
        if proximal {
            mean = ParamVector::mean(&personal)?;
        }
        let acc = ctx.test_accuracy(|i| &personal[i]);
        records.push(ctx.record(e, ids.clone(), acc, e, 0)?);
    }
    Ok(ctx.result(n, None, records, personal))
}

pub fn run_local(cfg: &FederationConfig, data: &FederatedDataset, seed: u64) -> Result<RunResult> {
    let cfg = FederationConfig {
        algorithm: Algorithm::Local,
        ..cfg.clone()
    };
    run_personal(&Context::new(&cfg, data, seed)?, false)
}

/// MR-MTL: personal models regularised towards their running average with
/// strength `cfg.lambda`.
pub fn run_mrmtl(cfg: &FederationConfig, data: &FederatedDataset, seed: u64) -> Result<RunResult> {
    let cfg = FederationConfig {
        algorithm: Algorithm::Mrmtl,
        ..cfg.clone()
    };
    run_personal(&Context::new(&cfg, data, seed)?, true)
}

pub fn run_algorithm(cfg: &FederationConfig, data: &FederatedDataset, seed: u64) -> Result<RunResult> {
    match cfg.algorithm {
        Algorithm::Rdpcfl => run_rdpcfl(cfg, data, seed),
        Algorithm::Ifca => run_ifca(cfg, data, seed),
        Algorithm::Global => run_global(cfg, data, seed),
        Algorithm::Local => run_local(cfg, data, seed),
        Algorithm::Mrmtl => run_mrmtl(cfg, data, seed),
        Algorithm::Oracle => run_oracle(cfg, data, seed),
    }
}
