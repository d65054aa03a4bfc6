use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clustering::theoretical_overlap;
use crate::datagen::{generate_federated, DataSpec};
use crate::error::{Error, Result};
use crate::federation::{first_round_clustering, ClusterCount, FederationConfig, FirstBatch};
use crate::mathcore::{derive_stream, sample_gaussian, ParamVector, Party, StreamTag};
use crate::privacy::{
    account_training, calibrate_noise_scale, rdp_gaussian, rdp_subsampled_gaussian,
    PrivacyLedger, TrainingPrivacyPlan,
};
use crate::trainer::{
    dpsgd_local, predicted_update_variance, DpsgdParams, DpsgdStreams, ModelSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Variance,
    Overlap,
    BatchTrend,
    Accountant,
    MssPredictsSuccess,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Variance,
        Suite::Overlap,
        Suite::BatchTrend,
        Suite::Accountant,
        Suite::MssPredictsSuccess,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Variance => "variance",
            Suite::Overlap => "overlap",
            Suite::BatchTrend => "batch-trend",
            Suite::Accountant => "accountant",
            Suite::MssPredictsSuccess => "mss-predicts-success",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown validation suite {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationCheck {
    pub name: String,
    pub observed: f64,
    pub expected: f64,
    /// `|observed − expected|`, or relative error for relative checks.
    pub delta: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl ValidationCheck {
    fn absolute(name: impl Into<String>, observed: f64, expected: f64, tolerance: f64) -> Self {
        let delta = (observed - expected).abs();
        Self {
            name: name.into(),
            observed,
            expected,
            delta,
            tolerance,
            passed: delta <= tolerance,
        }
    }

    fn relative(name: impl Into<String>, observed: f64, expected: f64, tolerance: f64) -> Self {
        let delta = (observed - expected).abs() / expected.abs();
        Self {
            name: name.into(),
            observed,
            expected,
            delta,
            tolerance,
            passed: delta <= tolerance,
        }
    }

    /// A check that `observed` is at most `bound`.
    fn at_most(name: impl Into<String>, observed: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            observed,
            expected: bound,
            delta: (observed - bound).max(0.0),
            tolerance: 0.0,
            passed: observed <= bound,
        }
    }

    fn at_least(name: impl Into<String>, observed: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            observed,
            expected: bound,
            delta: (bound - observed).max(0.0),
            tolerance: 0.0,
            passed: observed >= bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub suite: Suite,
    pub checks: Vec<ValidationCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Runs one property suite. `seeds` scales the Monte-Carlo suites that
/// average over independent federations (default 40).
pub fn run_suite(suite: Suite, seeds: usize) -> Result<ValidationReport> {
    let checks = match suite {
        Suite::Variance => variance_suite()?,
        Suite::Overlap => overlap_suite(),
        Suite::BatchTrend => batch_trend_suite(seeds.max(2))?,
        Suite::Accountant => accountant_suite()?,
        Suite::MssPredictsSuccess => mss_suite(seeds.max(1).div_ceil(4))?,
    };
    Ok(ValidationReport { suite, checks })
}

fn variance_suite() -> Result<Vec<ValidationCheck>> {
    let data = generate_federated(&DataSpec::default(), 0)?;
    let train = &data.clients[0].train;
    let n = train.len();
    let model = ModelSpec::Logistic.build(data.dim, data.classes);
    let start = ParamVector::zeros(model.param_dim());
    let (eta, c, z, reps) = (1e-3, 0.05, 1.0, 200);
    let mut checks = Vec::new();
    for b in [n / 8, n / 4, n / 2, n] {
        let params = DpsgdParams {
            batch_size: b,
            epochs: 1,
            learning_rate: eta,
            clip_norm: c,
            noise_multiplier: z,
        };
        let updates = (0..reps)
            .map(|r| {
                let mut s = DpsgdStreams::for_round(r as u64, 0, 1);
                dpsgd_local(&*model, &start, train, &params, &mut s).map(|t| t.update)
            })
            .collect::<Result<Vec<_>>>()?;
        let mean = ParamVector::mean(&updates)?;
        let var = updates.iter().map(|u| u.distance_sq(&mean)).sum::<f64>() / (reps as f64 - 1.0);
        let predicted = predicted_update_variance(1, n, eta, model.param_dim(), c, z, b);
        checks.push(ValidationCheck::relative(format!("update variance b={b}"), var, predicted, 0.15));
    }
    Ok(checks)
}

fn overlap_suite() -> Vec<ValidationCheck> {
    const SAMPLES: usize = 100_000;
    let settings = [(0.3, 1.0, 4), (1.0, 1.0, 1), (0.2, 0.5, 16), (0.15, 1.0, 100), (1.0, 1.0, 9)];
    settings
        .iter()
        .enumerate()
        .map(|(k, &(delta, sigma, p))| {
            let mut s = derive_stream(k as u64, Party::Server, 0, StreamTag::DataGen);
            // Project onto the unit vector joining the means; the midpoint is
            // at distance D/2 along it.
            let dist = (p as f64).sqrt() * delta;
            let unit = 1.0 / (p as f64).sqrt();
            let mut crossed = 0usize;
            for _ in 0..SAMPLES {
                let proj_a: f64 = (0..p).map(|_| sigma * sample_gaussian(&mut s) * unit).sum();
                let proj_b: f64 =
                    (0..p).map(|_| (delta + sigma * sample_gaussian(&mut s)) * unit).sum();
                crossed += (proj_a > dist / 2.0) as usize + (proj_b < dist / 2.0) as usize;
            }
            let mc = crossed as f64 / SAMPLES as f64;
            let theory = theoretical_overlap(delta, sigma, p).expect("valid setting");
            ValidationCheck::absolute(format!("overlap Δ={delta} σ={sigma} p={p}"), mc, theory, 0.01)
        })
        .collect()
}

/// Small federation on which the first-round geometry changes visibly
/// across the batch-size grid.
fn trend_spec(samples_per_client: usize) -> DataSpec {
    DataSpec {
        dim: 4,
        classes: 2,
        samples_per_client,
        ..DataSpec::default()
    }
}

fn count_inversions(values: &[f64], increasing: bool, strict: bool) -> usize {
    values
        .windows(2)
        .filter(|w| {
            let ok = match (increasing, strict) {
                (true, true) => w[1] > w[0],
                (true, false) => w[1] >= w[0],
                (false, true) => w[1] < w[0],
                (false, false) => w[1] <= w[0],
            };
            !ok
        })
        .count()
}

/// Pooled within-cluster variance of the updates around their true-cluster
/// means, summed over coordinates.
fn within_cluster_variance(updates: &[ParamVector], truth: &[usize]) -> Result<f64> {
    let k = truth.iter().max().map_or(0, |m| m + 1);
    let mut ss = 0.0;
    for m in 0..k {
        let members: Vec<ParamVector> = updates
            .iter()
            .zip(truth)
            .filter(|(_, &t)| t == m)
            .map(|(u, _)| u.clone())
            .collect();
        let mean = ParamVector::mean(&members)?;
        ss += members.iter().map(|u| u.distance_sq(&mean)).sum::<f64>();
    }
    Ok(ss / (updates.len() - k) as f64)
}

fn batch_trend_suite(seeds: usize) -> Result<Vec<ValidationCheck>> {
    let spec = trend_spec(250);
    let n = spec.n_train();
    let grid = [n / 8, n / 4, n / 2, n];
    let mut iters = vec![0.0; grid.len()];
    let mut mss = vec![0.0; grid.len()];
    let mut var = vec![0.0; grid.len()];
    for seed in 0..seeds as u64 {
        let data = generate_federated(&spec, seed)?;
        for (g, &b) in grid.iter().enumerate() {
            let cfg = FederationConfig {
                epsilon: 3.0,
                first_batch: FirstBatch::Size(b),
                num_clusters: ClusterCount::Fixed(4),
                ..FederationConfig::default()
            };
            let out = first_round_clustering(&cfg, &data, seed)?;
            var[g] += within_cluster_variance(&out.updates, &data.true_assignments())? / seeds as f64;
            iters[g] += out.report.em_iterations as f64 / seeds as f64;
            mss[g] += out.report.mss / seeds as f64;
        }
    }
    Ok(vec![
        ValidationCheck::at_most(
            format!("update variance inversions over b1 grid (means {var:.3?})"),
            count_inversions(&var, false, true) as f64,
            1.0,
        ),
        ValidationCheck::at_most(
            format!("EM iteration inversions over b1 grid (means {iters:.2?})"),
            count_inversions(&iters, false, false) as f64,
            1.0,
        ),
        ValidationCheck::at_most(
            format!("MSS inversions over b1 grid (means {mss:.2?})"),
            count_inversions(&mss, true, true) as f64,
            1.0,
        ),
    ])
}

fn accountant_suite() -> Result<Vec<ValidationCheck>> {
    let orders: Vec<f64> = (2..=256).map(f64::from).collect();
    let sub = rdp_subsampled_gaussian(1.0, 1.3, &orders)?;
    let plain = rdp_gaussian(1.0, 1.3, &orders)?;
    let max_gap = sub
        .epsilons()
        .iter()
        .zip(plain.epsilons())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let mut checks = vec![ValidationCheck::at_most("q=1 subsampled vs plain Gaussian", max_gap, 1e-12)];
    let cfg = FederationConfig::default();
    let n = DataSpec::default().n_train();
    let mut worst_low: f64 = 1.0;
    let mut worst_high: f64 = 0.0;
    for eps in super::config::default_epsilon_grid() {
        for b1 in [n / 8, n / 4, n / 2, n] {
            for b in [16, 32, 64] {
                let plan = TrainingPrivacyPlan::new(eps, cfg.delta, n, b1, b, cfg.local_epochs, cfg.rounds)
                    .with_selection_rounds(cfg.selection_window())
                    .with_epsilon_select(cfg.select_fraction * eps);
                let z = calibrate_noise_scale(&plan)?;
                let ratio = account_training(&plan, z)? / eps;
                worst_low = worst_low.min(ratio);
                let ledger = PrivacyLedger::new(&plan, z)?;
                worst_high = worst_high.max(ledger.spent(plan.rounds, plan.n_select_rounds)? / eps);
            }
        }
    }
    checks.push(ValidationCheck::at_least("min calibrated ε / target", worst_low, 0.99));
    checks.push(ValidationCheck::at_most("max composed ε / target", worst_high, 1.0));
    Ok(checks)
}

fn mss_suite(seeds_per_cell: usize) -> Result<Vec<ValidationCheck>> {
    let mut runs = Vec::new();
    for spc in [40, 100, 250, 500] {
        let spec = trend_spec(spc);
        let n = spec.n_train();
        for eps in [3.0, 5.0] {
            for b in [n / 8, n / 4, n / 2, n] {
                for seed in 0..seeds_per_cell as u64 {
                    let data = generate_federated(&spec, seed)?;
                    let cfg = FederationConfig {
                        epsilon: eps,
                        first_batch: FirstBatch::Size(b),
                        num_clusters: ClusterCount::Fixed(4),
                        ..FederationConfig::default()
                    };
                    let out = first_round_clustering(&cfg, &data, seed)?;
                    runs.push((out.report.mss, out.report.ari >= 1.0 - 1e-12));
                }
            }
        }
    }
    let confident: Vec<&(f64, bool)> = runs.iter().filter(|r| r.0 >= 2.0).collect();
    let rate = confident.iter().filter(|r| r.1).count() as f64 / confident.len().max(1) as f64;
    let lo = runs.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let hi = runs.iter().map(|r| r.0).fold(0.0, f64::max);
    Ok(vec![
        ValidationCheck::at_most("smallest first-round MSS in sweep", lo, 0.5),
        ValidationCheck::at_least("largest first-round MSS in sweep", hi, 4.0),
        ValidationCheck::at_least(
            format!("correct clustering rate when MSS >= 2 ({} runs)", confident.len()),
            rate,
            0.95,
        ),
    ])
}
