use serde::{Deserialize, Serialize};

use super::curve::{default_orders, rdp_to_dp, RdpCurve};
use super::mechanisms::{rdp_exponential_mechanism, rdp_subsampled_gaussian};
use crate::error::{invalid, Error, Result};

pub const DEFAULT_DELTA: f64 = 1e-4;
pub const DEFAULT_SELECT_FRACTION: f64 = 0.03;
pub const Z_SEARCH_MIN: f64 = 1e-2;
pub const Z_SEARCH_MAX: f64 = 1e3;
const BISECTION_STEPS: usize = 60;

/// Everything that determines one client's privacy spend over a run.
///
/// Training is accounted as `K·⌈N/b1⌉` subsampled-Gaussian steps at rate
/// `b1/N` in the first round, `(E−1)·K·⌈N/b_rest⌉` steps at rate `b_rest/N`
/// afterwards, plus `n_select_rounds` exponential-mechanism selections.
/// Batches are drawn as fixed-size shuffles but accounted at the Poisson rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPrivacyPlan {
    pub epsilon_total: f64,
    pub delta: f64,
    pub dataset_size: usize,
    pub first_batch: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub rounds: usize,
    pub n_select_rounds: usize,
    pub epsilon_select: f64,
}

impl TrainingPrivacyPlan {
    /// A plan without private selection; `epsilon_select` defaults to 3% of
    /// the total budget so that [`with_selection_rounds`] only needs a count.
    ///
    /// [`with_selection_rounds`]: TrainingPrivacyPlan::with_selection_rounds
    pub fn new(
        epsilon_total: f64,
        delta: f64,
        dataset_size: usize,
        first_batch: usize,
        batch_size: usize,
        epochs: usize,
        rounds: usize,
    ) -> Self {
        Self {
            epsilon_total,
            delta,
            dataset_size,
            first_batch,
            batch_size,
            epochs,
            rounds,
            n_select_rounds: 0,
            epsilon_select: DEFAULT_SELECT_FRACTION * epsilon_total,
        }
    }

    pub fn with_selection_rounds(mut self, n: usize) -> Self {
        self.n_select_rounds = n;
        self
    }

    pub fn with_epsilon_select(mut self, epsilon_select: f64) -> Self {
        self.epsilon_select = epsilon_select;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dataset_size;
        if !(self.epsilon_total > 0.0) {
            return Err(invalid(format!("epsilon must be positive, got {}", self.epsilon_total)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if n == 0 {
            return Err(invalid("dataset size must be positive"));
        }
        for (name, b) in [("first-round batch", self.first_batch), ("batch", self.batch_size)] {
            if b == 0 || b > n {
                return Err(invalid(format!("{name} size {b} outside 1..={n}")));
            }
        }
        if self.epochs == 0 || self.rounds == 0 {
            return Err(invalid("epochs and rounds must be positive"));
        }
        if self.n_select_rounds > 0 && !(self.epsilon_select > 0.0) {
            return Err(invalid("selection rounds need a positive selection budget"));
        }
        Ok(())
    }

    pub fn steps_per_round(&self, batch: usize) -> usize {
        self.epochs * self.dataset_size.div_ceil(batch)
    }
}

/// Unit RDP curves of one plan at a fixed noise multiplier, used to report the
/// cumulative spend after any prefix of a run.
#[derive(Debug, Clone)]
pub struct PrivacyLedger {
    delta: f64,
    first_round: RdpCurve,
    later_round: RdpCurve,
    selection: Option<RdpCurve>,
}

impl PrivacyLedger {
    pub fn new(plan: &TrainingPrivacyPlan, z: f64) -> Result<Self> {
        plan.validate()?;
        let orders = default_orders();
        let n = plan.dataset_size as f64;
        let first = rdp_subsampled_gaussian(plan.first_batch as f64 / n, z, &orders)?
            .scaled(plan.steps_per_round(plan.first_batch) as f64);
        let later = rdp_subsampled_gaussian(plan.batch_size as f64 / n, z, &orders)?
            .scaled(plan.steps_per_round(plan.batch_size) as f64);
        let selection = if plan.n_select_rounds > 0 {
            Some(rdp_exponential_mechanism(plan.epsilon_select, &orders)?)
        } else {
            None
        };
        Ok(Self {
            delta: plan.delta,
            first_round: first,
            later_round: later,
            selection,
        })
    }

    /// `ε` at the plan's `δ` after `rounds` training rounds (the first one at
    /// the first-round batch size) and `selections` private selections.
    pub fn spent(&self, rounds: usize, selections: usize) -> Result<f64> {
        if rounds == 0 && selections == 0 {
            return Ok(0.0);
        }
        let mut total = RdpCurve::zero(self.first_round.orders());
        if rounds > 0 {
            total = total
                .compose(&self.first_round)?
                .compose(&self.later_round.scaled((rounds - 1) as f64))?;
        }
        if selections > 0 {
            let sel = self
                .selection
                .as_ref()
                .ok_or_else(|| invalid("plan has no selection budget"))?;
            total = total.compose(&sel.scaled(selections as f64))?;
        }
        rdp_to_dp(&total, self.delta)
    }
}

/// Total `ε` at `plan.delta` spent by a full run at noise multiplier `z`.
pub fn account_training(plan: &TrainingPrivacyPlan, z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(invalid(format!("noise multiplier must be positive, got {z}")));
    }
    PrivacyLedger::new(plan, z)?.spent(plan.rounds, plan.n_select_rounds)
}

fn selection_only(plan: &TrainingPrivacyPlan) -> Result<f64> {
    if plan.n_select_rounds == 0 {
        return Ok(0.0);
    }
    let orders = default_orders();
    let sel = rdp_exponential_mechanism(plan.epsilon_select, &orders)?
        .scaled(plan.n_select_rounds as f64);
    rdp_to_dp(&sel, plan.delta)
}

/// Smallest noise multiplier in `[Z_SEARCH_MIN, Z_SEARCH_MAX]` whose total
/// spend stays within `plan.epsilon_total`, found by log-scale bisection.
pub fn calibrate_noise_scale(plan: &TrainingPrivacyPlan) -> Result<f64> {
    plan.validate()?;
    let target = plan.epsilon_total;
    let overhead = selection_only(plan)?;
    if overhead >= target {
        return Err(Error::Calibration(format!(
            "private selection alone costs ε = {overhead:.4} >= budget {target}"
        )));
    }
    if account_training(plan, Z_SEARCH_MAX)? > target {
        return Err(Error::Calibration(format!(
            "budget ε = {target} not reachable with noise multiplier <= {Z_SEARCH_MAX}"
        )));
    }
    if account_training(plan, Z_SEARCH_MIN)? <= target {
        return Ok(Z_SEARCH_MIN);
    }
    let (mut lo, mut hi) = (Z_SEARCH_MIN.ln(), Z_SEARCH_MAX.ln());
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if account_training(plan, mid.exp())? <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan() -> TrainingPrivacyPlan {
        TrainingPrivacyPlan::new(5.0, 1e-4, 1600, 1600, 32, 1, 200)
    }

    #[test]
    fn round_trip_lands_in_band() {
        for eps in [3.0, 5.0, 15.0] {
            let p = TrainingPrivacyPlan { epsilon_total: eps, ..plan() }.with_selection_rounds(20);
            let p = p.with_epsilon_select(0.03 * eps);
            let z = calibrate_noise_scale(&p).unwrap();
            let spent = account_training(&p, z).unwrap();
            assert!(spent <= eps && spent >= 0.99 * eps, "eps {eps}: spent {spent} at z {z}");
        }
    }

    #[test]
    fn infinite_noise_spends_almost_nothing() {
        let e = account_training(&plan(), 1e6).unwrap();
        assert!(e < 0.02, "{e}");
    }

    #[test]
    fn spend_is_monotone_in_noise() {
        let mut prev = f64::INFINITY;
        for z in [0.5, 0.8, 1.0, 1.5, 3.0, 10.0] {
            let e = account_training(&plan(), z).unwrap();
            assert!(e <= prev);
            prev = e;
        }
    }

    #[test]
    fn calibration_monotone_in_budget_and_batch() {
        let z5 = calibrate_noise_scale(&plan()).unwrap();
        let z3 = calibrate_noise_scale(&TrainingPrivacyPlan { epsilon_total: 3.0, ..plan() }).unwrap();
        assert!(z3 > z5);
        let z64 = calibrate_noise_scale(&TrainingPrivacyPlan { batch_size: 64, ..plan() }).unwrap();
        assert!(z64 > z5);
    }

    #[test]
    fn infeasible_selection_overhead() {
        let p = plan().with_selection_rounds(1000).with_epsilon_select(1.0);
        assert!(matches!(calibrate_noise_scale(&p), Err(Error::Calibration(_))));
    }

    #[test]
    fn calibration_is_deterministic() {
        assert_eq!(calibrate_noise_scale(&plan()).unwrap(), calibrate_noise_scale(&plan()).unwrap());
    }

    #[test]
    fn ledger_prefix_matches_full_account() {
        let p = plan().with_selection_rounds(20);
        let z = 1.3;
        let ledger = PrivacyLedger::new(&p, z).unwrap();
        assert_eq!(ledger.spent(200, 20).unwrap(), account_training(&p, z).unwrap());
        assert!(ledger.spent(10, 0).unwrap() < ledger.spent(11, 0).unwrap());
        assert_eq!(ledger.spent(0, 0).unwrap(), 0.0);
    }

    #[test]
    fn invalid_plans_rejected() {
        assert!(TrainingPrivacyPlan { first_batch: 0, ..plan() }.validate().is_err());
        assert!(TrainingPrivacyPlan { batch_size: 1601, ..plan() }.validate().is_err());
        assert!(TrainingPrivacyPlan { delta: 1.0, ..plan() }.validate().is_err());
        assert!(account_training(&plan(), 0.0).is_err());
    }
}
