use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clustering::GmmOptions;
use crate::error::{invalid, Error, Result};
use crate::privacy::{DEFAULT_DELTA, DEFAULT_SELECT_FRACTION};
use crate::trainer::ModelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Rdpcfl,
    Ifca,
    Global,
    Local,
    Mrmtl,
    Oracle,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Rdpcfl,
        Algorithm::Ifca,
        Algorithm::Global,
        Algorithm::Local,
        Algorithm::Mrmtl,
        Algorithm::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Rdpcfl => "rdpcfl",
            Algorithm::Ifca => "ifca",
            Algorithm::Global => "global",
            Algorithm::Local => "local",
            Algorithm::Mrmtl => "mrmtl",
            Algorithm::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

/// First-round batch size: the whole local dataset or a fixed value.
/// Serialized as `"full"` or a number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "serde_json::Value", try_from = "serde_json::Value")]
pub enum FirstBatch {
    Full,
    Size(usize),
}

impl FirstBatch {
    pub fn resolve(self, dataset_size: usize) -> usize {
        match self {
            FirstBatch::Full => dataset_size,
            FirstBatch::Size(b) => b,
        }
    }
}

impl From<FirstBatch> for serde_json::Value {
    fn from(b: FirstBatch) -> Self {
        match b {
            FirstBatch::Full => "full".into(),
            FirstBatch::Size(n) => n.into(),
        }
    }
}

impl TryFrom<serde_json::Value> for FirstBatch {
    type Error = String;

    fn try_from(v: serde_json::Value) -> std::result::Result<Self, String> {
        match &v {
            serde_json::Value::String(s) if s == "full" => Ok(FirstBatch::Full),
            serde_json::Value::Number(n) => n
                .as_u64()
                .map(|n| FirstBatch::Size(n as usize))
                .ok_or_else(|| format!("invalid batch size {n}")),
            _ => Err(format!("expected \"full\" or a batch size, got {v}")),
        }
    }
}

impl FromStr for FirstBatch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "full" {
            return Ok(FirstBatch::Full);
        }
        s.parse()
            .map(FirstBatch::Size)
            .map_err(|_| Error::Config(format!("expected \"full\" or a batch size, got {s:?}")))
    }
}

/// Number of clusters: chosen from the candidates by maximum MSS, or fixed.
/// Serialized as `"auto"` or a number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "serde_json::Value", try_from = "serde_json::Value")]
pub enum ClusterCount {
    Auto,
    Fixed(usize),
}

impl From<ClusterCount> for serde_json::Value {
    fn from(c: ClusterCount) -> Self {
        match c {
            ClusterCount::Auto => "auto".into(),
            ClusterCount::Fixed(n) => n.into(),
        }
    }
}

impl TryFrom<serde_json::Value> for ClusterCount {
    type Error = String;

    fn try_from(v: serde_json::Value) -> std::result::Result<Self, String> {
        match &v {
            serde_json::Value::String(s) if s == "auto" => Ok(ClusterCount::Auto),
            serde_json::Value::Number(n) => n
                .as_u64()
                .map(|n| ClusterCount::Fixed(n as usize))
                .ok_or_else(|| format!("invalid cluster count {n}")),
            _ => Err(format!("expected \"auto\" or a cluster count, got {v}")),
        }
    }
}

impl FromStr for ClusterCount {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(ClusterCount::Auto);
        }
        s.parse()
            .map(ClusterCount::Fixed)
            .map_err(|_| Error::Config(format!("expected \"auto\" or a cluster count, got {s:?}")))
    }
}

/// Everything a federated run needs besides the data and the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FederationConfig {
    pub algorithm: Algorithm,
    pub model: ModelSpec,
    pub epsilon: f64,
    pub delta: f64,
    /// `E`
    pub rounds: usize,
    /// `K`
    pub local_epochs: usize,
    pub learning_rate: f64,
    pub clip_norm: f64,
    /// `b¹`, used by R-DPCFL only; the baselines train with `batch_size`
    /// from the first round on.
    pub first_batch: FirstBatch,
    /// `b^{>1}`
    pub batch_size: usize,
    pub num_clusters: ClusterCount,
    pub cluster_candidates: Vec<usize>,
    /// Share of `ε` given to each private cluster selection.
    pub select_fraction: f64,
    /// MR-MTL regularisation strength.
    pub lambda: f64,
    pub gmm: GmmOptions,
    /// Let every client contribute to every cluster in proportion to its
    /// responsibilities during soft clustering instead of sampling one.
    pub soft_weighting: bool,
    /// Replace private selection with a plain argmin of local training loss.
    /// Breaks the privacy guarantee; for diagnostics only.
    pub nonprivate_selection: bool,
}

impl Default for FederationConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Rdpcfl,
            model: ModelSpec::Logistic,
            epsilon: 5.0,
            delta: DEFAULT_DELTA,
            rounds: 200,
            local_epochs: 1,
            learning_rate: 0.1,
            clip_norm: 1.0,
            first_batch: FirstBatch::Full,
            batch_size: 32,
            num_clusters: ClusterCount::Auto,
            cluster_candidates: (2..=8).collect(),
            select_fraction: DEFAULT_SELECT_FRACTION,
            lambda: 1.0,
            gmm: GmmOptions::default(),
            soft_weighting: false,
            nonprivate_selection: false,
        }
    }
}

impl FederationConfig {
    /// Rounds of private selection: `⌊E/10⌋`.
    pub fn selection_window(&self) -> usize {
        self.rounds / 10
    }

    pub fn epsilon_select(&self) -> f64 {
        self.select_fraction * self.epsilon
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.rounds < 2 {
            return Err(invalid("need at least 2 rounds"));
        }
        if self.local_epochs == 0 || self.batch_size == 0 {
            return Err(invalid("local epochs and batch size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning rate must be positive"));
        }
        if !(self.clip_norm > 0.0 && self.clip_norm.is_finite()) {
            return Err(invalid("clipping threshold must be positive and finite"));
        }
        if self.first_batch == FirstBatch::Size(0) {
            return Err(invalid("first-round batch size must be positive"));
        }
        if self.num_clusters == ClusterCount::Fixed(0) {
            return Err(invalid("cluster count must be positive"));
        }
        if self.num_clusters == ClusterCount::Auto
            && (self.cluster_candidates.is_empty() || self.cluster_candidates.contains(&0))
        {
            return Err(invalid("automatic cluster count needs positive candidates"));
        }
        if !(self.select_fraction > 0.0 && self.select_fraction < 1.0) {
            return Err(invalid("selection fraction must lie in (0, 1)"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid("lambda must be non-negative"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keyword_or_number_fields() {
        let cfg: FederationConfig =
            serde_json::from_str(r#"{"first_batch": 64, "num_clusters": "auto"}"#).unwrap();
        assert_eq!(cfg.first_batch, FirstBatch::Size(64));
        assert_eq!(cfg.num_clusters, ClusterCount::Auto);
        let text = serde_json::to_string(&FederationConfig::default()).unwrap();
        assert!(text.contains(r#""first_batch":"full""#));
        let back: FederationConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, FederationConfig::default());
        assert!(serde_json::from_str::<FederationConfig>(r#"{"first_batch": "half"}"#).is_err());
        assert!(serde_json::from_str::<FederationConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("fedavg".parse::<Algorithm>().is_err());
    }

    #[test]
    fn defaults() {
        let c = FederationConfig::default();
        assert_eq!(c.selection_window(), 20);
        assert!((c.epsilon_select() - 0.15).abs() < 1e-15);
        c.validate().unwrap();
    }
}
