use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::mathcore::{ParamVector, RngStream};

use super::{LogisticRegression, Mlp};

/// A differentiable classifier over flat parameter vectors.
pub trait Predictor: Send + Sync {
    fn param_dim(&self) -> usize;

    /// `θ^init`. Deterministic given the stream.
    fn init_params(&self, stream: &mut RngStream) -> ParamVector;

    /// Writes the gradient of the per-sample loss into `out` (overwriting it).
    fn per_sample_gradient_into(&self, params: &[f64], x: &[f64], y: usize, out: &mut [f64]);

    fn sample_loss(&self, params: &[f64], x: &[f64], y: usize) -> f64;

    fn predict(&self, params: &[f64], x: &[f64]) -> usize;

    fn per_sample_gradient(&self, params: &ParamVector, x: &[f64], y: usize) -> ParamVector {
        let mut out = vec![0.0; self.param_dim()];
        self.per_sample_gradient_into(params.as_slice(), x, y, &mut out);
        ParamVector::from_vec_unchecked(out)
    }

    /// Mean cross-entropy over `data`.
    fn loss(&self, params: &ParamVector, data: &Dataset) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        data.iter()
            .map(|(x, y)| self.sample_loss(params.as_slice(), x, y))
            .sum::<f64>()
            / data.len() as f64
    }

    /// Fraction of correctly classified rows.
    fn accuracy(&self, params: &ParamVector, data: &Dataset) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let hits = data
            .iter()
            .filter(|&(x, y)| self.predict(params.as_slice(), x) == y)
            .count();
        hits as f64 / data.len() as f64
    }

    /// `∇f(θ)`, the exact full-data gradient without clipping or noise.
    fn full_gradient(&self, params: &ParamVector, data: &Dataset) -> ParamVector {
        let p = self.param_dim();
        let mut acc = vec![0.0; p];
        let mut g = vec![0.0; p];
        for (x, y) in data.iter() {
            self.per_sample_gradient_into(params.as_slice(), x, y, &mut g);
            acc.iter_mut().zip(&g).for_each(|(a, v)| *a += v);
        }
        let n = data.len().max(1) as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        ParamVector::from_vec_unchecked(acc)
    }
}

/// Serializable choice of predictor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Logistic,
    Mlp { hidden: usize },
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Logistic
    }
}

impl ModelSpec {
    pub fn build(&self, dim: usize, classes: usize) -> Box<dyn Predictor> {
        match *self {
            ModelSpec::Logistic => Box::new(LogisticRegression::new(dim, classes)),
            ModelSpec::Mlp { hidden } => Box::new(Mlp::new(dim, hidden, classes)),
        }
    }
}

pub(crate) fn log_softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter_mut().for_each(|l| *l -= lse);
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate() {
        if v > xs[best] {
            best = i;
        }
    }
    best
}
