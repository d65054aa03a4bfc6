use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Predictor;
use crate::data::Dataset;
use crate::error::{invalid, Result};
use crate::mathcore::{derive_stream, sample_gaussian, ParamVector, Party, RngStream, StreamTag};

/// Hyper-parameters of one call to local DPSGD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpsgdParams {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Per-sample L2 clipping threshold `c`; `f64::INFINITY` disables clipping.
    pub clip_norm: f64,
    /// Noise multiplier `z`; the noise standard deviation is `c·z`.
    pub noise_multiplier: f64,
}

impl DpsgdParams {
    pub fn sigma_dp(&self) -> f64 {
        if self.noise_multiplier == 0.0 {
            0.0
        } else {
            self.clip_norm * self.noise_multiplier
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.batch_size == 0 || self.batch_size > n {
            return Err(invalid(format!("batch size {} outside 1..={n}", self.batch_size)));
        }
        if self.epochs == 0 {
            return Err(invalid("epochs must be positive"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(invalid("learning rate must be positive"));
        }
        if !(self.clip_norm > 0.0) {
            return Err(invalid("clipping threshold must be positive"));
        }
        if !(self.noise_multiplier >= 0.0) || !self.sigma_dp().is_finite() {
            return Err(invalid("noise needs a finite clipping threshold and z >= 0"));
        }
        Ok(())
    }
}

/// Batch-order and noise streams for one client-round.
#[derive(Debug, Clone)]
pub struct DpsgdStreams {
    pub batches: RngStream,
    pub noise: RngStream,
}

impl DpsgdStreams {
    pub fn for_round(master_seed: u64, client: u32, round: u32) -> Self {
        Self {
            batches: derive_stream(master_seed, Party::Client(client), round, StreamTag::BatchSampling),
            noise: derive_stream(master_seed, Party::Client(client), round, StreamTag::DpNoise),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalTrainReport {
    /// `Δθ̃ = θ_final − θ_start`
    pub update: ParamVector,
    pub steps_taken: usize,
    pub start_params: ParamVector,
}

/// Scales `v` onto the ball of radius `c` if it lies outside; returns the
/// original norm.
pub fn clip_in_place(v: &mut [f64], c: f64) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > c {
        let s = c / norm;
        v.iter_mut().for_each(|x| *x *= s);
    }
    norm
}

pub fn clip(v: &ParamVector, c: f64) -> Result<ParamVector> {
    if !(c > 0.0) {
        return Err(invalid(format!("clipping threshold must be positive, got {c}")));
    }
    let mut out = v.clone();
    clip_in_place(out.as_mut_slice(), c);
    Ok(out)
}

struct Workspace {
    grad: Vec<f64>,
    acc: Vec<f64>,
}

impl Workspace {
    fn new(p: usize) -> Self {
        Self {
            grad: vec![0.0; p],
            acc: vec![0.0; p],
        }
    }
}

// (1/b)·[Σ_j clip(g_j, c) + N(0, σ²I)] written into `ws.acc`.
fn noisy_batch_gradient(
    predictor: &dyn Predictor,
    params: &[f64],
    data: &Dataset,
    batch: &[usize],
    clip_norm: f64,
    sigma_dp: f64,
    noise: &mut RngStream,
    ws: &mut Workspace,
) {
    ws.acc.iter_mut().for_each(|a| *a = 0.0);
    for &j in batch {
        let (x, y) = data.example(j);
        predictor.per_sample_gradient_into(params, x, y, &mut ws.grad);
        clip_in_place(&mut ws.grad, clip_norm);
        ws.acc.iter_mut().zip(&ws.grad).for_each(|(a, g)| *a += g);
    }
    if sigma_dp > 0.0 {
        ws.acc.iter_mut().for_each(|a| *a += sigma_dp * sample_gaussian(noise));
    }
    let inv_b = 1.0 / batch.len() as f64;
    ws.acc.iter_mut().for_each(|a| *a *= inv_b);
}

/// One DP noisy batch gradient over the rows `batch` of `data`.
pub fn dp_batch_gradient(
    predictor: &dyn Predictor,
    params: &ParamVector,
    data: &Dataset,
    batch: &[usize],
    clip_norm: f64,
    sigma_dp: f64,
    noise: &mut RngStream,
) -> Result<ParamVector> {
    if batch.is_empty() {
        return Err(invalid("empty batch"));
    }
    if !(clip_norm > 0.0) || !(sigma_dp >= 0.0) {
        return Err(invalid("need c > 0 and sigma_dp >= 0"));
    }
    params.check_dim(predictor.param_dim())?;
    let mut ws = Workspace::new(predictor.param_dim());
    noisy_batch_gradient(predictor, params.as_slice(), data, batch, clip_norm, sigma_dp, noise, &mut ws);
    Ok(ParamVector::from_vec_unchecked(ws.acc))
}

/// K epochs of DPSGD from `start`. Each epoch shuffles the data and walks it
/// in `⌈N/b⌉` batches of exactly `b` rows; the last batch is topped up from
/// the front of the same permutation.
pub fn dpsgd_local(
    predictor: &dyn Predictor,
    start: &ParamVector,
    data: &Dataset,
    params: &DpsgdParams,
    streams: &mut DpsgdStreams,
) -> Result<LocalTrainReport> {
    run_dpsgd(predictor, start, data, params, None, streams)
}

/// DPSGD on `f(θ) + (λ/2)‖θ − anchor‖²`. Only the data term is clipped and
/// noised; the proximal gradient `λ(θ − anchor)` is added afterwards.
pub fn dpsgd_local_proximal(
    predictor: &dyn Predictor,
    start: &ParamVector,
    data: &Dataset,
    params: &DpsgdParams,
    lambda: f64,
    anchor: &ParamVector,
    streams: &mut DpsgdStreams,
) -> Result<LocalTrainReport> {
    if !(lambda >= 0.0) {
        return Err(invalid(format!("lambda must be non-negative, got {lambda}")));
    }
    anchor.check_dim(start.len())?;
    run_dpsgd(predictor, start, data, params, Some((lambda, anchor)), streams)
}

fn run_dpsgd(
    predictor: &dyn Predictor,
    start: &ParamVector,
    data: &Dataset,
    params: &DpsgdParams,
    proximal: Option<(f64, &ParamVector)>,
    streams: &mut DpsgdStreams,
) -> Result<LocalTrainReport> {
    let n = data.len();
    params.validate(n)?;
    start.check_dim(predictor.param_dim())?;
    let b = params.batch_size;
    let sigma = params.sigma_dp();
    let batches_per_epoch = n.div_ceil(b);
    let mut theta = start.as_slice().to_vec();
    let mut ws = Workspace::new(theta.len());
    let mut order: Vec<usize> = (0..n).collect();
    let mut batch = Vec::with_capacity(b);
    let mut steps = 0;
    for _ in 0..params.epochs {
        order.shuffle(&mut streams.batches);
        for t in 0..batches_per_epoch {
            batch.clear();
            batch.extend((t * b..(t + 1) * b).map(|k| order[k % n]));
            noisy_batch_gradient(
                predictor,
                &theta,
                data,
                &batch,
                params.clip_norm,
                sigma,
                &mut streams.noise,
                &mut ws,
            );
            if let Some((lambda, anchor)) = proximal {
                for ((g, th), a) in ws.acc.iter_mut().zip(&theta).zip(anchor.as_slice()) {
                    *g += lambda * (th - a);
                }
            }
            for (th, g) in theta.iter_mut().zip(&ws.acc) {
                *th -= params.learning_rate * g;
            }
            steps += 1;
        }
    }
    let update: Vec<f64> = theta.iter().zip(start.as_slice()).map(|(a, s)| a - s).collect();
    Ok(LocalTrainReport {
        update: ParamVector::from_vec(update)
            .map_err(|_| invalid("local training diverged (non-finite parameters)"))?,
        steps_taken: steps,
        start_params: start.clone(),
    })
}

/// Predicted total variance of one round's model update:
/// `K·N·η²·p·c²·z² / b³`.
pub fn predicted_update_variance(
    epochs: usize,
    dataset_size: usize,
    learning_rate: f64,
    param_dim: usize,
    clip_norm: f64,
    noise_multiplier: f64,
    batch_size: usize,
) -> f64 {
    let b = batch_size as f64;
    epochs as f64
        * dataset_size as f64
        * learning_rate.powi(2)
        * param_dim as f64
        * clip_norm.powi(2)
        * noise_multiplier.powi(2)
        / (b * b * b)
}
