use crate::mathcore::{sample_gaussian, ParamVector, RngStream};

use super::predictor::{argmax, log_softmax_in_place, Predictor};

/// One-hidden-layer perceptron with tanh activation.
///
/// Layout: `W1 (h×d)`, `b1 (h)`, `W2 (C×h)`, `b2 (C)`.
#[derive(Debug, Clone)]
pub struct Mlp {
    dim: usize,
    hidden: usize,
    classes: usize,
}

struct Forward {
    hidden: Vec<f64>,
    log_probs: Vec<f64>,
}

impl Mlp {
    pub fn new(dim: usize, hidden: usize, classes: usize) -> Self {
        Self {
            dim,
            hidden,
            classes,
        }
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let w1 = self.hidden * self.dim;
        let b1 = w1 + self.hidden;
        let w2 = b1 + self.classes * self.hidden;
        (w1, b1, w2)
    }

    fn forward(&self, params: &[f64], x: &[f64]) -> Forward {
        let (o_b1, o_w2, o_b2) = self.offsets();
        let w1 = &params[..o_b1];
        let b1 = &params[o_b1..o_w2];
        let w2 = &params[o_w2..o_b2];
        let b2 = &params[o_b2..];
        let hidden: Vec<f64> = (0..self.hidden)
            .map(|j| {
                let row = &w1[j * self.dim..(j + 1) * self.dim];
                (b1[j] + row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>()).tanh()
            })
            .collect();
        let mut log_probs: Vec<f64> = (0..self.classes)
            .map(|c| {
                let row = &w2[c * self.hidden..(c + 1) * self.hidden];
                b2[c] + row.iter().zip(&hidden).map(|(a, v)| a * v).sum::<f64>()
            })
            .collect();
        log_softmax_in_place(&mut log_probs);
        Forward { hidden, log_probs }
    }
}

impl Predictor for Mlp {
    fn param_dim(&self) -> usize {
        self.hidden * (self.dim + 1) + self.classes * (self.hidden + 1)
    }

    fn init_params(&self, stream: &mut RngStream) -> ParamVector {
        let (o_b1, o_w2, o_b2) = self.offsets();
        let mut p = vec![0.0; self.param_dim()];
        let s1 = (1.0 / self.dim as f64).sqrt();
        let s2 = (1.0 / self.hidden as f64).sqrt();
        for v in &mut p[..o_b1] {
            *v = s1 * sample_gaussian(stream);
        }
        for v in &mut p[o_w2..o_b2] {
            *v = s2 * sample_gaussian(stream);
        }
        ParamVector::from_vec_unchecked(p)
    }

    fn per_sample_gradient_into(&self, params: &[f64], x: &[f64], y: usize, out: &mut [f64]) {
        let (o_b1, o_w2, o_b2) = self.offsets();
        let f = self.forward(params, x);
        let w2 = &params[o_w2..o_b2];
        // dL/dlogits
        let delta_out: Vec<f64> = f
            .log_probs
            .iter()
            .enumerate()
            .map(|(c, lp)| lp.exp() - if c == y { 1.0 } else { 0.0 })
            .collect();
        let mut delta_hidden = vec![0.0; self.hidden];
        for (c, &d) in delta_out.iter().enumerate() {
            let row = &w2[c * self.hidden..(c + 1) * self.hidden];
            for (j, &a) in row.iter().enumerate() {
                delta_hidden[j] += d * a;
            }
        }
        for (j, dh) in delta_hidden.iter_mut().enumerate() {
            *dh *= 1.0 - f.hidden[j] * f.hidden[j];
        }
        let (gw1, rest) = out.split_at_mut(o_b1);
        let (gb1, rest) = rest.split_at_mut(self.hidden);
        let (gw2, gb2) = rest.split_at_mut(self.classes * self.hidden);
        for j in 0..self.hidden {
            gb1[j] = delta_hidden[j];
            for (g, v) in gw1[j * self.dim..(j + 1) * self.dim].iter_mut().zip(x) {
                *g = delta_hidden[j] * v;
            }
        }
        for c in 0..self.classes {
            gb2[c] = delta_out[c];
            for (g, h) in gw2[c * self.hidden..(c + 1) * self.hidden].iter_mut().zip(&f.hidden) {
                *g = delta_out[c] * h;
            }
        }
    }

    fn sample_loss(&self, params: &[f64], x: &[f64], y: usize) -> f64 {
        -self.forward(params, x).log_probs[y]
    }

    fn predict(&self, params: &[f64], x: &[f64]) -> usize {
        argmax(&self.forward(params, x).log_probs)
    }
}
