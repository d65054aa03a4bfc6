use crate::mathcore::{ParamVector, RngStream};

use super::predictor::{argmax, log_softmax_in_place, Predictor};

/// Multinomial logistic regression. Parameters are the `C×d` weight matrix
/// (row-major) followed by `C` biases; `θ^init` is zero.
#[derive(Debug, Clone)]
pub struct LogisticRegression {
    dim: usize,
    classes: usize,
}

impl LogisticRegression {
    pub fn new(dim: usize, classes: usize) -> Self {
        Self { dim, classes }
    }

    fn logits(&self, params: &[f64], x: &[f64], out: &mut [f64]) {
        let (w, b) = params.split_at(self.classes * self.dim);
        for (c, o) in out.iter_mut().enumerate() {
            let row = &w[c * self.dim..(c + 1) * self.dim];
            *o = b[c] + row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
        }
    }
}

impl Predictor for LogisticRegression {
    fn param_dim(&self) -> usize {
        self.classes * (self.dim + 1)
    }

    fn init_params(&self, _stream: &mut RngStream) -> ParamVector {
        ParamVector::zeros(self.param_dim())
    }

    fn per_sample_gradient_into(&self, params: &[f64], x: &[f64], y: usize, out: &mut [f64]) {
        let mut probs = vec![0.0; self.classes];
        self.logits(params, x, &mut probs);
        log_softmax_in_place(&mut probs);
        let (gw, gb) = out.split_at_mut(self.classes * self.dim);
        for c in 0..self.classes {
            let r = probs[c].exp() - if c == y { 1.0 } else { 0.0 };
            gb[c] = r;
            for (g, v) in gw[c * self.dim..(c + 1) * self.dim].iter_mut().zip(x) {
                *g = r * v;
            }
        }
    }

    fn sample_loss(&self, params: &[f64], x: &[f64], y: usize) -> f64 {
        let mut l = vec![0.0; self.classes];
        self.logits(params, x, &mut l);
        log_softmax_in_place(&mut l);
        -l[y]
    }

    fn predict(&self, params: &[f64], x: &[f64]) -> usize {
        let mut l = vec![0.0; self.classes];
        self.logits(params, x, &mut l);
        argmax(&l)
    }
}
