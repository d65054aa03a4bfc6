use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mathcore::{ParamVector, RngStream};

/// Lower bound on each component's per-coordinate variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum VarianceFloor {
    Absolute(f64),
    /// Multiple of the data's overall per-coordinate variance. Model updates
    /// can be many orders of magnitude below unit scale, so a fixed absolute
    /// floor would swamp the fitted variances.
    Relative(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmOptions {
    pub max_iter: usize,
    /// Stop once the relative log-likelihood change falls below this.
    pub tol: f64,
    /// k-means++ restarts; the best final log-likelihood is kept.
    pub n_init: usize,
    pub variance_floor: VarianceFloor,
}

impl Default for GmmOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-6,
            n_init: 3,
            variance_floor: VarianceFloor::Relative(1e-6),
        }
    }
}

/// A fitted spherical mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmFit {
    pub means: Vec<ParamVector>,
    /// `v̂_m`: every component's covariance is `v̂_m·I`.
    pub per_coord_vars: Vec<f64>,
    pub weights: Vec<f64>,
    /// `π_i`, one row per input point.
    pub responsibilities: Vec<Vec<f64>>,
    pub em_iterations: usize,
    pub log_likelihood: f64,
    /// Log-likelihood after initialisation and after every EM iteration.
    pub log_likelihood_trace: Vec<f64>,
}

impl GmmFit {
    pub fn n_components(&self) -> usize {
        self.means.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, ParamVector::len)
    }

    /// Most responsible component per point (lowest index on ties).
    pub fn hard_assignments(&self) -> Vec<usize> {
        self.responsibilities
            .iter()
            .map(|row| {
                let mut best = 0;
                for (m, &r) in row.iter().enumerate() {
                    if r > row[best] {
                        best = m;
                    }
                }
                best
            })
            .collect()
    }
}

/// Fits an `m`-component spherical GMM by EM with k-means++ seeding.
pub fn fit_gmm(
    updates: &[ParamVector],
    m: usize,
    opts: &GmmOptions,
    stream: &mut RngStream,
) -> Result<GmmFit> {
    let n = updates.len();
    if m == 0 {
        return Err(invalid("number of components must be positive"));
    }
    if n < m {
        return Err(invalid(format!("cannot fit {m} components to {n} points")));
    }
    let p = updates[0].len();
    if p == 0 {
        return Err(invalid("points must have positive dimension"));
    }
    for u in updates {
        u.check_dim(p)?;
    }
    if opts.n_init == 0 || opts.max_iter == 0 {
        return Err(invalid("n_init and max_iter must be positive"));
    }
    let points: Vec<&[f64]> = updates.iter().map(ParamVector::as_slice).collect();
    let floor = variance_floor(&points, opts.variance_floor);

    let mut best: Option<GmmFit> = None;
    for _ in 0..opts.n_init {
        let fit = run_em(&points, m, floor, opts, stream);
        if best.as_ref().is_none_or(|b| fit.log_likelihood > b.log_likelihood) {
            best = Some(fit);
        }
    }
    Ok(best.expect("n_init >= 1"))
}

fn variance_floor(points: &[&[f64]], floor: VarianceFloor) -> f64 {
    match floor {
        VarianceFloor::Absolute(v) => v.max(f64::MIN_POSITIVE),
        VarianceFloor::Relative(r) => {
            let n = points.len() as f64;
            let p = points[0].len();
            let mut total = 0.0;
            for d in 0..p {
                let mean = points.iter().map(|x| x[d]).sum::<f64>() / n;
                total += points.iter().map(|x| (x[d] - mean).powi(2)).sum::<f64>();
            }
            (r * total / (n * p as f64)).max(1e-300)
        }
    }
}

struct Params {
    means: Vec<Vec<f64>>,
    vars: Vec<f64>,
    weights: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kmeans_pp(points: &[&[f64]], m: usize, stream: &mut RngStream) -> Vec<usize> {
    let n = points.len();
    let mut centers = vec![stream.random_range(0..n)];
    let mut d2: Vec<f64> = points.iter().map(|x| sq_dist(x, points[centers[0]])).collect();
    while centers.len() < m {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = stream.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        } else {
            stream.random_range(0..n)
        };
        centers.push(next);
        for (i, x) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(x, points[next]));
        }
    }
    // Hard labels: nearest centre, lowest index on ties.
    points
        .iter()
        .map(|x| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (k, &c) in centers.iter().enumerate() {
                let d = sq_dist(x, points[c]);
                if d < best_d {
                    best_d = d;
                    best = k;
                }
            }
            best
        })
        .collect()
}

fn m_step(points: &[&[f64]], resp: &[Vec<f64>], m: usize, floor: f64) -> Params {
    let p = points[0].len();
    let nk: Vec<f64> = (0..m)
        .map(|k| resp.iter().map(|r| r[k]).sum::<f64>() + 10.0 * f64::EPSILON)
        .collect();
    let total: f64 = nk.iter().sum();
    let mut means = vec![vec![0.0; p]; m];
    for (x, r) in points.iter().zip(resp) {
        for k in 0..m {
            if r[k] == 0.0 {
                continue;
            }
            for (mu, v) in means[k].iter_mut().zip(x.iter()) {
                *mu += r[k] * v;
            }
        }
    }
    for k in 0..m {
        means[k].iter_mut().for_each(|mu| *mu /= nk[k]);
    }
    let vars = (0..m)
        .map(|k| {
            let ss: f64 = points
                .iter()
                .zip(resp)
                .map(|(x, r)| r[k] * sq_dist(x, &means[k]))
                .sum();
            (ss / (p as f64 * nk[k])).max(floor)
        })
        .collect();
    Params {
        means,
        vars,
        weights: nk.iter().map(|v| v / total).collect(),
    }
}

// Returns the total log-likelihood and fills `resp`.
fn e_step(points: &[&[f64]], params: &Params, resp: &mut [Vec<f64>]) -> f64 {
    let p = points[0].len() as f64;
    let m = params.means.len();
    let log_norm: Vec<f64> = (0..m)
        .map(|k| {
            params.weights[k].ln() - 0.5 * p * (2.0 * std::f64::consts::PI * params.vars[k]).ln()
        })
        .collect();
    let mut ll = NeumaierSum::default();
    let mut lp = vec![0.0; m];
    for (x, r) in points.iter().zip(resp.iter_mut()) {
        for k in 0..m {
            lp[k] = log_norm[k] - sq_dist(x, &params.means[k]) / (2.0 * params.vars[k]);
        }
        let max = lp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + lp.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        for k in 0..m {
            r[k] = (lp[k] - lse).exp();
        }
        let s: f64 = r.iter().sum();
        r.iter_mut().for_each(|v| *v /= s);
        ll.add(lse);
    }
    ll.total()
}

fn run_em(points: &[&[f64]], m: usize, floor: f64, opts: &GmmOptions, stream: &mut RngStream) -> GmmFit {
    let labels = kmeans_pp(points, m, stream);
    let mut resp: Vec<Vec<f64>> = labels
        .iter()
        .map(|&l| (0..m).map(|k| if k == l { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut params = m_step(points, &resp, m, floor);
    let mut ll = e_step(points, &params, &mut resp);
    let mut trace = vec![ll];
    let mut iterations = 0;
    for it in 1..=opts.max_iter {
        params = m_step(points, &resp, m, floor);
        let next = e_step(points, &params, &mut resp);
        debug_assert!(
            next >= ll - 1e-9 * ll.abs().max(1.0),
            "EM log-likelihood decreased: {ll} -> {next}"
        );
        trace.push(next);
        iterations = it;
        let converged = (next - ll).abs() <= opts.tol * ll.abs();
        ll = next;
        if converged {
            break;
        }
    }
    GmmFit {
        means: params
            .means
            .into_iter()
            .map(ParamVector::from_vec_unchecked)
            .collect(),
        per_coord_vars: params.vars,
        weights: params.weights,
        responsibilities: resp,
        em_iterations: iterations,
        log_likelihood: ll,
        log_likelihood_trace: trace,
    }
}

#[derive(Default)]
struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathcore::{derive_stream, sample_gaussian, Party, StreamTag};

    fn stream(seed: u64) -> RngStream {
        derive_stream(seed, Party::Server, 1, StreamTag::GmmInit)
    }

    fn blobs(seed: u64, centers: &[Vec<f64>], per: usize, sd: f64) -> (Vec<ParamVector>, Vec<usize>) {
        let mut s = derive_stream(seed, Party::Server, 0, StreamTag::DataGen);
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for (k, c) in centers.iter().enumerate() {
            for _ in 0..per {
                let v = c.iter().map(|&m| m + sd * sample_gaussian(&mut s)).collect();
                pts.push(ParamVector::from_vec(v).unwrap());
                labels.push(k);
            }
        }
        (pts, labels)
    }

    #[test]
    fn degenerate_clusters_recovered_exactly() {
        let locs = [vec![0.0, 0.0, 0.0], vec![5.0, 0.0, 1.0], vec![0.0, -4.0, 2.0]];
        let pts: Vec<ParamVector> = locs
            .iter()
            .flat_map(|l| std::iter::repeat_n(ParamVector::from_vec(l.clone()).unwrap(), 4))
            .collect();
        let fit = fit_gmm(&pts, 3, &GmmOptions::default(), &mut stream(1)).unwrap();
        let floor = variance_floor(
            &pts.iter().map(ParamVector::as_slice).collect::<Vec<_>>(),
            VarianceFloor::Relative(1e-6),
        );
        for loc in &locs {
            let hit = fit
                .means
                .iter()
                .any(|mu| mu.as_slice().iter().zip(loc).all(|(a, b)| (a - b).abs() < 1e-9));
            assert!(hit, "location {loc:?} not recovered");
        }
        for &v in &fit.per_coord_vars {
            assert_eq!(v, floor);
        }
    }

    #[test]
    fn rows_and_weights_normalised_and_ascent_holds() {
        let centers = vec![vec![0.0; 6], vec![3.0; 6], vec![-3.0, 3.0, -3.0, 3.0, -3.0, 3.0]];
        let (pts, _) = blobs(3, &centers, 10, 1.5);
        for seed in 0..10 {
            let fit = fit_gmm(&pts, 3, &GmmOptions::default(), &mut stream(seed)).unwrap();
            assert!((fit.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for row in &fit.responsibilities {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
            for w in fit.log_likelihood_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
            }
            assert!(fit.per_coord_vars.iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn too_few_points() {
        let pts = vec![ParamVector::zeros(2); 2];
        assert!(fit_gmm(&pts, 3, &GmmOptions::default(), &mut stream(0)).is_err());
        assert!(fit_gmm(&pts, 0, &GmmOptions::default(), &mut stream(0)).is_err());
    }

    #[test]
    fn deterministic_given_stream() {
        let (pts, _) = blobs(9, &[vec![0.0; 4], vec![2.0; 4]], 8, 1.0);
        let a = fit_gmm(&pts, 2, &GmmOptions::default(), &mut stream(4)).unwrap();
        let b = fit_gmm(&pts, 2, &GmmOptions::default(), &mut stream(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn neumaier_is_exact_on_cancellation() {
        let mut s = NeumaierSum::default();
        for v in [1e16, 1.0, -1e16, 1.0] {
            s.add(v);
        }
        assert_eq!(s.total(), 2.0);
    }
}
