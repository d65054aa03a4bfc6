use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mathcore::{derive_stream, q_function, ParamVector, Party, StreamTag};

use super::gmm::{fit_gmm, GmmFit, GmmOptions};

/// Separation score between components `m` and `m2` of a fit: the distance
/// between their means over twice the pooled standard deviation.
pub fn separation_score(fit: &GmmFit, m: usize, m2: usize) -> Result<f64> {
    let k = fit.n_components();
    if m >= k || m2 >= k {
        return Err(invalid(format!("component index out of range for {k} components")));
    }
    if m == m2 {
        return Err(invalid("separation score needs two distinct components"));
    }
    let dist = fit.means[m].distance_sq(&fit.means[m2]).sqrt();
    let pooled = 0.5 * (fit.per_coord_vars[m] + fit.per_coord_vars[m2]);
    Ok(dist / (2.0 * pooled.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceReport {
    /// Symmetric matrix of separation scores; the diagonal is zero.
    pub pairwise_ss: Vec<Vec<f64>>,
    /// Minimum pairwise separation score (`+∞` for a single component).
    pub mss: f64,
    /// Maximum pairwise overlap, `2·Q(mss)`.
    pub mpo: f64,
}

pub fn confidence(fit: &GmmFit) -> ConfidenceReport {
    let k = fit.n_components();
    let mut pairwise_ss = vec![vec![0.0; k]; k];
    let mut mss = f64::INFINITY;
    for a in 0..k {
        for b in (a + 1)..k {
            let ss = separation_score(fit, a, b).expect("indices in range");
            pairwise_ss[a][b] = ss;
            pairwise_ss[b][a] = ss;
            mss = mss.min(ss);
        }
    }
    let mpo = if mss.is_infinite() { 0.0 } else { 2.0 * q_function(mss) };
    ConfidenceReport { pairwise_ss, mss, mpo }
}

/// Overlap of two equal-variance spherical Gaussians in `p` dimensions whose
/// means differ by `delta` per coordinate.
pub fn theoretical_overlap(delta: f64, sigma: f64, p: usize) -> Result<f64> {
    if !(delta >= 0.0 && delta.is_finite()) || !(sigma > 0.0 && sigma.is_finite()) || p == 0 {
        return Err(invalid("overlap needs delta >= 0, sigma > 0 and p >= 1"));
    }
    Ok(2.0 * q_function((p as f64).sqrt() * delta / (2.0 * sigma)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterCountSelection {
    pub num_clusters: usize,
    /// `(M, MSS)` for every candidate, in ascending `M`.
    pub scores: Vec<(usize, f64)>,
    /// Fit for the chosen `M`.
    pub fit: GmmFit,
    pub report: ConfidenceReport,
}

/// Fits one mixture per candidate count and keeps the one with the largest
/// minimum separation score; ties go to the smaller count. Candidates larger
/// than the number of points are skipped.
pub fn select_num_clusters(
    updates: &[ParamVector],
    candidates: &[usize],
    opts: &GmmOptions,
    master_seed: u64,
) -> Result<ClusterCountSelection> {
    let mut sorted: Vec<usize> = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    sorted.retain(|&m| m >= 1 && m <= updates.len());
    if sorted.is_empty() {
        return Err(invalid("no feasible cluster count among the candidates"));
    }
    let base = derive_stream(master_seed, Party::Server, 1, StreamTag::GmmInit);
    let mut scores = Vec::with_capacity(sorted.len());
    let mut best: Option<(GmmFit, ConfidenceReport)> = None;
    for &m in &sorted {
        let fit = fit_gmm(updates, m, opts, &mut base.substream(m as u64))?;
        let report = confidence(&fit);
        scores.push((m, report.mss));
        if best.as_ref().is_none_or(|(_, r)| report.mss > r.mss) {
            best = Some((fit, report));
        }
    }
    let (fit, report) = best.expect("at least one candidate");
    Ok(ClusterCountSelection {
        num_clusters: fit.n_components(),
        scores,
        fit,
        report,
    })
}

/// Last round of the soft-clustering stage: `max(1, ⌊(1 − mpo)·E/2⌋)`.
pub fn switch_round(mpo: f64, total_rounds: usize) -> usize {
    let mpo = mpo.clamp(0.0, 1.0);
    (((1.0 - mpo) * total_rounds as f64 / 2.0).floor() as usize).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit_with(means: Vec<Vec<f64>>, vars: Vec<f64>) -> GmmFit {
        let k = means.len();
        GmmFit {
            means: means.into_iter().map(|m| ParamVector::from_vec(m).unwrap()).collect(),
            per_coord_vars: vars,
            weights: vec![1.0 / k as f64; k],
            responsibilities: vec![],
            em_iterations: 0,
            log_likelihood: 0.0,
            log_likelihood_trace: vec![],
        }
    }

    #[test]
    fn separation_matches_hand_value() {
        let fit = fit_with(vec![vec![0.0, 0.0], vec![3.0, 4.0]], vec![1.0, 3.0]);
        // distance 5, pooled variance 2
        let ss = separation_score(&fit, 0, 1).unwrap();
        assert!((ss - 5.0 / (2.0 * 2f64.sqrt())).abs() < 1e-15);
        assert_eq!(ss, separation_score(&fit, 1, 0).unwrap());
        assert!(separation_score(&fit, 0, 0).is_err());
        assert!(separation_score(&fit, 0, 2).is_err());
    }

    #[test]
    fn single_component_is_fully_confident() {
        let r = confidence(&fit_with(vec![vec![1.0]], vec![1.0]));
        assert!(r.mss.is_infinite());
        assert_eq!(r.mpo, 0.0);
    }

    #[test]
    fn mss_is_minimum_pair() {
        let fit = fit_with(vec![vec![0.0], vec![2.0], vec![10.0]], vec![1.0; 3]);
        let r = confidence(&fit);
        assert!((r.mss - 1.0).abs() < 1e-15);
        assert!((r.mpo - 2.0 * q_function(1.0)).abs() < 1e-15);
        assert!((r.pairwise_ss[0][2] - 5.0).abs() < 1e-15);
    }

    #[test]
    fn overlap_limits() {
        assert!((theoretical_overlap(0.0, 1.0, 10).unwrap() - 1.0).abs() < 1e-15);
        assert!(theoretical_overlap(100.0, 1.0, 10).unwrap() < 1e-100);
        assert!(theoretical_overlap(1.0, 0.0, 1).is_err());
        assert!(theoretical_overlap(-1.0, 1.0, 1).is_err());
    }

    #[test]
    fn switch_round_values() {
        assert_eq!(switch_round(0.0, 200), 100);
        assert_eq!(switch_round(1.0, 200), 1);
        assert_eq!(switch_round(0.5, 200), 50);
        assert_eq!(switch_round(0.0, 2), 1);
        assert_eq!(switch_round(0.99, 50), 1);
    }
}
