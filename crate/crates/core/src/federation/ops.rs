use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mathcore::{sample_gumbel, ParamVector, RngStream};

/// One model per cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModels {
    pub params: Vec<ParamVector>,
    pub round: usize,
}

impl ClusterModels {
    /// `m` copies of `init`.
    pub fn uniform(init: &ParamVector, m: usize, round: usize) -> Self {
        Self {
            params: vec![init.clone(); m],
            round,
        }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }
}

/// Adds the mean update of each cluster's clients to that cluster's model.
/// Clusters nobody is assigned to are carried over unchanged.
pub fn aggregate_cluster(
    models: &ClusterModels,
    updates: &[ParamVector],
    assignments: &[usize],
) -> Result<ClusterModels> {
    if updates.len() != assignments.len() {
        return Err(invalid("one assignment per update required"));
    }
    let m = models.len();
    let mut counts = vec![0usize; m];
    for &a in assignments {
        if a >= m {
            return Err(invalid(format!("assignment {a} outside 0..{m}")));
        }
        counts[a] += 1;
    }
    let mut next = models.params.clone();
    for (u, &a) in updates.iter().zip(assignments) {
        next[a].axpy(1.0 / counts[a] as f64, u)?;
    }
    Ok(ClusterModels {
        params: next,
        round: models.round + 1,
    })
}

/// Fractional variant: client `i` contributes to cluster `m` with weight
/// `π_i[m] / Σ_j π_j[m]`.
pub fn aggregate_soft(
    models: &ClusterModels,
    updates: &[ParamVector],
    responsibilities: &[Vec<f64>],
) -> Result<ClusterModels> {
    if updates.len() != responsibilities.len() {
        return Err(invalid("one responsibility row per update required"));
    }
    let m = models.len();
    let mut mass = vec![0.0; m];
    for row in responsibilities {
        if row.len() != m {
            return Err(invalid("responsibility row length differs from cluster count"));
        }
        mass.iter_mut().zip(row).for_each(|(s, r)| *s += r);
    }
    let mut next = models.params.clone();
    for (u, row) in updates.iter().zip(responsibilities) {
        for k in 0..m {
            if row[k] > 0.0 {
                next[k].axpy(row[k] / mass[k], u)?;
            }
        }
    }
    Ok(ClusterModels {
        params: next,
        round: models.round + 1,
    })
}

/// Draws a cluster index from the categorical distribution `pi`.
pub fn sample_soft_assignment(pi: &[f64], stream: &mut RngStream) -> Result<usize> {
    if pi.is_empty() || pi.iter().any(|&p| !(p >= 0.0)) {
        return Err(invalid("probabilities must be non-negative"));
    }
    let total: f64 = pi.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(invalid(format!("probabilities sum to {total}, not 1")));
    }
    let mut u = stream.uniform() * total;
    let mut last = 0;
    for (m, &p) in pi.iter().enumerate() {
        if p > 0.0 {
            if u < p {
                return Ok(m);
            }
            last = m;
        }
        u -= p;
    }
    Ok(last)
}

/// Exponential-mechanism selection of the most accurate cluster model,
/// realised as an argmax over accuracies perturbed by Gumbel noise of scale
/// `2Δ/ε_select` with `Δ = 1/(N_i − 1)`.
pub fn private_select_cluster(
    accuracies: &[f64],
    dataset_size: usize,
    epsilon_select: f64,
    stream: &mut RngStream,
) -> Result<usize> {
    if accuracies.is_empty() {
        return Err(invalid("no candidates to select from"));
    }
    if dataset_size < 2 {
        return Err(invalid("private selection needs at least 2 samples"));
    }
    if !(epsilon_select > 0.0) {
        return Err(invalid(format!("selection budget must be positive, got {epsilon_select}")));
    }
    let sensitivity = 1.0 / (dataset_size as f64 - 1.0);
    let scale = 2.0 * sensitivity / epsilon_select;
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (m, &a) in accuracies.iter().enumerate() {
        let noise = if scale > 0.0 { sample_gumbel(scale, stream)? } else { 0.0 };
        let s = a + noise;
        if s > best_score {
            best_score = s;
            best = m;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathcore::{derive_stream, Party, StreamTag};

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::from_vec(v.to_vec()).unwrap()
    }

    #[test]
    fn aggregation_examples() {
        let models = ClusterModels {
            params: vec![pv(&[1.0, 1.0]), pv(&[5.0, 5.0])],
            round: 2,
        };
        let one = aggregate_cluster(&models, &[pv(&[0.5, -1.0])], &[0]).unwrap();
        assert_eq!(one.params[0], pv(&[1.5, 0.0]));
        assert_eq!(one.params[1], models.params[1]);
        assert_eq!(one.round, 3);
        let cancel = aggregate_cluster(&models, &[pv(&[2.0, 3.0]), pv(&[-2.0, -3.0])], &[1, 1]).unwrap();
        assert_eq!(cancel.params[1], models.params[1]);
        assert!(aggregate_cluster(&models, &[pv(&[1.0])], &[0]).is_err());
        assert!(aggregate_cluster(&models, &[pv(&[1.0, 1.0])], &[2]).is_err());
    }

    #[test]
    fn soft_aggregation_with_one_hot_rows_matches_hard() {
        let models = ClusterModels::uniform(&pv(&[0.0, 0.0]), 2, 2);
        let ups = [pv(&[1.0, 2.0]), pv(&[3.0, 4.0]), pv(&[-1.0, 0.0])];
        let hard = aggregate_cluster(&models, &ups, &[0, 1, 0]).unwrap();
        let rows = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        assert_eq!(aggregate_soft(&models, &ups, &rows).unwrap(), hard);
    }

    #[test]
    fn soft_assignment_draws() {
        let mut s = derive_stream(1, Party::Client(0), 2, StreamTag::SoftAssign);
        for _ in 0..100 {
            assert_eq!(sample_soft_assignment(&[0.0, 1.0, 0.0], &mut s).unwrap(), 1);
        }
        let draws = 10_000;
        let ones = (0..draws)
            .filter(|_| sample_soft_assignment(&[0.5, 0.5], &mut s).unwrap() == 1)
            .count();
        assert!((ones as f64 / draws as f64 - 0.5).abs() < 0.02);
        let a = derive_stream(3, Party::Client(1), 4, StreamTag::SoftAssign);
        let pi = [0.2, 0.3, 0.5];
        assert_eq!(
            sample_soft_assignment(&pi, &mut a.clone()).unwrap(),
            sample_soft_assignment(&pi, &mut a.clone()).unwrap()
        );
        assert!(sample_soft_assignment(&[0.5, 0.6], &mut s).is_err());
        assert!(sample_soft_assignment(&[1.5, -0.5], &mut s).is_err());
    }

    #[test]
    fn vanishing_noise_is_argmax() {
        let mut s = derive_stream(2, Party::Client(0), 1, StreamTag::Gumbel);
        for _ in 0..200 {
            assert_eq!(private_select_cluster(&[0.2, 0.9, 0.5], 1000, 1e6, &mut s).unwrap(), 1);
        }
        assert!(private_select_cluster(&[0.2], 1, 1.0, &mut s).is_err());
        assert!(private_select_cluster(&[0.2], 10, 0.0, &mut s).is_err());
    }

    #[test]
    fn selection_is_shift_invariant() {
        let base = derive_stream(5, Party::Client(3), 7, StreamTag::Gumbel);
        let (mut a, mut b) = (base.clone(), base);
        for _ in 0..1000 {
            let x = private_select_cluster(&[0.1, 0.4, 0.3], 20, 0.5, &mut a).unwrap();
            let y = private_select_cluster(&[10.1, 10.4, 10.3], 20, 0.5, &mut b).unwrap();
            assert_eq!(x, y);
        }
    }
}
