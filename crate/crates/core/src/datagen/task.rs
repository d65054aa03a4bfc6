use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::shift::{apply_concept_shift, apply_covariate_shift, ShiftKind};
use crate::data::Dataset;
use crate::error::{invalid, Result};
use crate::mathcore::{derive_stream, sample_gaussian, Party, RngStream, StreamTag};

/// Class-conditional Gaussian blobs: class `y` is `N(center_y, noise_std²·I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobTask {
    pub dim: usize,
    pub classes: usize,
    pub centers: Vec<Vec<f64>>,
    pub noise_std: f64,
}

impl BlobTask {
    /// Centers are independent uniformly random directions scaled to length
    /// `margin`.
    pub fn new(seed: u64, dim: usize, classes: usize, margin: f64, noise_std: f64) -> Result<Self> {
        if dim < 2 || classes < 2 {
            return Err(invalid("blob task needs d >= 2 and C >= 2"));
        }
        if !(margin > 0.0 && margin.is_finite()) || !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(invalid("margin must be positive and noise_std non-negative"));
        }
        let mut stream = derive_stream(seed, Party::Server, 0, StreamTag::DataGen);
        let centers = (0..classes)
            .map(|_| {
                let v: Vec<f64> = (0..dim).map(|_| sample_gaussian(&mut stream)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.into_iter().map(|x| margin * x / norm).collect()
            })
            .collect();
        Ok(Self {
            dim,
            classes,
            centers,
            noise_std,
        })
    }

    /// `n` rows with class counts balanced to within one, in shuffled order.
    pub fn sample(&self, n: usize, stream: &mut RngStream) -> Dataset {
        let mut labels: Vec<usize> = (0..n).map(|i| i % self.classes).collect();
        labels.shuffle(stream);
        let mut features = Vec::with_capacity(n * self.dim);
        for &y in &labels {
            for &c in &self.centers[y] {
                features.push(c + self.noise_std * sample_gaussian(stream));
            }
        }
        Dataset::new(self.dim, self.classes, features, labels).expect("consistent by construction")
    }
}

/// A base-task pool of `samples_per_client` rows with the default margin and
/// noise level.
pub fn generate_base_task(
    seed: u64,
    dim: usize,
    classes: usize,
    samples_per_client: usize,
) -> Result<Dataset> {
    let spec = DataSpec::default();
    let task = BlobTask::new(seed, dim, classes, spec.margin, spec.noise_std)?;
    let mut stream = derive_stream(seed, Party::Server, 1, StreamTag::DataGen);
    Ok(task.sample(samples_per_client, &mut stream))
}

/// Shape of a synthetic federation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSpec {
    /// Number of clients in each ground-truth cluster; cluster 0 comes first.
    pub cluster_sizes: Vec<usize>,
    pub dim: usize,
    pub classes: usize,
    pub samples_per_client: usize,
    pub margin: f64,
    pub noise_std: f64,
    pub shift: ShiftKind,
    pub train_fraction: f64,
}

impl Default for DataSpec {
    fn default() -> Self {
        Self {
            cluster_sizes: vec![3, 6, 6, 6],
            dim: 16,
            classes: 10,
            samples_per_client: 2000,
            margin: 5.0,
            noise_std: 1.0,
            shift: ShiftKind::Covariate,
            train_fraction: 0.8,
        }
    }
}

impl DataSpec {
    pub fn num_clients(&self) -> usize {
        self.cluster_sizes.iter().sum()
    }

    pub fn n_train(&self) -> usize {
        (self.samples_per_client as f64 * self.train_fraction).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.cluster_sizes.is_empty() || self.cluster_sizes.contains(&0) {
            return Err(invalid("every cluster needs at least one client"));
        }
        if self.dim < 2 || self.classes < 2 {
            return Err(invalid("need d >= 2 and C >= 2"));
        }
        if self.shift == ShiftKind::Covariate && self.dim % 2 != 0 {
            return Err(invalid(format!("covariate shift needs an even dimension, got {}", self.dim)));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(invalid("train_fraction must lie strictly between 0 and 1"));
        }
        let n_train = self.n_train();
        if n_train < 2 || n_train >= self.samples_per_client {
            return Err(invalid("each client needs at least 2 training rows and 1 test row"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientData {
    pub id: usize,
    /// Ground-truth cluster `s(i)`.
    pub cluster: usize,
    pub train: Dataset,
    pub test: Dataset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FederatedDataset {
    pub clients: Vec<ClientData>,
    pub dim: usize,
    pub classes: usize,
    pub cluster_sizes: Vec<usize>,
    pub shift: ShiftKind,
    pub seed: u64,
}

impl FederatedDataset {
    pub fn num_clusters(&self) -> usize {
        self.cluster_sizes.len()
    }

    pub fn true_assignments(&self) -> Vec<usize> {
        self.clients.iter().map(|c| c.cluster).collect()
    }

    /// Index of the smallest cluster (lowest index on ties).
    pub fn minority_cluster(&self) -> usize {
        let mut best = 0;
        for (k, &s) in self.cluster_sizes.iter().enumerate() {
            if s < self.cluster_sizes[best] {
                best = k;
            }
        }
        best
    }
}

fn shift_dataset(data: &Dataset, shift: ShiftKind, k: usize) -> Result<Dataset> {
    let mut out = Dataset::empty(data.dim(), data.classes());
    for (x, y) in data.iter() {
        match shift {
            ShiftKind::Covariate => out.push(&apply_covariate_shift(x, k)?, y),
            ShiftKind::Concept => out.push(x, apply_concept_shift(y, k, data.classes())?),
        }
    }
    Ok(out)
}

/// Draws every client's data. Client `i`'s rows depend only on `seed` and
/// `i`, never on the other clients.
pub fn generate_federated(spec: &DataSpec, seed: u64) -> Result<FederatedDataset> {
    spec.validate()?;
    let task = BlobTask::new(seed, spec.dim, spec.classes, spec.margin, spec.noise_std)?;
    let n_train = spec.n_train();
    let mut clients = Vec::with_capacity(spec.num_clients());
    for (cluster, &size) in spec.cluster_sizes.iter().enumerate() {
        for _ in 0..size {
            let id = clients.len();
            let mut stream = derive_stream(seed, Party::Client(id as u32), 0, StreamTag::DataGen);
            let pool = shift_dataset(&task.sample(spec.samples_per_client, &mut stream), spec.shift, cluster)?;
            let (train, test) = pool.split_at(n_train);
            clients.push(ClientData {
                id,
                cluster,
                train,
                test,
            });
        }
    }
    Ok(FederatedDataset {
        clients,
        dim: spec.dim,
        classes: spec.classes,
        cluster_sizes: spec.cluster_sizes.clone(),
        shift: spec.shift,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_classes() {
        let pool = generate_base_task(3, 16, 10, 2003).unwrap();
        let mut counts = [0usize; 10];
        pool.labels().iter().for_each(|&y| counts[y] += 1);
        let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
        assert!(hi - lo <= 1, "{counts:?}");
    }

    #[test]
    fn same_seed_same_pool() {
        assert_eq!(generate_base_task(8, 4, 3, 50).unwrap(), generate_base_task(8, 4, 3, 50).unwrap());
        assert_ne!(generate_base_task(8, 4, 3, 50).unwrap(), generate_base_task(9, 4, 3, 50).unwrap());
    }

    #[test]
    fn default_layout() {
        let spec = DataSpec {
            samples_per_client: 50,
            ..DataSpec::default()
        };
        let fed = generate_federated(&spec, 1).unwrap();
        assert_eq!(fed.clients.len(), 21);
        assert_eq!(fed.clients[0].train.len(), 40);
        assert_eq!(fed.clients[0].test.len(), 10);
        assert_eq!(fed.minority_cluster(), 0);
        assert_eq!(&fed.true_assignments()[..4], &[0, 0, 0, 1]);
    }

    #[test]
    fn shifts_preserve_the_other_marginal() {
        for shift in [ShiftKind::Covariate, ShiftKind::Concept] {
            let spec = DataSpec {
                cluster_sizes: vec![1, 1],
                samples_per_client: 30,
                shift,
                ..DataSpec::default()
            };
            let fed = generate_federated(&spec, 5).unwrap();
            // Client 1's rows are client 1's base draw with shift k=1 applied.
            let task = BlobTask::new(5, spec.dim, spec.classes, spec.margin, spec.noise_std).unwrap();
            let mut stream = derive_stream(5, Party::Client(1), 0, StreamTag::DataGen);
            let base = task.sample(30, &mut stream);
            let (train, _) = base.split_at(24);
            let got = &fed.clients[1].train;
            for i in 0..train.len() {
                match shift {
                    ShiftKind::Covariate => {
                        assert_eq!(got.label(i), train.label(i));
                        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
                        assert!((norm(got.features(i)) - norm(train.features(i))).abs() < 1e-12);
                    }
                    ShiftKind::Concept => {
                        assert_eq!(got.features(i), train.features(i));
                        assert_eq!(got.label(i), (train.label(i) + 1) % 10);
                    }
                }
            }
        }
    }

    #[test]
    fn odd_dimension_rejected_for_rotation() {
        let spec = DataSpec {
            dim: 5,
            ..DataSpec::default()
        };
        assert!(generate_federated(&spec, 0).is_err());
    }
}
