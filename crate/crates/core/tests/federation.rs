use rdpcfl_core::datagen::{generate_federated, DataSpec, FederatedDataset};
use rdpcfl_core::federation::{
    calibrate_clients, private_select_cluster, run_global, run_ifca, run_local, run_mrmtl,
    run_oracle, run_rdpcfl, Algorithm, ClusterCount, FederationConfig,
};
use rdpcfl_core::mathcore::{derive_stream, Party, StreamTag};
use rdpcfl_core::Error;

fn small_data(seed: u64, sizes: Vec<usize>, samples: usize) -> FederatedDataset {
    let spec = DataSpec {
        cluster_sizes: sizes,
        dim: 4,
        classes: 3,
        samples_per_client: samples,
        ..DataSpec::default()
    };
    generate_federated(&spec, seed).unwrap()
}

fn quick_cfg() -> FederationConfig {
    FederationConfig {
        rounds: 20,
        batch_size: 16,
        ..FederationConfig::default()
    }
}

#[test]
fn runs_are_deterministic() {
    let data = small_data(1, vec![2, 3, 3], 100);
    let cfg = quick_cfg();
    for run in [run_rdpcfl, run_ifca, run_global, run_local, run_mrmtl, run_oracle] {
        assert_eq!(run(&cfg, &data, 9).unwrap(), run(&cfg, &data, 9).unwrap());
    }
}

#[test]
fn ifca_with_one_cluster_is_global() {
    let data = small_data(2, vec![2, 3], 100);
    let cfg = FederationConfig {
        num_clusters: ClusterCount::Fixed(1),
        ..quick_cfg()
    };
    let ifca = run_ifca(&cfg, &data, 4).unwrap();
    let global = run_global(&cfg, &data, 4).unwrap();
    assert_eq!(ifca.records, global.records);
    assert_eq!(ifca.noise_multipliers, global.noise_multipliers);
}

#[test]
fn single_client_global_is_local() {
    let data = small_data(3, vec![1], 120);
    let cfg = quick_cfg();
    let g = run_global(&cfg, &data, 5).unwrap();
    let l = run_local(&cfg, &data, 5).unwrap();
    assert_eq!(g.records, l.records);
}

#[test]
fn mrmtl_without_regularisation_is_local() {
    let data = small_data(4, vec![2, 2], 100);
    let cfg = FederationConfig {
        lambda: 0.0,
        ..quick_cfg()
    };
    assert_eq!(
        run_mrmtl(&cfg, &data, 6).unwrap().records,
        run_local(&cfg, &data, 6).unwrap().records
    );
}

#[test]
fn local_client_ignores_other_clients_data() {
    let a = small_data(5, vec![2, 2], 100);
    let mut b = a.clone();
    b.clients[3] = small_data(99, vec![2, 2], 100).clients[3].clone();
    b.clients[3].id = 3;
    let cfg = quick_cfg();
    let ra = run_local(&cfg, &a, 1).unwrap();
    let rb = run_local(&cfg, &b, 1).unwrap();
    for (x, y) in ra.records.iter().zip(&rb.records) {
        assert_eq!(x.client_accuracy[..3], y.client_accuracy[..3]);
    }
}

#[test]
fn selection_overhead_raises_noise() {
    let data = small_data(6, vec![2, 2], 100);
    let local = calibrate_clients(&FederationConfig { algorithm: Algorithm::Local, ..quick_cfg() }, &data).unwrap();
    let ours = calibrate_clients(&FederationConfig { algorithm: Algorithm::Rdpcfl, ..quick_cfg() }, &data).unwrap();
    assert!(local.noise_multipliers[0] <= ours.noise_multipliers[0]);
}

#[test]
fn spend_never_exceeds_budget() {
    let data = small_data(7, vec![2, 3], 100);
    let cfg = quick_cfg();
    for run in [run_rdpcfl, run_ifca, run_global, run_local, run_mrmtl, run_oracle] {
        let r = run(&cfg, &data, 2).unwrap();
        let mut prev = 0.0;
        for rec in &r.records {
            assert!(rec.privacy_spent >= prev && rec.privacy_spent <= cfg.epsilon + 1e-9);
            prev = rec.privacy_spent;
        }
        assert!(r.max_privacy_spent() >= 0.99 * cfg.epsilon, "{:?}", r.algorithm);
    }
}

#[test]
fn infeasible_budget_fails_before_training() {
    let data = small_data(8, vec![2, 2], 100);
    let cfg = FederationConfig {
        epsilon: 0.01,
        delta: 1e-12,
        ..quick_cfg()
    };
    assert!(matches!(run_rdpcfl(&cfg, &data, 0), Err(Error::Calibration(_))));
}

#[test]
fn oracle_is_always_correctly_clustered() {
    let data = small_data(9, vec![1, 2, 2], 100);
    let r = run_oracle(&quick_cfg(), &data, 3).unwrap();
    assert!(r.records.iter().all(|rec| rec.clustering_correct));
}

#[test]
fn separable_federation_is_recovered() {
    let spec = DataSpec {
        samples_per_client: 500,
        ..DataSpec::default()
    };
    let data = generate_federated(&spec, 11).unwrap();
    let cfg = FederationConfig {
        epsilon: 10.0,
        rounds: 20,
        ..FederationConfig::default()
    };
    let r = run_rdpcfl(&cfg, &data, 11).unwrap();
    let first = r.first_round.as_ref().unwrap();
    assert!(first.mss >= 3.0, "mss {}", first.mss);
    assert_eq!(first.num_clusters, 4);
    assert!(r.clustering_correct());
}

#[test]
fn strong_regularisation_pulls_personal_models_together() {
    let data = small_data(12, vec![2, 2], 100);
    let spread = |lambda: f64| {
        let cfg = FederationConfig {
            lambda,
            learning_rate: 0.05,
            ..quick_cfg()
        };
        let models = run_mrmtl(&cfg, &data, 1).unwrap().final_models;
        let mut total = 0.0;
        for i in 0..models.len() {
            for j in (i + 1)..models.len() {
                total += models[i].distance_sq(&models[j]).sqrt();
            }
        }
        total
    };
    let d: Vec<f64> = [0.0, 1.0, 10.0].iter().map(|&l| spread(l)).collect();
    assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
    assert!(d[2] < 0.2 * d[0], "{d:?}");
}

#[test]
fn exponential_mechanism_follows_softmax() {
    let mut s = derive_stream(1, Party::Client(0), 1, StreamTag::Gumbel);
    let draws = 100_000;
    let zeros = (0..draws)
        .filter(|_| private_select_cluster(&[1.0, 0.0], 2, 2.0, &mut s).unwrap() == 0)
        .count();
    let e = std::f64::consts::E;
    assert!((zeros as f64 / draws as f64 - e / (e + 1.0)).abs() < 0.01);
}
