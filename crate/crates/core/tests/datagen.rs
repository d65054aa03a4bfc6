use rdpcfl_core::datagen::{generate_base_task, generate_federated, load_federated, write_federated, DataSpec, ShiftKind};
use rdpcfl_core::mathcore::ParamVector;
use rdpcfl_core::trainer::{LogisticRegression, Predictor};

#[test]
fn default_margin_is_learnable_by_plain_logistic_regression() {
    let pool = generate_base_task(21, 16, 10, 2000).unwrap();
    let model = LogisticRegression::new(16, 10);
    let mut theta = ParamVector::zeros(model.param_dim());
    for _ in 0..200 {
        let g = model.full_gradient(&theta, &pool);
        theta.axpy(-0.5, &g).unwrap();
    }
    let acc = model.accuracy(&theta, &pool);
    assert!(acc >= 0.95, "train accuracy {acc}");
}

#[test]
fn export_round_trips_exactly_and_is_byte_stable() {
    let spec = DataSpec {
        samples_per_client: 40,
        shift: ShiftKind::Concept,
        ..DataSpec::default()
    };
    let data = generate_federated(&spec, 77).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let manifest = write_federated(&data, a.path()).unwrap();
    write_federated(&generate_federated(&spec, 77).unwrap(), b.path()).unwrap();
    assert_eq!(manifest.clients.len(), 21);
    assert_eq!(manifest.cluster_sizes, vec![3, 6, 6, 6]);
    for c in &manifest.clients {
        let x = std::fs::read(a.path().join(&c.file)).unwrap();
        assert_eq!(x, std::fs::read(b.path().join(&c.file)).unwrap());
    }
    let first = std::fs::read_to_string(a.path().join("client_000.csv")).unwrap();
    let header = first.lines().next().unwrap();
    assert!(header.starts_with("f0,f1,") && header.ends_with(",f15,label"));

    let back = load_federated(a.path()).unwrap();
    assert_eq!(back, data);
}

#[test]
fn loader_rejects_tampered_files() {
    let spec = DataSpec {
        cluster_sizes: vec![1, 1],
        samples_per_client: 10,
        ..DataSpec::default()
    };
    let dir = tempfile::tempdir().unwrap();
    write_federated(&generate_federated(&spec, 1).unwrap(), dir.path()).unwrap();
    let path = dir.path().join("client_001.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, text.replacen("label", "y", 1)).unwrap();
    assert!(load_federated(dir.path()).is_err());
}
