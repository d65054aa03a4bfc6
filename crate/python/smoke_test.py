"""Smoke test for the rdpcfl Python extension.

Build and install first, e.g.:

    pip install maturin
    maturin develop --release -m crates/py/Cargo.toml
"""

import json
import math
import tempfile

import rdpcfl


def main():
    spec = json.dumps({"samples_per_client": 60})
    data = rdpcfl.FederatedDataset.generate(3, spec)
    assert data.num_clients == 21 and data.num_clusters == 4
    x, y = data.client_data(0)
    assert len(x) == len(y) == 48 and len(x[0]) == data.dim

    with tempfile.TemporaryDirectory() as tmp:
        manifest = json.loads(data.write(tmp))
        assert len(manifest["clients"]) == 21
        again = rdpcfl.FederatedDataset.load(tmp)
        assert again.true_assignments == data.true_assignments

    cfg = json.dumps({"rounds": 4, "batch_size": 16, "epsilon": 5.0})
    first = rdpcfl.run(data, 1, cfg, algorithm="rdpcfl")
    second = rdpcfl.run(data, 1, cfg, algorithm="rdpcfl")
    assert first.to_json() == second.to_json()
    assert len(first.accuracy_curve) == 4
    assert first.privacy_spent <= 5.0

    oracle = rdpcfl.run(data, 1, cfg, algorithm="oracle")
    assert oracle.clustering_correct

    z = rdpcfl.calibrate_noise(5.0, 1e-4, 1600, 1600, 32, 1, 20)
    spent = rdpcfl.account(z, 1e-4, 1600, 1600, 32, 1, 20)
    assert 0.99 * 5.0 <= spent <= 5.0

    orders = rdpcfl.default_orders()
    full = rdpcfl.rdp_subsampled_gaussian(1.0, 2.0, orders)
    plain = rdpcfl.rdp_gaussian(1.0, 2.0, orders)
    assert all(abs(a - b) < 1e-12 for a, b in zip(full, plain))
    assert rdpcfl.rdp_to_dp(orders, plain, 1e-5) > 0

    assert abs(rdpcfl.q_function(0.0) - 0.5) < 1e-15
    assert abs(rdpcfl.theoretical_overlap(1.0, 1.0, 1) - math.erfc(0.5 / math.sqrt(2))) < 1e-12
    assert rdpcfl.switch_round(0.0, 200) == 100
    assert rdpcfl.adjusted_rand_index([0, 0, 1, 1], [1, 1, 0, 0]) == 1.0

    try:
        rdpcfl.calibrate_noise(0.01, 1e-12, 1600, 1600, 32, 1, 200)
    except rdpcfl.PrivacyInfeasibleError:
        pass
    else:
        raise AssertionError("expected PrivacyInfeasibleError")

    print("rdpcfl", rdpcfl.__version__, "smoke test ok")


if __name__ == "__main__":
    main()
