import numpy as np
import pytest

import s2vr


def test_kernel_and_alignment():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(3, 20))
    K = s2vr.gaussian_kernel(X, X, 1.0)
    assert K.shape == (20, 20)
    assert np.allclose(np.diag(K), 1.0)
    Y = rng.normal(size=(2, 20))
    res = s2vr.align_weights(X, s2vr.bandwidth_grid(4, 0.5, 2.0), s2vr.target_kernel(Y))
    w = res["weights"]
    assert np.all(w >= 0)
    assert abs(np.linalg.norm(w) - 1.0) < 1e-10


def test_kernel_ridge_reduction():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(3, 30))
    Y = rng.normal(size=(4, 30))
    K = s2vr.gaussian_kernel(X, X, 1.0)
    G, _ = s2vr.laplacian(Y)
    cfg = s2vr.TrainConfig()
    cfg.tau = 0.8
    cfg.learn_structure = False
    out = s2vr.solve(K, G, Y, cfg)
    closed = 2 * cfg.tau * Y @ np.linalg.inv(np.eye(30) + 2 * cfg.tau * K)
    assert np.linalg.norm(out["beta"] - closed) / np.linalg.norm(closed) < 1e-8
    trace = np.asarray(out["objective_trace"])
    assert np.all(np.diff(trace) <= 1e-9 * (1 + np.abs(trace[1:])))


def test_spine_pipeline_and_round_trip():
    labels = np.column_stack([s2vr.generate_spine(seed) for seed in range(12)])
    assert labels.shape == (139, 12)
    ta, ma, ba = s2vr.cobb_angles(labels[:, 0])
    assert (ta, ma, ba) == tuple(labels[136:, 0])
    images = [s2vr.render(labels[:, i], seed=i) for i in range(12)]
    assert images[0].shape == (256, 64)
    X = np.column_stack([s2vr.hog(img) for img in images])
    assert X.shape == (7812, 12)

    cfg = s2vr.TrainConfig()
    cfg.lambda_ = 1.0
    cfg.max_outer = 5
    model = s2vr.fit(X, labels, cfg)
    assert model.outputs == 139
    pred = model.predict(X)
    again = s2vr.Model.from_bytes(model.to_bytes()).predict(X)
    assert np.array_equal(pred, again)
    assert np.all(np.asarray(s2vr.consistency_gap(pred[:, 0])) >= 0)


def test_metrics_and_errors():
    assert s2vr.rrmse(np.array([0.0, 1.0]), np.array([0.0, 2.0]), 1.0) == pytest.approx(70.71067811865476)
    assert s2vr.pearson(np.array([1.0, 2.0, 3.0]), np.array([1.0, 2.0, 4.0])) == pytest.approx(0.98198, abs=1e-5)
    with pytest.raises(s2vr.ParameterError):
        s2vr.gaussian_kernel(np.zeros((2, 3)), np.zeros((2, 3)), -1.0)
    with pytest.raises(s2vr.Error):
        s2vr.pearson(np.ones(3), np.array([1.0, 2.0, 3.0]))
