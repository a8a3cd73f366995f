import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from batpinna.estimator import (
    DivergenceError, NetworkParams, TrainConfig, init_network, load_network, loss, loss_and_grad, predict,
    save_network, train,
)


def test_parameter_count():
    p = init_network(0, (-30, 30))
    assert p.n_parameters == 60 * 9 + 9 + 9 + 1 == 559
    assert p.flat().size == 559


def test_init_is_seeded():
    assert_array_equal(init_network(3, (0, 1)).W1, init_network(3, (0, 1)).W1)
    assert not np.array_equal(init_network(3, (0, 1)).W1, init_network(4, (0, 1)).W1)


def test_zero_weights_give_midpoint():
    p = init_network(0, (10.0, 70.0)).with_flat(np.zeros(559))
    assert predict(p, np.ones(60)) == 40.0


def test_output_stays_in_range():
    p = init_network(1, (-30.0, 30.0))
    p = p.with_flat(50 * p.flat())
    y = predict(p, np.random.default_rng(0).normal(scale=100, size=(200, 60)))
    assert np.all(y >= -30) and np.all(y <= 30)


def test_predict_rejects_wrong_width():
    with pytest.raises(ValueError):
        predict(init_network(0, (0, 1)), np.zeros(59))


def test_gradient_matches_central_differences():
    rng = np.random.default_rng(5)
    p = init_network(2, (0.0, 1.0))
    p = p.with_flat(p.flat() + 0.1 * rng.standard_normal(559))
    X = rng.standard_normal((16, 60))
    t = rng.uniform(0.1, 0.9, 16)
    _, g = loss_and_grad(p, X, t)
    theta = p.flat()
    h = 1e-6
    for i in rng.choice(559, 40, replace=False).tolist() + [558]:
        e = np.zeros(559)
        e[i] = h
        num = (loss(p.with_flat(theta + e), X, t) - loss(p.with_flat(theta - e), X, t)) / (2 * h)
        assert abs(num - g[i]) < 1e-6 + 1e-4 * abs(num)


def test_overfits_tiny_set():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((20, 60))
    y = rng.uniform(-20, 20, 20)
    p = train(init_network(0, (-25, 25)), X, y,
              TrainConfig(epochs=3000, batch_size=20, validation_fraction=0, patience=0, learning_rate=0.01))
    assert np.max(np.abs(predict(p, X) - y)) < 0.5


def test_single_repeated_sample_is_fitted():
    x = np.random.default_rng(10).standard_normal((1, 60)).repeat(16, axis=0)
    p = train(init_network(0, (0, 90)), x, np.full(16, 33.3),
              TrainConfig(epochs=2000, batch_size=16, validation_fraction=0, patience=0))
    assert abs(predict(p, x[0]) - 33.3) < 0.1


def test_separates_two_clusters_on_held_out_rows():
    rng = np.random.default_rng(7)

    def draw(n):
        X = np.vstack([rng.normal(-1, 0.3, (n, 60)), rng.normal(1, 0.3, (n, 60))])
        return X, np.r_[np.full(n, 20.0), np.full(n, 55.0)]

    X, y = draw(100)
    p = train(init_network(1, (15, 60)), X, y, TrainConfig(epochs=100, seed=1))
    Xt, yt = draw(50)
    assert np.max(np.abs(predict(p, Xt) - yt)) <= 3.0


def test_training_is_deterministic():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((64, 60))
    y = rng.uniform(0, 10, 64)
    cfg = TrainConfig(epochs=20, seed=4)
    a = train(init_network(0, (-1, 11)), X, y, cfg)
    b = train(init_network(0, (-1, 11)), X, y, cfg)
    assert_array_equal(a.flat(), b.flat())


def test_full_batch_loss_is_non_increasing():
    rng = np.random.default_rng(9)
    X = rng.standard_normal((64, 60))
    y = X[:, 0] * 3 + 10
    hist = []
    train(init_network(0, (y.min() - 1, y.max() + 1)), X, y,
          TrainConfig(optimizer="sgd", learning_rate=0.05, epochs=200, batch_size=64, validation_fraction=0,
                      patience=0), hist)
    assert np.all(np.diff(hist) <= 0)
    assert hist[-1] < 0.5 * hist[0]


@pytest.mark.xfail(strict=True, reason="at sub-degree held-out error, optimiser noise moves the MAE by more than 20%")
def test_shuffled_training_order_changes_held_out_error_little():
    from batpinna.evaluation import ExperimentConfig, extract_table, output_range
    from batpinna.features import LogZScore

    cfg = ExperimentConfig(az_min=-14, az_max=14, az_step=14, n_sites=2, pulses_per_cell=20, seed=2)
    t = extract_table(cfg.dataset())
    test = t.pulse >= 16
    norm = LogZScore.fit(t.raw[~test])
    X, Xt = norm.transform(t.raw[~test]), norm.transform(t.raw[test])
    y, yt = t.elevation[~test], t.elevation[test]
    maes = []
    for perm_seed in (None, 1, 2, 3, 4):
        order = np.arange(len(y)) if perm_seed is None else np.random.default_rng(perm_seed).permutation(len(y))
        p = train(init_network(0, output_range(y)), X[order], y[order], cfg.train_config())
        maes.append(np.mean(np.abs(predict(p, Xt) - yt)))
    assert max(abs(m - maes[0]) for m in maes[1:]) < 0.2 * maes[0]


def test_divergence_is_reported():
    # saturating units keep gradients bounded, so a poisoned input is what makes the loss non-finite
    X = np.random.default_rng(0).standard_normal((8, 60))
    X[3, 7] = np.nan
    with pytest.raises(DivergenceError) as info:
        with np.errstate(all="ignore"):
            train(init_network(0, (0, 1)), X, np.linspace(0.1, 0.9, 8),
                  TrainConfig(optimizer="sgd", epochs=5, validation_fraction=0))
    assert info.value.epoch == 0


def test_training_preconditions():
    p = init_network(0, (0, 10))
    with pytest.raises(ValueError):
        train(p, np.zeros((3, 60)), [1, 2, 30])
    with pytest.raises(ValueError):
        train(p, np.zeros((3, 60)), [1, 2])
    with pytest.raises(ValueError):
        TrainConfig(optimizer="rmsprop")
    with pytest.raises(ValueError):
        NetworkParams(np.zeros((9, 60)), np.zeros(9), np.zeros(9), 0.0, 5.0, 5.0)


def test_weight_file_round_trip(tmp_path):
    p = init_network(11, (-33.0, 33.0))
    save_network(p, tmp_path / "az.pnn", TrainConfig(seed=11))
    raw = (tmp_path / "az.pnn").read_bytes()
    assert raw[:4] == b"PNN1" and len(raw) == 36 + 8 * 559
    q = load_network(tmp_path / "az.pnn")
    assert_array_equal(q.flat(), p.flat())
    assert (q.angle_min, q.angle_max) == (-33.0, 33.0)
    X = np.random.default_rng(0).standard_normal((5, 60))
    assert_array_equal(predict(q, X), predict(p, X))
    assert "train.seed = 11" in (tmp_path / "az.pnn.txt").read_text()


def test_rejects_foreign_file(tmp_path):
    (tmp_path / "x.pnn").write_bytes(b"NOPE" + bytes(40))
    with pytest.raises(ValueError):
        load_network(tmp_path / "x.pnn")
    p = init_network(0, (0, 1))
    save_network(p, tmp_path / "t.pnn")
    (tmp_path / "t.pnn").write_bytes((tmp_path / "t.pnn").read_bytes()[:-8])
    with pytest.raises(ValueError):
        load_network(tmp_path / "t.pnn")


def test_predict_scalar_and_batch_agree():
    p = init_network(0, (0, 90))
    X = np.random.default_rng(1).standard_normal((4, 60))
    assert_allclose([predict(p, x) for x in X], predict(p, X))
