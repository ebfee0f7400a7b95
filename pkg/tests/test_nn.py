import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from physadv import nn
from physadv.errors import DimensionMismatch, EmptyDataset, InvalidSpec, MalformedFile


def central_diff(f, x, h=1e-5):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def random_net(rng, input_dim=None, scaled=False):
    input_dim = input_dim or int(rng.integers(2, 9))
    hidden = [int(v) for v in rng.integers(2, 10, size=rng.integers(1, 4))]
    net = nn.build_network(nn.mlp_spec(input_dim, hidden, seed=int(rng.integers(1 << 30))))
    # spread biases so ReLUs are not all active or all dead
    for b in net.biases:
        b[:] = rng.normal(scale=0.3, size=b.shape)
    if scaled:
        net.input_shift = rng.normal(size=input_dim)
        net.input_scale = rng.uniform(0.5, 3.0, size=input_dim)
    return net


def max_rel_error(g, fd):
    return np.max(np.abs(g - fd) / np.maximum(np.abs(fd), 1e-6 + 1e-3 * np.max(np.abs(fd))))


@pytest.mark.parametrize("scaled", [False, True])
def test_input_gradient_matches_finite_differences(rng, scaled):
    worst = 0.0
    for _ in range(50):
        net = random_net(rng, scaled=scaled)
        x = rng.normal(size=net.input_dim)
        y = int(rng.integers(2))
        g = net.input_gradient(x, y)
        fd = central_diff(lambda v: net.loss(v, y), x)
        worst = max(worst, max_rel_error(g, fd))
    assert worst < 1e-4


def test_gradient_backends_agree(rng, backend):
    for _ in range(30):
        net = random_net(rng)
        x = rng.normal(size=net.input_dim)
        t = np.eye(2)[rng.integers(2)]
        p, g = backend.loss_input_gradient(net.weights, net.biases, x, t)
        p_ref, g_ref = nn.kernels._kernels_py.loss_input_gradient(net.weights, net.biases, x, t)
        np.testing.assert_allclose(p, p_ref, rtol=1e-13, atol=1e-15)
        np.testing.assert_allclose(g, g_ref, rtol=1e-10, atol=1e-15)
        np.testing.assert_allclose(backend.forward(net.weights, net.biases, x), p_ref, rtol=1e-13)


def test_zero_weight_network():
    net = nn.build_network(nn.mlp_spec(3, [4]))
    for w in net.weights:
        w[:] = 0
    x = np.array([1.0, -2.0, 3.0])
    np.testing.assert_allclose(net.forward(x), [0.5, 0.5])
    assert not net.input_gradient(x, 1).any()


def test_gradient_zero_at_loss_minimum():
    # single softmax layer whose logits saturate towards class 0
    net = nn.build_network(nn.mlp_spec(1, []))
    net.weights[0][:] = [[0.0, 0.0]]
    net.biases[0][:] = [40.0, -40.0]
    g = net.input_gradient(np.array([0.3]), 0)
    assert np.max(np.abs(g)) < 1e-30


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1), st.lists(st.floats(-1e3, 1e3), min_size=5, max_size=5))
def test_forward_on_simplex(seed, xs):
    net = nn.build_network(nn.mlp_spec(5, [7, 0.25, 3], seed=seed))
    p = net.forward(np.array(xs))
    assert np.all(p >= 0)
    assert abs(p.sum() - 1.0) < 1e-9


def test_presets_layer_counts():
    assert nn.mlp_spec(46, nn.FDIA_DEFENDER).n_layers == 9
    assert nn.mlp_spec(46, nn.FDIA_ATTACKER).n_layers == 7
    assert nn.mlp_spec(25, nn.WATER_DEFENDER).n_layers == 7
    assert nn.mlp_spec(25, nn.WATER_ATTACKER).n_layers == 5


def test_build_is_deterministic():
    a = nn.build_network(nn.mlp_spec(6, [5, 4], seed=7))
    b = nn.build_network(nn.mlp_spec(6, [5, 4], seed=7))
    for wa, wb in zip(a.weights, b.weights):
        assert np.array_equal(wa, wb)


def test_invalid_specs():
    with pytest.raises(InvalidSpec):
        nn.mlp_spec(3, [0])
    with pytest.raises(InvalidSpec):
        nn.NetworkSpec(3, (nn.LayerSpec(3, "softmax"),)).validate()
    with pytest.raises(InvalidSpec):
        nn.NetworkSpec(3, (nn.LayerSpec(2, "relu"),)).validate()


def test_dimension_mismatch():
    net = nn.build_network(nn.mlp_spec(3, [4]))
    with pytest.raises(DimensionMismatch):
        net.forward(np.zeros(4))
    with pytest.raises(DimensionMismatch):
        net.input_gradient(np.zeros(2), 0)


def blobs(rng, n=400):
    x0 = rng.normal(loc=(-2, -2), size=(n // 2, 2))
    x1 = rng.normal(loc=(2, 2), size=(n // 2, 2))
    return nn.LabeledDataset(np.vstack([x0, x1]), np.r_[np.zeros(n // 2), np.ones(n // 2)])


def test_zero_epochs_leaves_weights():
    net = nn.build_network(nn.mlp_spec(2, [4], seed=1))
    data = blobs(np.random.default_rng(0), 20)
    out = nn.train_sgd(net, data, nn.TrainConfig(epochs=0))
    for a, b in zip(net.weights, out.weights):
        assert np.array_equal(a, b)


def test_training_separates_blobs():
    rng = np.random.default_rng(3)
    # keep only points well away from the diagonal so the set is separable
    data = blobs(rng, 600)
    keep = np.abs(data.features.sum(axis=1)) > 1.0
    data = data.subset(keep)
    net = nn.build_network(nn.mlp_spec(2, [8, 8], seed=2))
    cfg = nn.TrainConfig(learning_rate=0.5, batch_size=16, epochs=200, seed=4, patience=200)
    out = nn.train_sgd(net, data, cfg)
    assert nn.class_accuracy(out, data) >= 0.99


def test_training_is_deterministic():
    data = blobs(np.random.default_rng(5), 200)
    net = nn.build_network(nn.mlp_spec(2, [6, 0.25, 4], seed=9))
    cfg = nn.TrainConfig(learning_rate=0.2, batch_size=32, epochs=10, seed=11)
    a = nn.train_sgd(net, data, cfg)
    b = nn.train_sgd(net, data, cfg)
    for wa, wb in zip(a.weights, b.weights):
        assert np.array_equal(wa, wb)


def test_train_empty_raises():
    net = nn.build_network(nn.mlp_spec(2, [4]))
    with pytest.raises(EmptyDataset):
        nn.train_sgd(net, nn.LabeledDataset(np.zeros((0, 2)), np.zeros(0)), nn.TrainConfig())


def test_class_accuracy_constant_predictor():
    net = nn.build_network(nn.mlp_spec(2, []))
    net.weights[0][:] = 0
    net.biases[0][:] = [0.0, 5.0]
    ones = nn.LabeledDataset(np.zeros((4, 2)), np.ones(4))
    zeros = nn.LabeledDataset(np.zeros((4, 2)), np.zeros(4))
    assert nn.class_accuracy(net, ones) == 1.0
    assert nn.class_accuracy(net, zeros) == 0.0
    with pytest.raises(EmptyDataset):
        nn.class_accuracy(net, nn.LabeledDataset(np.zeros((0, 2)), np.zeros(0)))


def test_save_load_round_trip(tmp_path, rng):
    net = random_net(rng, input_dim=5, scaled=True)
    p = tmp_path / "net.json"
    nn.save_network(net, p)
    back = nn.load_network(p)
    xs = rng.normal(size=(20, 5))
    assert np.array_equal(net.forward(xs), back.forward(xs))
    assert np.array_equal(net.input_gradient(xs[0], 1), back.input_gradient(xs[0], 1))


def test_load_rejects_truncated(tmp_path, rng):
    p = tmp_path / "net.json"
    nn.save_network(random_net(rng), p)
    p.write_text(p.read_text()[:-40])
    with pytest.raises(MalformedFile):
        nn.load_network(p)


def test_load_rejects_inconsistent_weights(tmp_path, rng):
    import json

    p = tmp_path / "net.json"
    nn.save_network(random_net(rng, input_dim=4), p)
    doc = json.loads(p.read_text())
    doc["weights"][0] = doc["weights"][0][:-1]
    p.write_text(json.dumps(doc))
    with pytest.raises(MalformedFile):
        nn.load_network(p)


def test_dataset_csv_round_trip(tmp_path, rng):
    d = nn.LabeledDataset(rng.normal(size=(6, 3)), [0, 1, 1, 0, 1, 0])
    p = tmp_path / "d.csv"
    d.to_csv(p, header=["a", "b", "c"], comment="test")
    back = nn.LabeledDataset.from_csv(p)
    assert np.array_equal(back.features, d.features)
    assert np.array_equal(back.labels, d.labels)
