import numpy as np
import pytest

from physadv import attack, constraints as cons, nn
from physadv.attack import AttackConfig
from physadv.constraints import ConstraintSet
from physadv.errors import DegenerateConstraint, EmptyDataset, InvalidSpec

from conftest import random_rank_deficient
from test_constraints import SWAT_PHI, SWAT_TILDE


class ConstantGradient:
    """Loss with a fixed gradient; predicts ``label`` until ``x[0]`` passes ``flip_at``."""

    def __init__(self, g, flip_at=np.inf, label=0):
        self.g = np.asarray(g, dtype=float)
        self.flip_at = flip_at
        self.label = label
        self.calls = 0

    def input_gradient(self, x, label):
        self.calls += 1
        return self.g.copy()

    def predict(self, x):
        x = np.asarray(x)
        flipped = x[..., 0] > self.flip_at
        out = np.where(flipped, 1 - self.label, self.label)
        return int(out) if out.ndim == 0 else out


class Quadratic:
    """Loss 2x^2 + 2y^2; class flips to 1 once the loss exceeds ``threshold``."""

    def __init__(self, threshold=np.inf):
        self.threshold = threshold

    def input_gradient(self, x, label):
        return 4.0 * np.asarray(x, dtype=float)

    def loss(self, x):
        return 2.0 * float(np.sum(np.asarray(x) ** 2))

    def predict(self, x):
        x = np.asarray(x)
        out = (2.0 * np.sum(x**2, axis=-1) > self.threshold).astype(int)
        return int(out) if out.ndim == 0 else out


def eq_set(phi, comp=None):
    phi = np.atleast_2d(phi)
    return ConstraintSet(phi, np.zeros(phi.shape[0]), "equality", comp or range(phi.shape[1]))


def test_eq_one_step_hand_examples():
    size = 0.7
    r = attack.eq_one_step(ConstantGradient([3.0, 1.0]), np.zeros(2), size, eq_set([[1, -1]]), 0)
    np.testing.assert_allclose(r, [size, size])
    r = attack.eq_one_step(ConstantGradient([3.0, 1.0]), np.zeros(2), size, eq_set([[1, 1]]), 0)
    np.testing.assert_allclose(r, [-size, size])


def test_eq_one_step_masks_uncompromised():
    cs = eq_set([[1, -1]], comp=[1, 3])
    r = attack.eq_one_step(ConstantGradient([5.0, 3.0, -9.0, 1.0]), np.zeros(4), 1.0, cs, 0)
    np.testing.assert_allclose(r, [0, 1, 0, 1])


def test_eq_one_step_zero_gradient_gives_zero_step():
    r = attack.eq_one_step(ConstantGradient([0.0, 0.0]), np.zeros(2), 1.0, eq_set([[1, -1]]), 0)
    assert not r.any()


def test_eq_one_step_degenerate():
    with pytest.raises(DegenerateConstraint):
        attack.eq_one_step(ConstantGradient([1.0, 1.0]), np.zeros(2), 1.0, eq_set(np.eye(2)), 0)


def _random_net(rng, d):
    net = nn.build_network(nn.mlp_spec(d, [12, 8], seed=int(rng.integers(1 << 30))))
    for b in net.biases:
        b[:] = rng.normal(scale=0.3, size=b.shape)
    return net


def test_eq_one_step_keeps_constraints_on_random_nets(rng):
    for _ in range(100):
        d = 10
        comp = sorted(rng.choice(d, size=6, replace=False).tolist())
        phi = random_rank_deficient(rng, 4, 6, int(rng.integers(1, 5)))
        cs = eq_set(phi, comp)
        net = _random_net(rng, d)
        r = attack.eq_one_step(net, rng.normal(size=d), 0.5, cs, int(rng.integers(2)))
        assert cons.validate_perturbation(cs, r[comp])
        assert not np.delete(r, comp).any()


def test_eq_one_step_invariant_to_row_scaling(rng):
    for _ in range(30):
        phi = random_rank_deficient(rng, 3, 6, 2)
        scaled = phi.copy()
        scaled[int(rng.integers(3))] *= 2.0
        net = _random_net(rng, 6)
        x = rng.normal(size=6)
        a = attack.eq_one_step(net, x, 1.0, eq_set(phi), 1)
        b = attack.eq_one_step(net, x, 1.0, eq_set(scaled), 1)
        np.testing.assert_allclose(a, b, atol=1e-9)
        c = attack.eq_one_step(net, x, 1.0, eq_set(2.0 * phi), 1)
        np.testing.assert_allclose(a, c, atol=1e-9)


def test_free_step():
    model = ConstantGradient([2.0, -4.0, 1.0])
    assert not attack.free_step(model, [0, 1, 2], np.zeros(3), 1.0, 0).any()
    np.testing.assert_allclose(attack.free_step(model, [], np.zeros(3), 1.0, 0), [0.5, -1.0, 0.25])
    r = attack.free_step(model, [1], np.zeros(3), 0.3, 0)
    np.testing.assert_allclose(r, [0.3, 0.0, 0.15])
    assert np.max(np.abs(r)) == pytest.approx(0.3)


def test_gen_eq_per_step_zero_and_early_exit():
    cs = eq_set([[1, -1]])
    delta = np.array([0.2, 0.2])
    model = ConstantGradient([1.0, 0.0])
    v, n = attack.gen_eq_per(delta, model, np.zeros(2), 0, 1.0, cs, 0)
    np.testing.assert_array_equal(v, delta)
    assert n == 0
    fooled = ConstantGradient([1.0, 0.0], flip_at=-1.0)
    v, n = attack.gen_eq_per(np.zeros(2), fooled, np.zeros(2), 10, 1.0, cs, 0)
    assert n == 0 and not v.any() and fooled.calls == 0


def test_gen_eq_per_stops_on_misclassification():
    cs = eq_set([[1, -1]])
    model = ConstantGradient([1.0, 1.0], flip_at=2.5)
    v, n = attack.gen_eq_per(np.zeros(2), model, np.zeros(2), 40, 1.0, cs, 0)
    np.testing.assert_allclose(v, [3.0, 3.0])
    assert n == 3


def test_gen_eq_per_accumulated_stays_valid(rng):
    for _ in range(30):
        comp = [0, 2, 3, 5, 6]
        cs = eq_set(random_rank_deficient(rng, 3, 5, 2), comp)
        net = _random_net(rng, 8)
        m = rng.normal(size=8)
        v, n = attack.gen_eq_per(np.zeros(8), net, m, 15, 0.3, cs, net.predict(m))
        assert n <= 15
        assert cons.validate_perturbation(cs, v[comp])
        assert not np.delete(v, comp).any()


def test_gen_iq_per_unviolated_walk_equals_free_steps():
    cs = ConstraintSet([[1.0, 1.0]], [1e6], "inequality", [0, 1])
    model = Quadratic()
    m = np.array([0.3, 0.1])
    v, n = attack.gen_iq_per(np.zeros(2), model, [], m, 6, 0.1, cs, 0)
    # freeStep results are only accepted on the following check, so the
    # returned point lags the probe by one step
    x = m.copy()
    for _ in range(5):
        x = x + attack.free_step(model, [], x, 0.1, 0)
    np.testing.assert_allclose(m + v, x)
    assert n == 6


def test_gen_iq_per_boundary_walk():
    # 2x + y <= 2, start inside at (0.4, 0.5)
    cs = ConstraintSet([[2.0, 1.0]], [2.0], "inequality", [0, 1])
    model = Quadratic()
    m = np.array([0.4, 0.5])
    v, n = attack.gen_iq_per(np.zeros(2), model, [], m, 30, 0.15, cs, 0)
    end = m + v
    assert cons.chk_iq(cs, end) == []
    assert model.loss(end) > model.loss(m)
    # a pure gradient walk stays on the ray through m; leaving it means the
    # boundary-parallel step was used
    ratio_start = m[1] / m[0]
    assert abs(end[1] / end[0] - ratio_start) > 0.05
    # moving along the boundary direction (-0.5, 1) from the last free point
    probe, _ = attack.gen_iq_per(np.zeros(2), model, [], m, 4, 0.15, cs, 0)
    assert 2 * (m + probe)[0] + (m + probe)[1] <= 2.0


def test_gen_iq_per_full_rank_hold_stops():
    # both rows violated by the very first probe pins x and y
    cs = ConstraintSet([[1.0, 0.0], [0.0, 1.0]], [0.55, 0.55], "inequality", [0, 1])
    model = Quadratic()
    m = np.array([0.5, 0.5])
    v, n = attack.gen_iq_per(np.zeros(2), model, [], m, 50, 0.2, cs, 0)
    assert cons.chk_iq(cs, m + v) == []
    assert n < 50


def test_gen_iq_per_random_swat_instances(rng):
    cs = ConstraintSet(SWAT_PHI, SWAT_TILDE, "inequality", range(7))
    for _ in range(100):
        net = _random_net(rng, 7)
        m = np.array([2.45, 2.24, 1.71, 1.71, 1.29, 0.735, 0.315]) + rng.normal(scale=0.005, size=7)
        if cons.chk_iq(cs, m):
            continue
        v, n = attack.gen_iq_per(np.zeros(7), net, [], m, 50, 0.06, cs, net.predict(m))
        assert cons.chk_iq(cs, m + v) == []


def test_supreme_attack():
    model = ConstantGradient([2.0, -8.0])
    res = attack.supreme_attack(model, np.zeros(2), 0, 1, 0.5)
    np.testing.assert_allclose(res.perturbation, [0.125, -0.5])
    flat = ConstantGradient([0.0, 0.0])
    res = attack.supreme_attack(flat, np.ones(2), 0, 5, 0.5)
    assert not res.perturbation.any() and not res.succeeded
    quick = ConstantGradient([1.0, 0.0], flip_at=1.5)
    res = attack.supreme_attack(quick, np.zeros(2), 0, 40, 1.0)
    assert res.succeeded and res.steps_used == 2


def test_sample_eva_counting():
    model = ConstantGradient([1.0], flip_at=0.5)
    muc = np.array([[0.0], [0.1], [0.2], [0.6]])
    assert attack.sample_eva(model, 0, muc[:3], np.zeros(1)) == 1.0
    assert attack.sample_eva(model, 0, muc, np.zeros(1)) == 0.75
    assert attack.sample_eva(model, 0, muc, np.ones(1)) == 0.0
    with pytest.raises(EmptyDataset):
        attack.sample_eva(model, 0, np.zeros((0, 1)), np.zeros(1))


def test_uni_with_single_true_sample_matches_gen_eq_per(rng):
    comp = [0, 1, 2, 4]
    cs = eq_set(random_rank_deficient(rng, 2, 4, 1), comp)
    net = _random_net(rng, 6)
    m = rng.normal(size=6)
    y = net.predict(m)
    res = attack.uni_adv_measur(net, m[None, :], m, 1.0, y, 1, cs, 20, 0.3)
    v, _ = attack.gen_eq_per(np.zeros(6), net, m, 20, 0.3, cs, y)
    np.testing.assert_allclose(res.perturbation, v)


def test_uni_lambda_one_stops_on_first_fooled_member():
    cs = eq_set([[1.0, -1.0]], comp=[0, 1])
    model = ConstantGradient([1.0, 1.0, 0.0], flip_at=0.5)
    mu = np.array([[0.0, 0.0, 5.0], [0.0, 0.0, -5.0], [0.0, 0.0, 1.0]])
    res = attack.uni_adv_measur(model, mu, np.zeros(3), 1.0, 0, 3, cs, 10, 1.0)
    assert res.succeeded
    assert res.steps_used == 1
    assert res.perturbation[2] == 0.0


def test_uni_uses_only_compromised_values_of_m(rng):
    cs = ConstraintSet([[-1.0, 1.0]], [0.0], "inequality", [0, 1])
    net = _random_net(rng, 5)
    mu = rng.normal(size=(4, 5))
    m = np.array([1.0, 0.5, 3.0, 3.0, 3.0])
    other = m.copy()
    other[2:] = -7.0
    a = attack.uni_adv_measur(net, mu, m, 0.5, 0, 2, cs, 10, 0.1)
    b = attack.uni_adv_measur(net, mu, other, 0.5, 0, 2, cs, 10, 0.1)
    np.testing.assert_array_equal(a.perturbation, b.perturbation)
    assert not a.perturbation[2:].any()
    assert cons.chk_iq(cs, a.adversarial[:2]) == []


def test_attack_config_validation():
    with pytest.raises(InvalidSpec):
        AttackConfig(step=0)
    with pytest.raises(InvalidSpec):
        AttackConfig(lambda_threshold=0.0)
    with pytest.raises(InvalidSpec):
        AttackConfig(size=-1.0)
