import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quditclass.datasets import Dataset, gen_xor
from quditclass.model import SpecError, expectation_value, readout
from quditclass.training import (
    FIT_MARGIN,
    CrossEntropy,
    NotApplicableError,
    SegmentLoss,
    SGDConfig,
    TrainConfig,
    _loss_terms,
    accuracy,
    cross_entropy_loss,
    default_loss,
    fit_multistart,
    fit_sgd,
    gradient,
    gradient_fd,
    loss_value,
    parameter_shift_gradient,
    segment_loss,
)
from quditclass.zoo import builtin_model


def bisect(f, lo, hi, tol=1e-14):
    flo = f(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def fd_oracle(spec, theta, data, loss, h=1e-5):
    theta = np.asarray(theta, dtype=float)
    out = np.zeros_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        out[i] = (loss_value(spec, theta + e, data, loss) - loss_value(spec, theta - e, data, loss)) / (2 * h)
    return out


def random_data(rng, spec, n=12):
    x = rng.uniform(-1, 1, (n, spec.k))
    return Dataset(x, rng.integers(0, spec.classes, n), spec.classes)


def test_binary_segment_loss_example():
    spec = builtin_model("qubit-A")
    # x = 0: only the rotation acts and <sz> = cos(2 w)
    w = math.acos(-0.3) / 2
    data = Dataset(np.zeros((1, 2)), [1], 2)
    assert readout(spec, [1.0, w], data.x)[0] == pytest.approx(-0.3)
    assert segment_loss(spec, [1.0, w], data) == pytest.approx(0.09)
    assert segment_loss(spec, [1.0, w], Dataset(np.zeros((1, 2)), [0], 2)) == 0.0


def test_three_class_segment_loss_example():
    spec = builtin_model("qutrit-3class")
    theta = np.zeros(9)

    def lz_minus(v):
        th = theta.copy()
        th[6] = v  # weight of L_x
        return expectation_value(spec, th, [[0.0, 0.0]])[0] - 0.1

    w = bisect(lz_minus, 0.0, 1.5)
    assert lz_minus(w) == pytest.approx(0.0, abs=1e-12)
    theta[6] = w
    data = Dataset(np.zeros((1, 2)), [0], 3)
    assert segment_loss(spec, theta, data) == pytest.approx((0.1 + 2 / 3) ** 2, abs=1e-10)
    assert segment_loss(spec, theta, Dataset(np.zeros((1, 2)), [1], 3)) == 0.0


def test_cross_entropy_examples():
    spec = builtin_model("qutrit-uci")
    # theta = 0 leaves the ground state: p = (1, 0, 0)
    data = Dataset(np.zeros((1, 4)), [0], 3)
    assert cross_entropy_loss(spec, np.zeros(5), data) == pytest.approx(0.0, abs=1e-15)
    comp = spec.compiled
    uniform = np.full((1, 1, 3), 1 / 3)
    val, _ = _loss_terms(comp, uniform, np.array([2]), CrossEntropy())
    assert val[0] == pytest.approx(math.log(3))
    two = np.array([[[0.5, 0.25, 0.25], [0.1, 0.8, 0.1]]])
    val, _ = _loss_terms(comp, two, np.array([0, 1]), CrossEntropy())
    assert val[0] == pytest.approx(-(math.log(0.5) + math.log(0.8)) / 2)


def test_cross_entropy_matches_definition(rng):
    spec = builtin_model("qutrit-uci")
    for use_softmax in (False, True):
        th = rng.uniform(-2, 2, 5)
        data = random_data(rng, spec)
        p = readout(spec, th, data.x)
        if use_softmax:
            p = np.exp(p) / np.exp(p).sum(axis=1, keepdims=True)
        want = -np.mean(np.log(np.clip(p[np.arange(len(data)), data.labels], 1e-12, 1)))
        got = loss_value(spec, th, data, CrossEntropy(use_softmax=use_softmax))
        assert got == pytest.approx(want, rel=1e-12)


def test_loss_readout_mismatch():
    with pytest.raises(SpecError):
        cross_entropy_loss(builtin_model("qubit-A"), [1.0, 1.0], Dataset(np.zeros((1, 2)), [0], 2))
    with pytest.raises(SpecError):
        segment_loss(builtin_model("qutrit-uci"), np.zeros(5), Dataset(np.zeros((1, 4)), [0], 3))


def test_default_loss():
    assert default_loss(builtin_model("qubit-A")) == SegmentLoss(FIT_MARGIN)
    assert isinstance(default_loss(builtin_model("qutrit-uci")), CrossEntropy)


@pytest.mark.parametrize("name,loss", [
    ("qubit-A", SegmentLoss()),
    ("qubit-B", SegmentLoss()),
    ("qubit-E", SegmentLoss(0.05)),
    ("qutrit-B", SegmentLoss()),
    ("qutrit-3class", SegmentLoss()),
    ("qutrit-uci", CrossEntropy()),
    ("qutrit-uci", CrossEntropy(use_softmax=True)),
])
def test_gradient_matches_finite_differences(name, loss, rng):
    spec = builtin_model(name)
    for _ in range(4):
        th = rng.uniform(-2, 2, spec.num_params)
        data = random_data(rng, spec)
        g = gradient(spec, th, data, loss)
        fd = fd_oracle(spec, th, data, loss)
        scale = max(np.abs(fd).max(), 1e-8)
        assert np.abs(g - fd).max() / scale <= 1e-4


def test_gradient_fd_agrees_with_oracle(rng):
    spec = builtin_model("qubit-B")
    th = rng.uniform(-2, 2, 4)
    data = random_data(rng, spec)
    np.testing.assert_allclose(gradient_fd(spec, th, data, SegmentLoss()),
                               fd_oracle(spec, th, data, SegmentLoss()), atol=1e-12)


def test_gradient_fd_scales_with_loss(rng):
    # the segment loss is a sum, so duplicating the data doubles it
    spec = builtin_model("qubit-D")
    th = rng.uniform(-2, 2, 5)
    data = random_data(rng, spec)
    doubled = Dataset(np.vstack([data.x, data.x]), np.concatenate([data.labels] * 2), 2)
    np.testing.assert_allclose(gradient_fd(spec, th, doubled, SegmentLoss()),
                               2 * gradient_fd(spec, th, data, SegmentLoss()), rtol=1e-9, atol=1e-12)


def test_gradient_fd_is_second_order():
    spec = builtin_model("qutrit-uci")
    rng = np.random.default_rng(3)
    th = rng.uniform(-1, 1, 5)
    data = random_data(rng, spec)
    exact = gradient(spec, th, data)
    e1 = np.abs(gradient_fd(spec, th, data, h=1e-2) - exact).max()
    e2 = np.abs(gradient_fd(spec, th, data, h=5e-3) - exact).max()
    assert e2 < e1
    assert e1 / e2 == pytest.approx(4, rel=0.2)


def test_gradient_of_empty_dataset_is_zero():
    spec = builtin_model("qubit-B")
    empty = Dataset(np.zeros((0, 2)), np.zeros(0, dtype=int), 2)
    np.testing.assert_array_equal(gradient(spec, [1.0, 0.2, 0.3, 0.4], empty), np.zeros(4))


def test_gradient_zero_when_everything_is_correct():
    spec = builtin_model("qubit-A")
    w = 0.3
    data = Dataset(np.zeros((3, 2)), [1, 1, 1], 2)  # <sz> = cos(0.6) > 0
    assert accuracy(spec, [1.0, w], data) == 1.0
    np.testing.assert_array_equal(gradient(spec, [1.0, w], data, SegmentLoss()), np.zeros(2))


@pytest.mark.parametrize("name", ["qubit-A", "qubit-E", "qubit-F"])
def test_parameter_shift_matches_exact(name, rng):
    spec = builtin_model(name)
    for _ in range(5):
        th = rng.uniform(-2, 2, spec.num_params)
        data = random_data(rng, spec)
        np.testing.assert_allclose(parameter_shift_gradient(spec, th, data, SegmentLoss()),
                                   gradient(spec, th, data, SegmentLoss()), atol=1e-8)


@pytest.mark.parametrize("name,match", [("qutrit-uci", "non-involutory"), ("qubit-B", "shares layer")])
def test_parameter_shift_not_applicable(name, match):
    spec = builtin_model(name)
    data = Dataset(np.full((1, spec.k), 0.3), [0], spec.classes)
    with pytest.raises(NotApplicableError, match=match):
        parameter_shift_gradient(spec, np.zeros(spec.num_params), data)


def test_parameter_shift_constant_direction():
    # with every input at 0 the encoding weight has no effect
    spec = builtin_model("qubit-A")
    data = Dataset(np.zeros((2, 2)), [0, 1], 2)
    g = parameter_shift_gradient(spec, [0.7, 1.1], data, SegmentLoss())
    assert g[0] == 0.0


def test_accuracy_examples():
    spec = builtin_model("qubit-A")
    data = Dataset(np.zeros((4, 2)), [0, 1, 0, 1], 2)
    # constant predictor on balanced labels
    assert accuracy(spec, [1.0, 0.1], data) == 0.5


@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**31 - 1))
@settings(max_examples=30, deadline=None)
def test_segment_loss_zero_iff_accuracy_one(s, w, seed):
    spec = builtin_model("qubit-A")
    rng = np.random.default_rng(seed)
    data = Dataset(rng.uniform(-1, 1, (6, 2)), rng.integers(0, 2, 6), 2)
    loss = segment_loss(spec, [s, w], data)
    acc = accuracy(spec, [s, w], data)
    assert loss >= 0
    assert (loss == 0) == (acc == 1.0)
    # accuracy = 1 - |T| / n
    vals = readout(spec, [s, w], data.x)
    wrong = np.sum((vals >= 0).astype(int) != data.labels)
    assert acc == pytest.approx(1 - wrong / len(data))


def test_fit_multistart_solves_small_xor():
    spec = builtin_model("qubit-A")
    data = gen_xor(80, 0.0, seed=7)
    res = fit_multistart(spec, data)
    assert res.train_accuracy == 1.0
    assert res.best_loss == min(res.history)
    assert res.best_restart_index == int(np.argmin(res.history))


def test_single_restart_is_plain_gradient_descent():
    spec = builtin_model("qubit-B")
    data = gen_xor(20, 0.1, seed=1)
    cfg = TrainConfig(restarts=1, max_iters=40, seed=5)
    res = fit_multistart(spec, data, cfg, SegmentLoss(0.05))
    from quditclass.training import restart_rng
    th = restart_rng(5, 0).uniform(-np.pi, np.pi, 4)
    for _ in range(40):
        g = gradient(spec, th, data, SegmentLoss(0.05))
        if loss_value(spec, th, data, SegmentLoss(0.05)) <= cfg.loss_tol or np.linalg.norm(g) <= cfg.grad_tol:
            break
        th = th - cfg.learning_rate * g
    np.testing.assert_allclose(res.best_params.flat(), th, atol=1e-12)


def test_fit_is_deterministic_and_monotone_in_restarts():
    spec = builtin_model("qubit-B")
    data = gen_xor(24, 0.15, seed=2)
    a = fit_multistart(spec, data, TrainConfig(restarts=6, max_iters=60))
    b = fit_multistart(spec, data, TrainConfig(restarts=6, max_iters=60))
    assert a.to_dict() == b.to_dict()
    more = fit_multistart(spec, data, TrainConfig(restarts=10, max_iters=60))
    assert more.history[:6] == a.history
    assert more.best_loss <= a.best_loss


def test_train_config_round_trip_and_validation():
    cfg = TrainConfig(restarts=3, sgd=SGDConfig(batch_size=4))
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError):
        TrainConfig(restarts=0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0)
    with pytest.raises(ValueError):
        TrainConfig.from_dict({"nope": 1})


def test_fit_sgd_deterministic_and_patience_zero():
    spec = builtin_model("qutrit-uci")
    rng = np.random.default_rng(0)
    data = Dataset(rng.uniform(-1, 1, (40, 4)), np.arange(40) % 3, 3)
    cfg = TrainConfig(restarts=3, learning_rate=0.05, sgd=SGDConfig(epochs=15, patience=0))
    a = fit_sgd(spec, data, cfg)
    b = fit_sgd(spec, data, cfg)
    assert a.to_dict() == b.to_dict()
    # patience 0: each restart stops at its first non-improving epoch
    assert all(e <= 15 for e in a.iterations)
    assert a.best_loss == min(a.history)


def test_fit_sgd_small_dataset_warns():
    spec = builtin_model("qutrit-uci")
    data = Dataset(np.random.default_rng(1).uniform(-1, 1, (6, 4)), [0, 1, 2, 0, 1, 2], 3)
    with pytest.warns(UserWarning, match="batch_size"):
        fit_sgd(spec, data, TrainConfig(restarts=2, sgd=SGDConfig(epochs=2)))
