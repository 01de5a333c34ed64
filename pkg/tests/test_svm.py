import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from serieskernel import svm
from serieskernel.errors import ConfigError, ConvergenceError, DegenerateProblemError, DimensionError


def test_identity_two_points():
    m = svm.train(np.eye(2), [1, -1], 10.0)
    assert np.allclose(m.alphas, [1, 1], atol=1e-9)
    assert m.bias == pytest.approx(0.0, abs=1e-9)
    assert np.allclose(svm.decide(m, np.eye(2)), [1, -1], atol=1e-9)
    assert svm.decide(m, [[1.0, 0.0]])[0] == pytest.approx(1.0, abs=1e-9)


def test_zero_cross_row_gives_bias():
    m = svm.train(np.eye(2), [1, -1], 10.0)
    assert svm.decide(m, [[0.0, 0.0]])[0] == m.bias


def test_large_c_inactive():
    a = svm.train(np.eye(2), [1, -1], 1e6)
    b = svm.train(np.eye(2), [1, -1], 1e300)
    assert np.allclose(a.alphas, b.alphas) and a.bias == pytest.approx(b.bias)


def test_duplicated_opposite_points_at_box():
    m = svm.train(np.ones((2, 2)), [1, -1], 0.5)
    assert np.allclose(m.alphas, [0.5, 0.5])


def test_margin_support_vector(rng):
    x = np.r_[rng.normal(2, 0.3, size=(5, 2)), rng.normal(-2, 0.3, size=(5, 2))]
    y = np.r_[np.ones(5), -np.ones(5)]
    k = x @ x.T
    m = svm.train(k, y, 1e3)
    free = np.flatnonzero((m.alphas > 1e-8) & (m.alphas < m.C - 1e-8))
    assert free.size
    f = svm.decide(m, k[free])
    assert np.allclose(np.abs(f), 1.0, atol=1e-2)


def test_errors():
    with pytest.raises(DegenerateProblemError):
        svm.train(np.eye(2), [1, 1], 1.0)
    with pytest.raises(ConfigError):
        svm.train(np.eye(2), [1, 2], 1.0)
    with pytest.raises(ConfigError):
        svm.train(np.eye(2), [1, -1], 0.0)
    with pytest.raises(DimensionError):
        svm.train(np.eye(3), [1, -1], 1.0)
    m = svm.train(np.eye(2), [1, -1], 1.0)
    with pytest.raises(DimensionError):
        svm.decide(m, np.ones((1, 3)))


def test_convergence_error(rng):
    x = rng.normal(size=(30, 3))
    y = np.where(rng.uniform(size=30) > 0.5, 1.0, -1.0)
    with pytest.raises(ConvergenceError, match="KKT gap"):
        svm.train(x @ x.T, y, 100.0, max_iter=1)


def test_two_classes_collapse(rng):
    x = rng.normal(size=(10, 2))
    labels = ["b" if v > 0 else "a" for v in x[:, 0]]
    k = x @ x.T + 1.0
    ovr = svm.train_multiclass(k, labels, 1.0)
    assert len(ovr.models) == 1
    f = svm.decide(ovr.models[0], k)
    want = ["a" if v > 0 else "b" for v in f]
    assert svm.predict_multiclass(ovr, k) == want


def test_three_singletons():
    ovr = svm.train_multiclass(np.eye(3), ["x", "y", "z"], 10.0)
    assert svm.predict_multiclass(ovr, np.eye(3)) == ["x", "y", "z"]


def test_single_class_multiclass():
    with pytest.raises(DegenerateProblemError):
        svm.train_multiclass(np.eye(3), [1, 1, 1], 1.0)


def test_tie_goes_to_smallest_class():
    ovr = svm.train_multiclass(np.eye(3), [2, 0, 1], 10.0)
    # a zero cross row leaves only the (equal) biases
    biases = [m.bias for m in ovr.models]
    assert np.allclose(biases, biases[0])
    assert svm.predict_multiclass(ovr, np.zeros((1, 3))) == [0]


def _random_problem(seed):
    r = np.random.default_rng(seed)
    n = int(r.integers(4, 31))
    x = r.normal(size=(n, 3))
    y = np.where(x[:, 0] + 0.5 * r.normal(size=n) > 0, 1.0, -1.0)
    if abs(y.sum()) == n:
        y[0] = -y[0]
    gamma = float(r.uniform(0.1, 2.0))
    sq = ((x[:, None, :] - x[None, :, :]) ** 2).sum(-1)
    return np.exp(-gamma * sq), y, float(10 ** r.uniform(-1, 2))


@pytest.mark.parametrize("seed", range(100))
def test_dual_feasibility(seed):
    k, y, c = _random_problem(seed)
    m = svm.train(k, y, c)
    assert np.all(m.alphas >= 0) and np.all(m.alphas <= c)
    assert abs(m.alphas @ y) <= 1e-8 * max(1.0, c)
    assert m.kkt_gap <= 1e-3


def test_separable_reproduces_signs(rng):
    x = np.r_[rng.normal(3, 0.5, size=(8, 2)), rng.normal(-3, 0.5, size=(8, 2))]
    y = np.r_[np.ones(8), -np.ones(8)]
    k = x @ x.T
    m = svm.train(k, y, 1e4)
    assert np.array_equal(np.sign(svm.decide(m, k)), y)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.1, 10.0))
def test_scaling_invariance(seed, scale):
    k, y, c = _random_problem(seed)
    a = svm.decide(svm.train(k, y, c, tol=1e-6), k)
    b = svm.decide(svm.train(scale * k, y, c / scale, tol=1e-6), scale * k)
    clear = np.abs(a) > 1e-3
    assert np.array_equal(np.sign(a[clear]), np.sign(b[clear]))
