import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from serieskernel import gpr
from serieskernel.errors import ConfigError, SingularShiftError
from serieskernel.skernel import SeriesKernelConfig, bundle, cross_gram
from serieskernel.tsdata import Dataset, TimeSeries, split_forecast
from serieskernel.vkernels import VectorKernel

from conftest import shared_grid

CFG = SeriesKernelConfig(VectorKernel("rbf", 0.5, 0.01), VectorKernel("rbf", 0.2))


def _data(rng, n=6, length=8):
    ds = shared_grid(rng, n, length)
    return ds, split_forecast(ds, 3)


def test_shapes_and_minimal_fit(rng):
    ds, sp = _data(rng, 1)
    m = gpr.fit(CFG, 1.0, ds, sp)
    assert len(m.bundle) == 1
    assert gpr.predict(m, ds, sp).shape == (1, 3, 1)


def test_duplicate_training_series_singular():
    t = np.arange(5.0)
    v = np.sin(t)
    ds = Dataset((TimeSeries(t, v, "a"), TimeSeries(t, v, "b")))
    with pytest.raises(SingularShiftError):
        gpr.fit(CFG, 0.0, ds, split_forecast(ds, 2))


def test_negative_noise(rng):
    ds, sp = _data(rng)
    with pytest.raises(ConfigError):
        gpr.fit(CFG, -1.0, ds, sp)


def test_interpolates_training_series(rng):
    ds, sp = _data(rng, 4)
    m = gpr.fit(CFG, 1e-12, ds, sp)
    pred = gpr.predict(m, ds.subset([2]), sp)
    assert np.allclose(pred[0], sp.test_window(ds[2]).values, atol=1e-6)


def test_zero_targets(rng):
    t = np.arange(6.0)
    ds = Dataset(tuple(TimeSeries(t, np.r_[rng.normal(size=4), 0, 0], str(i)) for i in range(4)))
    sp = split_forecast(ds, 2)
    assert not np.any(gpr.predict(gpr.fit(CFG, 0.1, ds, sp), ds, sp))


def test_two_by_two_oracle(rng):
    ds, sp = _data(rng, 3)
    train, test = ds.subset([0, 1]), ds.subset([2])
    m = gpr.fit(CFG, 0.3, train, sp)
    inputs, y = gpr.window_data(train, sp)
    tin, _ = gpr.window_data(test, sp)
    k = cross_gram(CFG, inputs)
    ks = cross_gram(CFG, tin, inputs)
    want = ks @ np.linalg.solve(k + 0.3 * np.eye(2), y[:, :, 0])
    assert np.allclose(gpr.predict(m, test, sp)[:, :, 0], want, rtol=1e-10)


def test_huge_noise_shrinks_to_zero(rng):
    ds, sp = _data(rng)
    m = gpr.fit(CFG, 1e12, ds, sp)
    pred = gpr.predict(m, ds, sp)
    _, y = gpr.window_data(ds, sp)
    assert np.abs(pred).max() <= 1e-6 * np.abs(y).max() * len(ds)


def test_centering_adds_mean_back(rng):
    ds, sp = _data(rng)
    m = gpr.fit(CFG, 1e12, ds, sp, center=True)
    _, y = gpr.window_data(ds, sp)
    assert np.allclose(gpr.predict(m, ds, sp), y.mean(axis=0), atol=1e-6)


def test_with_noise_reuses_bundle(rng):
    ds, sp = _data(rng)
    m = gpr.fit(CFG, 0.1, ds, sp)
    m2 = m.with_noise(1.0)
    assert m2.bundle is m.bundle
    assert np.allclose(gpr.predict(m2, ds, sp), gpr.predict(gpr.fit(CFG, 1.0, ds, sp), ds, sp), rtol=1e-12)


def test_posterior_mean_matches_predict(rng):
    ds, sp = _data(rng)
    inputs, y = gpr.window_data(ds, sp)
    g = cross_gram(CFG, inputs)
    direct = gpr.posterior_mean(bundle(g), 0.5, y, g)
    assert np.allclose(direct, gpr.predict(gpr.fit(CFG, 0.5, ds, sp), ds, sp), rtol=1e-12)


def test_predict_variance(rng):
    ds, sp = _data(rng)
    m = gpr.fit(CFG, 1e-3, ds, sp)
    var = gpr.predict_variance(m, ds, sp)
    assert var.shape == (len(ds),) and np.all(var >= 0)
    far = gpr.fit(CFG, 1e12, ds, sp)
    prior = np.diag(cross_gram(CFG, gpr.window_data(ds, sp)[0]))
    assert np.allclose(gpr.predict_variance(far, ds, sp), prior, rtol=1e-6)


def test_multivariate_targets(rng):
    ds = shared_grid(rng, 5, 7, d=2)
    sp = split_forecast(ds, 2)
    assert gpr.predict(gpr.fit(CFG, 0.1, ds, sp), ds, sp).shape == (5, 2, 2)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_linear_in_targets(seed):
    r = np.random.default_rng(seed)
    t = np.arange(7.0)
    past = r.normal(size=(5, 4))
    y1, y2 = r.normal(size=(5, 3)), r.normal(size=(5, 3))

    def run(y):
        ds = Dataset(tuple(TimeSeries(t, np.r_[past[i], y[i]], str(i)) for i in range(5)))
        sp = split_forecast(ds, 3)
        return gpr.predict(gpr.fit(CFG, 0.2, ds, sp), ds, sp)

    assert np.allclose(run(y1 + y2), run(y1) + run(y2), rtol=1e-9, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_exchangeable(seed):
    r = np.random.default_rng(seed)
    ds, sp = _data(r, 6)
    perm = r.permutation(5)
    train = ds.subset(range(5))
    a = gpr.predict(gpr.fit(CFG, 0.05, train, sp), ds.subset([5]), sp)
    b = gpr.predict(gpr.fit(CFG, 0.05, train.subset(perm), sp), ds.subset([5]), sp)
    assert np.allclose(a, b, rtol=1e-10, atol=1e-10)
