import math
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from serieskernel.baselines import DtwParams, dtw_distance, forecast_baseline, nn1_classify
from serieskernel.errors import ConfigError, DataFormatError, DimensionError
from serieskernel.tsdata import Dataset, TimeSeries, split_forecast


def brute_force_dtw(x, y):
    """Minimum over every monotone alignment path, enumerated explicitly."""
    n, m = len(x), len(y)

    @lru_cache(maxsize=None)
    def paths(i, j):
        if (i, j) == (n - 1, m - 1):
            return [[(i, j)]]
        out = []
        for di, dj in ((1, 0), (0, 1), (1, 1)):
            a, b = i + di, j + dj
            if a < n and b < m:
                out += [[(i, j)] + p for p in paths(a, b)]
        return out

    return math.sqrt(min(sum((x[i] - y[j]) ** 2 for i, j in p) for p in paths(0, 0)))


def test_dtw_examples():
    assert dtw_distance([1, 2, 3], [1, 2, 3]) == 0.0
    assert dtw_distance([0, 0], [1]) == pytest.approx(math.sqrt(2), rel=1e-15)
    assert dtw_distance([1], [3]) == 2.0
    with pytest.raises(ConfigError):
        dtw_distance([], [1.0])
    with pytest.raises(ConfigError):
        DtwParams(window=-1)


_seq = st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=6)


@settings(max_examples=150, deadline=None)
@given(_seq, _seq)
def test_dtw_brute_force_oracle(x, y):
    d = dtw_distance(x, y)
    assert d == pytest.approx(brute_force_dtw(tuple(x), tuple(y)), rel=1e-12, abs=1e-12)
    assert d == dtw_distance(y, x)
    assert dtw_distance(x, x) == 0.0


def test_window_constrains(rng):
    x, y = rng.normal(size=20), rng.normal(size=20)
    free = dtw_distance(x, y)
    band = dtw_distance(x, y, DtwParams(window=2))
    diag = dtw_distance(x, y, DtwParams(window=0))
    assert free <= band <= diag
    assert diag == pytest.approx(np.linalg.norm(x - y), rel=1e-12)


def _labelled(rng, n, length=12):
    t = np.arange(length, dtype=float)
    return Dataset(tuple(TimeSeries(t, rng.normal(size=length), f"s{i}") for i in range(n)),
                   [f"c{i % 3}" for i in range(n)])


def test_nn1_verbatim_copies(rng):
    train = _labelled(rng, 9)
    assert nn1_classify(train, train) == list(train.labels)
    assert nn1_classify(train, train, threads=2) == list(train.labels)


def test_nn1_errors(rng):
    train = _labelled(rng, 3)
    with pytest.raises(DataFormatError):
        nn1_classify(Dataset(()), train)
    with pytest.raises(DataFormatError):
        nn1_classify(Dataset(train.series), train)
    multi = Dataset((TimeSeries([0.0, 1.0], np.ones((2, 2)), "m"),), ["a"])
    with pytest.raises(DimensionError):
        nn1_classify(multi, multi)


def test_nn1_tie_earliest():
    t = np.arange(3.0)
    train = Dataset((TimeSeries(t, [0, 0, 0], "a"), TimeSeries(t, [2, 2, 2], "b")), ["x", "y"])
    test = Dataset((TimeSeries(t, [1, 1, 1], "q"),), ["?"])
    assert nn1_classify(train, test) == ["x"]


# -- forecasting baselines ---------------------------------------------------


def _forecast_data(rng, n=6, length=10):
    t = np.cumsum(rng.uniform(0.5, 1.5, size=length))
    ds = Dataset(tuple(TimeSeries(t, rng.normal(size=(length, 2)), str(i)) for i in range(n)))
    return ds, split_forecast(ds, 3)


def test_zeros_and_shapes(rng):
    ds, sp = _forecast_data(rng)
    out = forecast_baseline("zeros", ds.subset([0, 1]), ds.subset([2, 3, 4]), sp)
    assert out.shape == (3, 3, 2) and not out.any()


def test_series_means(rng):
    ds, sp = _forecast_data(rng)
    out = forecast_baseline("series_means", ds, ds.subset([1]), sp)
    assert np.allclose(out[0], sp.train_window(ds[1]).values.mean(axis=0))


def test_timestamp_means_identical_rows(rng):
    ds, sp = _forecast_data(rng)
    train, test = ds.subset(range(4)), ds.subset([4, 5])
    out = forecast_baseline("timestamp_means", train, test, sp)
    assert np.array_equal(out[0], out[1])
    want = np.mean([sp.test_window(s).values for s in train], axis=0)
    assert np.allclose(out[0], want)


def test_linear_interpolator_exact_on_lines():
    t = np.array([0.0, 0.5, 2.0, 3.0, 4.5, 6.0])
    ds = Dataset(tuple(TimeSeries(t, 1.5 * t - 2 + i, str(i)) for i in range(3)))
    sp = split_forecast(ds, 2)
    out = forecast_baseline("linear_interpolator", ds, ds, sp)
    truth = np.stack([sp.test_window(s).values for s in ds])
    assert np.allclose(out, truth, atol=1e-12)


def test_unknown_kind(rng):
    ds, sp = _forecast_data(rng)
    with pytest.raises(ConfigError):
        forecast_baseline("arima", ds, ds, sp)
