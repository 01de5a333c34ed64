"""Reference strategies: DTW 1-NN classification and naive forecasters."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np

from .errors import ConfigError, DataFormatError, DimensionError
from .tsdata import Dataset, SeriesSplit

__all__ = [
    "DtwParams",
    "dtw_distance",
    "nn1_classify",
    "FORECAST_BASELINES",
    "forecast_baseline",
]


@dataclass(frozen=True)
class DtwParams:
    """``window`` is the Sakoe-Chiba half-width; None means unconstrained."""

    window: int | None = None

    def __post_init__(self):
        if self.window is not None and self.window < 0:
            raise ConfigError(f"DTW window must be >= 0, got {self.window}")


@numba.njit(cache=True, nogil=True)
def _dtw(x, y, window):
    n, m = x.size, y.size
    w = max(window, abs(n - m)) if window >= 0 else max(n, m)
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        lo = max(1, i - w)
        hi = min(m, i + w)
        for j in range(lo, hi + 1):
            diff = x[i - 1] - y[j - 1]
            best = acc[i - 1, j - 1]
            if acc[i - 1, j] < best:
                best = acc[i - 1, j]
            if acc[i, j - 1] < best:
                best = acc[i, j - 1]
            acc[i, j] = diff * diff + best
    return np.sqrt(acc[n, m])


@numba.njit(cache=True, nogil=True)
def _nearest(query, train_values, train_lengths, window):
    best = np.inf
    best_i = -1
    for i in range(train_lengths.size):
        d = _dtw(query, train_values[i, : train_lengths[i]], window)
        # strict < keeps the earliest training series on ties
        if d < best:
            best = d
            best_i = i
    return best_i


def dtw_distance(x, y, p: DtwParams = DtwParams()) -> float:
    """DTW with squared-difference local cost and a final square root."""
    x = np.ascontiguousarray(x, dtype=float).ravel()
    y = np.ascontiguousarray(y, dtype=float).ravel()
    if x.size == 0 or y.size == 0:
        raise ConfigError("DTW needs nonempty sequences")
    return float(_dtw(x, y, -1 if p.window is None else p.window))


def _univariate(ds: Dataset, role: str) -> list[np.ndarray]:
    if ds.d != 1:
        raise DimensionError(f"{role}: DTW 1-NN needs univariate series")
    return [np.ascontiguousarray(s.values[:, 0]) for s in ds]


def nn1_classify(train: Dataset, test: Dataset, p: DtwParams = DtwParams(), threads: int = 1) -> list:
    """Label of the DTW-nearest training series; ties go to the earliest one."""
    if len(train) == 0:
        raise DataFormatError("1-NN needs a nonempty training set")
    if train.labels is None:
        raise DataFormatError("1-NN training set has no labels")
    xs = _univariate(train, "train")
    lengths = np.array([x.size for x in xs])
    padded = np.zeros((len(xs), lengths.max()))
    for i, x in enumerate(xs):
        padded[i, : x.size] = x
    window = -1 if p.window is None else p.window

    def one(q):
        return _nearest(q, padded, lengths, window)

    queries = _univariate(test, "test")
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            idx = list(pool.map(one, queries))
    else:
        idx = [one(q) for q in queries]
    return [train.labels[i] for i in idx]


FORECAST_BASELINES = ("timestamp_means", "zeros", "linear_interpolator", "series_means")


def _windows(ds: Dataset, split: SeriesSplit):
    return [split.train_window(s) for s in ds], [split.test_window(s) for s in ds]


def forecast_baseline(kind: str, train: Dataset, test: Dataset, split: SeriesSplit) -> np.ndarray:
    """Forecast the test windows of ``test``; returns shape ``(M, K, d)``.

    ``timestamp_means``
        mean over training series at each test position,
    ``zeros``
        all zeros,
    ``linear_interpolator``
        least-squares line through each test series' own train window,
        extrapolated to its test timestamps,
    ``series_means``
        each test series' own train-window mean.
    """
    if kind not in FORECAST_BASELINES:
        raise ConfigError(f"unknown baseline {kind!r}; choose from {FORECAST_BASELINES}")
    past, future = _windows(test, split)
    shapes = {f.values.shape for f in future}
    if len(shapes) != 1:
        raise DataFormatError(f"test windows differ in shape: {sorted(shapes)}")
    k, d = shapes.pop()
    m = len(test)
    if kind == "zeros":
        return np.zeros((m, k, d))
    if kind == "series_means":
        return np.stack([np.broadcast_to(s.values.mean(axis=0), (k, d)) for s in past])
    if kind == "timestamp_means":
        if len(train) == 0:
            raise DataFormatError("timestamp_means needs training series")
        targets = np.stack([split.test_window(s).values for s in train])
        if targets.shape[1:] != (k, d):
            raise DataFormatError("training and test windows differ in shape")
        return np.broadcast_to(targets.mean(axis=0), (m, k, d)).copy()
    out = np.empty((m, k, d))
    for i, (s, f) in enumerate(zip(past, future)):
        design = np.column_stack([np.ones(len(s)), s.timestamps])
        coef, *_ = np.linalg.lstsq(design, s.values, rcond=None)
        out[i] = np.column_stack([np.ones(k), f.timestamps]) @ coef
    return out
