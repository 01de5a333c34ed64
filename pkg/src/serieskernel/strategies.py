"""Prediction strategies driven by the evaluation harness.

A strategy exposes ``points(grid)`` (its hyperparameter candidates in
canonical order), ``sweep(...)`` (inner-loop scores for every candidate on
every fold) and ``fit_predict(...)``.  Kernel strategies sweep one kernel
cell at a time: the Gram over all series is built once per cell and sliced
per fold, and the ridge/noise axis reuses one eigendecomposition per fold.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import gpr, svm
from .baselines import FORECAST_BASELINES, DtwParams, forecast_baseline, nn1_classify
from .errors import ConfigError, NumericError
from .evaluation import ParamGrid
from .skernel import SeriesKernelConfig, bundle, cross_gram
from .tsdata import Dataset, SeriesSplit

__all__ = [
    "BaselineForecaster",
    "SeriesGprForecaster",
    "SeriesSvmClassifier",
    "DtwNearestNeighbour",
    "regression_strategy",
    "classification_strategy",
    "REGRESSION_STRATEGIES",
    "CLASSIFICATION_STRATEGIES",
    "describe_kernel",
]

log = logging.getLogger(__name__)


def describe_kernel(cfg: SeriesKernelConfig) -> str:
    def one(k):
        base = k.kind if k.gamma is None else f"{k.kind}({k.gamma:g})"
        return base + (f"+{k.lam:g}delta" if k.lam else "")

    return f"k'={one(cfg.k_prime)} k''={one(cfg.k_dprime)}"


def _map(fn, items, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


class BaselineForecaster:
    """Tuning-free naive forecaster."""

    def __init__(self, kind: str):
        if kind not in FORECAST_BASELINES:
            raise ConfigError(f"unknown baseline {kind!r}")
        self.kind = kind
        self.name = kind

    def points(self, grid: ParamGrid) -> list[dict]:
        return [{}]

    def describe(self, point: dict) -> str:
        return self.kind

    def fit_predict(self, ds: Dataset, train_idx, test_idx, split: SeriesSplit, point: dict) -> np.ndarray:
        return forecast_baseline(self.kind, ds.subset(train_idx), ds.subset(test_idx), split)

    def sweep(self, ds, pairs, split, grid, channel=0, threads=1) -> np.ndarray:
        out = np.empty((len(pairs), 1))
        for p, (tr, te) in enumerate(pairs):
            pred = self.fit_predict(ds, tr, te, split, {})
            truth = np.stack([split.test_window(ds[i]).values for i in te])
            out[p, 0] = np.mean((pred[..., channel] - truth[..., channel]) ** 2)
        return out


class SeriesGprForecaster:
    """Series-kernel Gaussian-process forecaster tuned over kernel cells x noise."""

    name = "series_gpr"

    def __init__(self, center: bool = False):
        self.center = center

    def points(self, grid: ParamGrid) -> list[dict]:
        return [
            {"kernel": cfg, "noise": noise}
            for cfg in grid.kernel_cells()
            for noise in grid.noises
        ]

    def describe(self, point: dict) -> str:
        return f"{describe_kernel(point['kernel'])} noise={point['noise']:g}"

    def fit_predict(self, ds, train_idx, test_idx, split, point) -> np.ndarray:
        model = gpr.fit(point["kernel"], point["noise"], ds.subset(train_idx), split, center=self.center)
        return gpr.predict(model, ds.subset(test_idx), split)

    def sweep(self, ds, pairs, split, grid, channel=0, threads=1) -> np.ndarray:
        inputs, targets = gpr.window_data(ds, split)
        cells = grid.kernel_cells()
        noises = grid.noises

        def run_cell(cfg):
            scores = np.full((len(pairs), len(noises)), np.inf)
            try:
                full = cross_gram(cfg, inputs)
            except NumericError as exc:
                log.debug("cell %s failed: %s", describe_kernel(cfg), exc)
                return scores
            for p, (tr, te) in enumerate(pairs):
                y = targets[tr]
                offset = y.mean(axis=0) if self.center else 0.0
                truth = targets[te][..., channel]
                try:
                    b = bundle(full[np.ix_(tr, tr)])
                except NumericError:
                    continue
                cross = full[np.ix_(te, tr)]
                for q, noise in enumerate(noises):
                    try:
                        pred = gpr.posterior_mean(b, noise, y, cross, offset)
                    except NumericError:
                        continue
                    scores[p, q] = np.mean((pred[..., channel] - truth) ** 2)
            return scores

        per_cell = _map(run_cell, cells, threads)
        return np.concatenate(per_cell, axis=1)


class SeriesSvmClassifier:
    """Series-kernel SVM tuned over kernel cells x C."""

    name = "series_svm"

    def __init__(self, tol: float = 1e-3):
        self.tol = tol

    def points(self, grid: ParamGrid) -> list[dict]:
        return [{"kernel": cfg, "C": c} for cfg in grid.kernel_cells() for c in grid.Cs]

    def describe(self, point: dict) -> str:
        return f"{describe_kernel(point['kernel'])} C={point['C']:g}"

    def fit_predict(self, train: Dataset, test: Dataset, point: dict) -> list:
        cfg = point["kernel"]
        model = svm.train_multiclass(cross_gram(cfg, train), train.labels, point["C"], self.tol)
        return svm.predict_multiclass(model, cross_gram(cfg, test, train))

    def sweep(self, ds, pairs, grid, threads=1) -> np.ndarray:
        """Inner-fold error rates, shape ``(n_folds, n_points)``."""
        labels = list(ds.labels)
        cells = grid.kernel_cells()
        cs = grid.Cs

        def run_cell(cfg):
            scores = np.full((len(pairs), len(cs)), np.inf)
            try:
                full = cross_gram(cfg, ds)
            except NumericError:
                return scores
            if not np.all(np.isfinite(full)):
                return scores
            for p, (tr, te) in enumerate(pairs):
                k_tr = full[np.ix_(tr, tr)]
                cross = full[np.ix_(te, tr)]
                truth = [labels[i] for i in te]
                for q, c in enumerate(cs):
                    try:
                        model = svm.train_multiclass(k_tr, [labels[i] for i in tr], c, self.tol)
                    except NumericError:
                        continue
                    pred = svm.predict_multiclass(model, cross)
                    scores[p, q] = np.mean([a != b for a, b in zip(pred, truth)])
            return scores

        return np.concatenate(_map(run_cell, cells, threads), axis=1)


class DtwNearestNeighbour:
    """DTW 1-NN classifier; no hyperparameters."""

    name = "dtw_1nn"

    def __init__(self, params: DtwParams = DtwParams(), threads: int = 1):
        self.params = params
        self.threads = threads

    def points(self, grid: ParamGrid) -> list[dict]:
        return [{}]

    def describe(self, point: dict) -> str:
        return "dtw_1nn" if self.params.window is None else f"dtw_1nn(window={self.params.window})"

    def fit_predict(self, train: Dataset, test: Dataset, point: dict) -> list:
        return nn1_classify(train, test, self.params, self.threads)

    def sweep(self, ds, pairs, grid, threads=1) -> np.ndarray:
        out = np.empty((len(pairs), 1))
        for p, (tr, te) in enumerate(pairs):
            pred = nn1_classify(ds.subset(tr), ds.subset(te), self.params, threads)
            out[p, 0] = np.mean([a != ds.labels[i] for a, i in zip(pred, te)])
        return out


REGRESSION_STRATEGIES = ("series_gpr",) + FORECAST_BASELINES
CLASSIFICATION_STRATEGIES = ("series_svm", "dtw_1nn")


def regression_strategy(name: str, **options):
    if name == "series_gpr":
        return SeriesGprForecaster(**options)
    if name in FORECAST_BASELINES:
        return BaselineForecaster(name)
    raise ConfigError(f"unknown regression strategy {name!r}; choose from {REGRESSION_STRATEGIES}")


def classification_strategy(name: str, **options):
    if name == "series_svm":
        return SeriesSvmClassifier(**options)
    if name == "dtw_1nn":
        return DtwNearestNeighbour(**options)
    raise ConfigError(
        f"unknown classification strategy {name!r}; choose from {CLASSIFICATION_STRATEGIES}"
    )
