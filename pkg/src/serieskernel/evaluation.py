"""Cross-validated error estimation, grid search and significance tests.

Regression error is summarized per outer fold by

* ``eps_hat``: the mean loss over all ``N x K`` (series, timestamp) cells;
* ``v_hat``: ``sum(Sigma) / (N K^2)``, with ``Sigma`` the unbiased ``K x K``
  covariance of the per-series loss vectors.

Fold estimates are averaged over the outer folds.  RMSE standard errors
follow from the delta method, classification standard errors from the
jackknife.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import ConfigError, InsufficientSampleError, NumericError
from .skernel import SeriesKernelConfig
from .tsdata import Dataset, split_forecast
from .vkernels import KINDS, VectorKernel

__all__ = [
    "ParamGrid",
    "ErrorEstimate",
    "CVResult",
    "ClassificationResult",
    "kfold_series",
    "estimate_error",
    "rmse_report",
    "jackknife_accuracy_se",
    "t_test_vs_best_baseline",
    "nested_cv",
    "holdout_classification",
    "select_point",
]

log = logging.getLogger(__name__)


def _log_grid(lo: int, hi: int) -> tuple[float, ...]:
    return tuple(float(10.0**e) for e in range(lo, hi + 1))


@dataclass(frozen=True)
class ParamGrid:
    """Hyperparameter grid for series-kernel strategies.

    Points are enumerated in the order (k' kind, k'' kind, gamma', gamma'',
    lambda, C or noise); linear kernels skip their gamma axis.
    """

    k_prime_kinds: tuple[str, ...] = KINDS
    k_dprime_kinds: tuple[str, ...] = KINDS
    gamma_prime: tuple[float, ...] = _log_grid(-3, 2)
    gamma_dprime: tuple[float, ...] = _log_grid(-3, 2)
    lambdas: tuple[float, ...] = _log_grid(-4, 2)
    Cs: tuple[float, ...] = _log_grid(-2, 3)
    noises: tuple[float, ...] = _log_grid(-4, 2)

    def __post_init__(self):
        for name in ("k_prime_kinds", "k_dprime_kinds"):
            kinds = tuple(getattr(self, name))
            if not kinds:
                raise ConfigError(f"{name} is empty")
            bad = [k for k in kinds if k not in KINDS]
            if bad:
                raise ConfigError(f"{name}: unknown kinds {bad}")
            object.__setattr__(self, name, kinds)
        for name in ("gamma_prime", "gamma_dprime", "lambdas", "Cs", "noises"):
            vals = tuple(float(v) for v in getattr(self, name))
            if not vals:
                raise ConfigError(f"{name} is empty")
            if any(not (v > 0 and math.isfinite(v)) for v in vals):
                raise ConfigError(f"{name} must be strictly positive")
            object.__setattr__(self, name, vals)

    @classmethod
    def from_dict(cls, d: dict) -> ParamGrid:
        fields_ = set(cls.__dataclass_fields__)
        unknown = set(d) - fields_
        if unknown:
            raise ConfigError(f"unknown grid fields {sorted(unknown)}")
        return cls(**{k: tuple(v) for k, v in d.items()})

    def to_dict(self) -> dict:
        return {k: list(getattr(self, k)) for k in self.__dataclass_fields__}

    def _kernels(self, kinds, gammas, lam=0.0):
        for kind in kinds:
            if kind == "linear":
                yield VectorKernel(kind, None, lam)
            else:
                for g in gammas:
                    yield VectorKernel(kind, g, lam)

    def kernel_cells(self) -> list[SeriesKernelConfig]:
        """Series-kernel configurations in canonical order."""
        cells = []
        for kp_kind in self.k_prime_kinds:
            for kdd_kind in self.k_dprime_kinds:
                for kp in self._kernels([kp_kind], self.gamma_prime):
                    for kdd in self._kernels([kdd_kind], self.gamma_dprime):
                        for lam in self.lambdas:
                            cells.append(
                                SeriesKernelConfig(VectorKernel(kp.kind, kp.gamma, lam), kdd)
                            )
        return cells


@dataclass(frozen=True)
class ErrorEstimate:
    eps_hat: float
    v_hat: float
    sigma: np.ndarray
    n_series: int
    n_timestamps: int


def kfold_series(ids: Sequence, k: int, seed) -> list[tuple[list, list]]:
    """Seeded shuffle of ``ids`` cut into ``k`` near-equal contiguous folds.

    Returns ``(train_ids, test_ids)`` pairs; the first ``len(ids) % k`` folds
    get one extra id.
    """
    ids = list(ids)
    if k < 2:
        raise ConfigError(f"need at least 2 folds, got {k}")
    if len(ids) < k:
        raise InsufficientSampleError(f"{len(ids)} series cannot fill {k} folds")
    order = np.random.default_rng(seed).permutation(len(ids))
    folds = np.array_split(order, k)
    out = []
    for f in range(k):
        test = set(folds[f].tolist())
        out.append(
            ([ids[i] for i in order if i not in test], [ids[i] for i in folds[f]])
        )
    return out


def estimate_error(losses) -> ErrorEstimate:
    """Mean loss and its variance estimate from an ``N x K`` loss matrix."""
    losses = np.asarray(losses, dtype=float)
    if losses.ndim != 2:
        raise ConfigError(f"losses must be N x K, got shape {losses.shape}")
    n, k = losses.shape
    if n < 2:
        raise InsufficientSampleError(f"need at least 2 series for a covariance, got {n}")
    sigma = np.atleast_2d(np.cov(losses, rowvar=False, ddof=1))
    v_hat = max(float(sigma.sum()) / (n * k * k), 0.0)
    return ErrorEstimate(float(losses.mean()), v_hat, sigma, n, k)


def rmse_report(e: ErrorEstimate) -> tuple[float, float]:
    """RMSE and its delta-method standard error for squared-error losses."""
    if e.eps_hat <= 0:
        return 0.0, 0.0
    rmse = math.sqrt(e.eps_hat)
    return rmse, math.sqrt(e.v_hat) / (2 * rmse)


def jackknife_accuracy_se(correct) -> tuple[float, float]:
    """Accuracy and its leave-one-out jackknife standard error."""
    c = np.asarray(correct, dtype=float)
    n = c.size
    if n < 2:
        raise InsufficientSampleError(f"jackknife needs at least 2 samples, got {n}")
    loo = (c.sum() - c) / (n - 1)
    se = math.sqrt((n - 1) / n * float(np.sum((loo - loo.mean()) ** 2)))
    return float(c.mean()), se


STAR_LEVELS = ((0.99, "***"), (0.95, "**"), (0.90, "*"))


def t_test_vs_best_baseline(pred: tuple[float, float], baseline: tuple[float, float],
                            n_series: int) -> tuple[float, int, str]:
    """One-tailed test that the predictor's error is below the baseline's.

    ``pred`` and ``baseline`` are ``(eps_hat, v_hat)`` pairs.  Negative ``t``
    favours the predictor; degrees of freedom are ``n_series // 5``.
    """
    (e1, v1), (e2, v2) = pred, baseline
    if v1 < 0 or v2 < 0:
        raise ConfigError("variances must be non-negative")
    pooled = v1 + v2
    if pooled <= 0:
        raise NumericError("zero pooled variance")
    t = (e1 - e2) / math.sqrt(pooled)
    df = int(n_series) // 5
    stars = ""
    if df >= 1:
        for level, mark in STAR_LEVELS:
            if t < stats.t.ppf(1 - level, df):
                stars = mark
                break
    return t, df, stars


@dataclass
class CVResult:
    """Nested cross-validation outcome for one regression strategy."""

    strategy: str
    eps_cv: float
    v_cv: float
    folds: list[ErrorEstimate]
    choices: list[str]
    n_series: int
    histogram: dict[str, int] = field(default_factory=dict)

    @property
    def rmse(self) -> tuple[float, float]:
        return rmse_report(ErrorEstimate(self.eps_cv, self.v_cv, np.zeros((1, 1)), self.n_series, 1))


@dataclass
class ClassificationResult:
    strategy: str
    accuracy: float
    se: float
    predictions: list
    choice: str
    n_test: int


def select_point(scores: np.ndarray) -> int:
    """Index of the lowest mean inner score; the first one wins ties."""
    scores = np.asarray(scores, dtype=float)
    if not np.any(np.isfinite(scores)):
        raise NumericError("every grid point failed in the inner loop")
    return int(np.argmin(np.where(np.isfinite(scores), scores, np.inf)))


def _index_pairs(ds: Dataset, folds) -> list[tuple[np.ndarray, np.ndarray]]:
    pos = {sid: i for i, sid in enumerate(ds.ids)}
    return [
        (np.array([pos[s] for s in tr], dtype=int), np.array([pos[s] for s in te], dtype=int))
        for tr, te in folds
    ]


def nested_cv(strategy, ds: Dataset, grid: ParamGrid | None = None, *, n_test_timestamps: int,
              outer_k: int = 5, inner_k: int = 5, seed: int = 0, channel: int = 0,
              threads: int = 1) -> CVResult:
    """Nested cross-validation of a forecasting strategy, split along series.

    The inner loop picks the grid point with the lowest mean inner
    ``eps_hat``; the outer loop refits it on the whole outer-train fold and
    scores the outer-test fold on ``channel``.
    """
    grid = ParamGrid() if grid is None else grid
    if not 0 <= channel < ds.d:
        raise ConfigError(f"channel {channel} out of range for d={ds.d}")
    split = split_forecast(ds, n_test_timestamps)
    points = strategy.points(grid)
    outer = kfold_series(ds.ids, outer_k, seed)
    outer_pairs = _index_pairs(ds, outer)
    if len(points) > 1:
        inner_pairs = []
        for o, (train_ids, _) in enumerate(outer):
            inner_pairs += _index_pairs(ds, kfold_series(train_ids, inner_k, [seed, o + 1]))
        inner = strategy.sweep(ds, inner_pairs, split, grid, channel=channel, threads=threads)
        inner = inner.reshape(outer_k, inner_k, len(points))
    folds, choices = [], []
    for o, (train_idx, test_idx) in enumerate(outer_pairs):
        best = 0 if len(points) == 1 else select_point(inner[o].mean(axis=0))
        point = points[best]
        pred = strategy.fit_predict(ds, train_idx, test_idx, split, point)
        truth = np.stack([split.test_window(ds[i]).values for i in test_idx])
        losses = (pred[..., channel] - truth[..., channel]) ** 2
        folds.append(estimate_error(losses))
        choices.append(strategy.describe(point))
        log.info("%s fold %d: eps=%.4g choice=%s", strategy.name, o, folds[-1].eps_hat, choices[-1])
    eps = float(np.mean([f.eps_hat for f in folds]))
    v = float(np.mean([f.v_hat for f in folds]))
    return CVResult(strategy.name, eps, v, folds, choices, len(ds), dict(Counter(choices)))


def holdout_classification(strategy, train: Dataset, test: Dataset, grid: ParamGrid | None = None,
                           *, inner_k: int = 5, seed: int = 0, threads: int = 1) -> ClassificationResult:
    """Tune by inner k-fold CV on ``train``, then score once on ``test``."""
    grid = ParamGrid() if grid is None else grid
    if train.labels is None or test.labels is None:
        raise ConfigError("classification needs labelled train and test sets")
    points = strategy.points(grid)
    best = 0
    if len(points) > 1:
        pairs = _index_pairs(train, kfold_series(train.ids, inner_k, seed))
        scores = strategy.sweep(train, pairs, grid, threads=threads)
        best = select_point(scores.mean(axis=0))
    pred = strategy.fit_predict(train, test, points[best])
    correct = [p == y for p, y in zip(pred, test.labels)]
    acc, se = jackknife_accuracy_se(correct)
    return ClassificationResult(strategy.name, acc, se, pred, strategy.describe(points[best]), len(test))
