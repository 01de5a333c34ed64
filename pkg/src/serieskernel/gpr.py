"""Gaussian-process forecasting of held-out series windows.

Each training series contributes one data point: its train-window segment
as input and its values on the test window as a ``(K, d)`` target.  The
series kernel is the prior covariance between segments, shared by all
``K * d`` outputs, and the forecast for a test series is the posterior mean

    Y_hat = k(X*, X) (k(X, X) + noise I)^{-1} Y

computed from one eigendecomposition of ``k(X, X)`` so that changing
``noise`` costs a single ``O(N^2)`` solve.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DataFormatError, DimensionError
from .skernel import GramBundle, SeriesKernelConfig, bundle, cross_gram, shifted_solve
from .tsdata import Dataset, SeriesSplit

__all__ = ["GprModel", "fit", "predict", "predict_variance", "window_data", "posterior_mean"]


def window_data(ds: Dataset, split: SeriesSplit) -> tuple[Dataset, np.ndarray]:
    """Train-window segments of ``ds`` and its ``(N, K, d)`` test-window values."""
    inputs = Dataset([split.train_window(s) for s in ds], ds.labels, ds.name)
    targets = [split.test_window(s).values for s in ds]
    shapes = {t.shape for t in targets}
    if len(shapes) > 1:
        raise DataFormatError(f"test windows differ in shape: {sorted(shapes)}")
    return inputs, np.stack(targets)


def posterior_mean(b: GramBundle, noise: float, targets: np.ndarray, cross: np.ndarray,
                   offset: np.ndarray | float = 0.0) -> np.ndarray:
    """``cross @ (K + noise I)^{-1} (targets - offset) + offset`` for 3-D targets."""
    n, k, d = targets.shape
    alpha = shifted_solve(b, noise, (targets - offset).reshape(n, k * d))
    return (cross @ alpha).reshape(cross.shape[0], k, d) + offset


@dataclass(frozen=True, eq=False)
class GprModel:
    cfg: SeriesKernelConfig
    noise: float
    bundle: GramBundle
    targets: np.ndarray
    inputs: Dataset
    offset: np.ndarray

    def with_noise(self, noise: float) -> GprModel:
        """Same model under another noise level; reuses the eigendecomposition."""
        if noise < 0:
            raise ConfigError("noise must be >= 0")
        return replace(self, noise=float(noise))


def fit(cfg: SeriesKernelConfig, noise: float, train: Dataset, split: SeriesSplit,
        center: bool = False) -> GprModel:
    """Fit on the train-window segments of ``train``.

    ``center=True`` subtracts the per-output training mean before
    conditioning and adds it back to the forecasts.
    """
    if noise < 0:
        raise ConfigError("noise must be >= 0")
    if len(train) == 0:
        raise DataFormatError("no training series")
    inputs, targets = window_data(train, split)
    offset = targets.mean(axis=0) if center else np.zeros(targets.shape[1:])
    b = bundle(cross_gram(cfg, inputs))
    model = GprModel(cfg, float(noise), b, targets, inputs, offset)
    # fail at fit time, not on first predict, if the shift is singular
    shifted_solve(b, model.noise, np.zeros(len(train)))
    return model


def _test_inputs(m: GprModel, test: Dataset, split: SeriesSplit | None) -> Dataset:
    if test.d != m.inputs.d:
        raise DimensionError(f"test series have {test.d} channels, model has {m.inputs.d}")
    if split is None:
        return test
    return Dataset([split.train_window(s) for s in test], None, test.name)


def predict(m: GprModel, test: Dataset, split: SeriesSplit | None = None) -> np.ndarray:
    """Posterior-mean forecast, shape ``(M, K, d)``.

    ``test`` holds train-window segments; pass ``split`` to cut them from full
    series instead.
    """
    cross = cross_gram(m.cfg, _test_inputs(m, test, split), m.inputs)
    return posterior_mean(m.bundle, m.noise, m.targets, cross, m.offset)


def predict_variance(m: GprModel, test: Dataset, split: SeriesSplit | None = None) -> np.ndarray:
    """Latent posterior variance per test series (shared by all outputs)."""
    inputs = _test_inputs(m, test, split)
    cross = cross_gram(m.cfg, inputs, m.inputs)
    prior = np.array([cross_gram(m.cfg, Dataset([s]))[0, 0] for s in inputs])
    reduction = np.einsum("ij,ji->i", cross, shifted_solve(m.bundle, m.noise, cross.T))
    return np.maximum(prior - reduction, 0.0)
