"""Soft-margin SVM on precomputed Gram matrices, trained by SMO.

The working pair is the maximal KKT-violating pair; the pair update and the
bias rule follow the classic LIBSVM solver.  Multiclass problems use
one-vs-rest with ties going to the smallest class.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .errors import ConfigError, ConvergenceError, DegenerateProblemError, DimensionError

__all__ = ["SvmModel", "OvrModel", "train", "decide", "train_multiclass", "predict_multiclass"]

_TAU = 1e-12


@numba.njit(cache=True, nogil=True)
def _smo(k, y, c, tol, max_iter):
    n = y.size
    alpha = np.zeros(n)
    grad = -np.ones(n)
    qd = np.empty(n)
    for t in range(n):
        qd[t] = k[t, t]
    it = 0
    gap = np.inf
    while it < max_iter:
        gmax = -np.inf
        gmin = np.inf
        i = -1
        j = -1
        for t in range(n):
            v = -y[t] * grad[t]
            up = (y[t] > 0 and alpha[t] < c) or (y[t] < 0 and alpha[t] > 0)
            low = (y[t] < 0 and alpha[t] < c) or (y[t] > 0 and alpha[t] > 0)
            if up and v > gmax:
                gmax = v
                i = t
            if low and v < gmin:
                gmin = v
                j = t
        gap = gmax - gmin
        if i < 0 or j < 0 or gap <= tol:
            break
        it += 1
        qij = y[i] * y[j] * k[i, j]
        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = qd[i] + qd[j] + 2.0 * qij
            if quad <= 0:
                quad = _TAU
            delta = (-grad[i] - grad[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > c:
                    alpha[i] = c
                    alpha[j] = c - diff
            else:
                if alpha[j] > c:
                    alpha[j] = c
                    alpha[i] = c + diff
        else:
            quad = qd[i] + qd[j] - 2.0 * qij
            if quad <= 0:
                quad = _TAU
            delta = (grad[i] - grad[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > c:
                if alpha[i] > c:
                    alpha[i] = c
                    alpha[j] = total - c
                if alpha[j] > c:
                    alpha[j] = c
                    alpha[i] = total - c
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total
        dai = alpha[i] - ai
        daj = alpha[j] - aj
        for t in range(n):
            grad[t] += y[t] * (y[i] * k[t, i] * dai + y[j] * k[t, j] * daj)

    # bias: average y*grad over free vectors, else the midpoint of the bounds
    ub = np.inf
    lb = -np.inf
    nfree = 0
    total_free = 0.0
    for t in range(n):
        yg = y[t] * grad[t]
        if alpha[t] >= c:
            if y[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif alpha[t] <= 0:
            if y[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            nfree += 1
            total_free += yg
    if nfree > 0:
        rho = total_free / nfree
    else:
        rho = (ub + lb) / 2
    return alpha, -rho, gap, it


@dataclass(frozen=True, eq=False)
class SvmModel:
    """Binary SVM dual solution; decision value ``sum_i alpha_i y_i K(x_i, .) + bias``."""

    alphas: np.ndarray
    bias: float
    C: float
    labels: np.ndarray
    kkt_gap: float = 0.0
    iterations: int = 0

    @property
    def support_ids(self) -> np.ndarray:
        return np.flatnonzero(self.alphas > 0)


def train(gram, labels, C: float, tol: float = 1e-3, max_iter: int | None = None) -> SvmModel:
    """Train a binary SVM on an ``N x N`` Gram with ``+1/-1`` labels."""
    k = np.asarray(gram, dtype=float)
    y = np.asarray(labels, dtype=float)
    if k.ndim != 2 or k.shape[0] != k.shape[1] or k.shape[0] != y.size:
        raise DimensionError(f"Gram {k.shape} does not match {y.size} labels")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ConfigError("binary labels must be +1 or -1")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise DegenerateProblemError("training labels contain a single class")
    if not C > 0:
        raise ConfigError(f"C must be positive, got {C}")
    if not np.all(np.isfinite(k)):
        raise ConfigError("Gram matrix has non-finite entries")
    k = (k + k.T) / 2
    cap = 10_000 * y.size if max_iter is None else int(max_iter)
    alpha, bias, gap, it = _smo(k, y, float(C), float(tol), cap)
    if gap > tol:
        raise ConvergenceError(
            f"SMO stopped after {it} iterations with KKT gap {gap:.3g} > {tol:g}"
        )
    return SvmModel(alpha, float(bias), float(C), y, float(gap), int(it))


def decide(m: SvmModel, cross) -> np.ndarray:
    """Decision values for the rows of an ``M x N`` cross-Gram."""
    cross = np.atleast_2d(np.asarray(cross, dtype=float))
    if cross.shape[1] != m.alphas.size:
        raise DimensionError(
            f"cross-Gram has {cross.shape[1]} columns, model has {m.alphas.size} points"
        )
    return cross @ (m.alphas * m.labels) + m.bias


@dataclass(frozen=True, eq=False)
class OvrModel:
    classes: tuple
    models: tuple[SvmModel, ...]

    def decision_matrix(self, cross) -> np.ndarray:
        if len(self.classes) == 2:
            f = decide(self.models[0], cross)
            return np.column_stack([f, -f])
        return np.column_stack([decide(m, cross) for m in self.models])


def train_multiclass(gram, labels, C: float, tol: float = 1e-3) -> OvrModel:
    """One-vs-rest ensemble; a two-class problem trains a single model."""
    labels = list(labels)
    classes = tuple(sorted(set(labels)))
    if len(classes) < 2:
        raise DegenerateProblemError("training labels contain a single class")
    lab = np.array([classes.index(v) for v in labels])
    if len(classes) == 2:
        return OvrModel(classes, (train(gram, np.where(lab == 0, 1.0, -1.0), C, tol),))
    models = tuple(train(gram, np.where(lab == c, 1.0, -1.0), C, tol) for c in range(len(classes)))
    return OvrModel(classes, models)


def predict_multiclass(m: OvrModel, cross) -> list:
    """Class with the largest decision value; ties go to the smallest class."""
    f = m.decision_matrix(cross)
    # argmax returns the first maximum, and classes are sorted ascending
    return [m.classes[i] for i in np.argmax(f, axis=1)]
