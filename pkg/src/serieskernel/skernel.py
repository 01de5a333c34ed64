"""Series kernels built from two vector kernels on timestamps.

For univariate series ``(x, t)`` and ``(y, s)``::

    k(x, y) = x^T K'(t,t)^{-1} K''(t,s) K'(s,s)^{-1} y

where ``K'`` is the within-series kernel matrix and ``K''`` the
between-series one.  Multivariate series mix coordinate pairs with a psd
weight matrix ``W``.  The kernel is psd: it is the RKHS inner product of the
two kernel-ridge interpolates of the series.

Computation routes
------------------
* :func:`prepare` factors ``K'(t,t)`` once per series and caches
  ``K'(t,t)^{-1} x``, so a cross-Gram needs only ``N + M`` factorizations.
* :func:`cross_gram` additionally groups series that share a timestamp
  vector and handles each group pair with one matrix product.
* :func:`cross_gram_shared_grid` is the two-factorization formula for
  datasets on a common grid; :func:`naive_cross_gram` is the uncached
  per-pair route kept as a reference.
* :func:`inverse_gram_shared_grid` inverts a shared-grid Gram through the
  pseudo-inverse of the value matrix instead of inverting the Gram.
* :func:`bundle` / :func:`shifted_solve` reuse one eigendecomposition for
  every ridge shift ``(K + lam I)^{-1}``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg

from .errors import (
    ConfigError,
    DataFormatError,
    DimensionError,
    NumericError,
    RankError,
    SingularKernelError,
    SingularShiftError,
)
from .tsdata import Dataset, TimeSeries
from .vkernels import VectorKernel, gram

__all__ = [
    "SeriesKernelConfig",
    "PreparedSeries",
    "GramBundle",
    "prepare",
    "prepare_dataset",
    "eval_univariate",
    "eval_multivariate",
    "cross_gram",
    "naive_cross_gram",
    "cross_gram_shared_grid",
    "inverse_gram_shared_grid",
    "bundle",
    "shifted_solve",
    "JITTER_START",
    "JITTER_STOP",
    "CLAMP_RTOL",
]

JITTER_START = 1e-10
JITTER_STOP = 1e-4
CLAMP_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class SeriesKernelConfig:
    """Within-series kernel ``k_prime``, between-series kernel ``k_dprime``
    and an optional symmetric psd channel-mixing matrix ``weights``."""

    k_prime: VectorKernel
    k_dprime: VectorKernel
    weights: np.ndarray | None = None

    def __post_init__(self):
        if self.weights is None:
            return
        w = np.array(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ConfigError(f"weights must be square, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ConfigError("weights contain non-finite entries")
        if not np.allclose(w, w.T, rtol=1e-12, atol=1e-12):
            raise ConfigError("weights must be symmetric")
        w = (w + w.T) / 2
        ev = np.linalg.eigvalsh(w)
        if ev.min() < -1e-10 * max(1.0, abs(ev.max())):
            raise ConfigError(f"weights are not psd (min eigenvalue {ev.min():.3g})")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    def weight_matrix(self, d: int) -> np.ndarray:
        if self.weights is None:
            return np.eye(d)
        if self.weights.shape != (d, d):
            raise DimensionError(
                f"weights are {self.weights.shape[0]}x{self.weights.shape[1]} "
                f"but series have {d} channels"
            )
        return self.weights

    def to_dict(self) -> dict:
        return {
            "k_prime": self.k_prime.to_dict(),
            "k_dprime": self.k_dprime.to_dict(),
            "weights": None if self.weights is None else self.weights.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> SeriesKernelConfig:
        try:
            return cls(
                VectorKernel.from_dict(d["k_prime"]),
                VectorKernel.from_dict(d["k_dprime"]),
                d.get("weights"),
            )
        except KeyError as exc:
            raise ConfigError(f"series kernel config is missing {exc}") from None


def _cholesky(k: np.ndarray, what: str) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``k``, escalating diagonal jitter on failure.

    Jitter runs from ``JITTER_START`` to ``JITTER_STOP`` times the mean
    diagonal, in factors of 10.
    """
    try:
        return scipy.linalg.cholesky(k, lower=True, check_finite=False), 0.0
    except np.linalg.LinAlgError:
        pass
    n = k.shape[0]
    scale = np.trace(k) / n
    if not scale > 0:
        scale = 1.0
    rel = JITTER_START
    jitter = rel * scale
    while rel <= JITTER_STOP * (1 + 1e-9):
        jitter = rel * scale
        try:
            chol = scipy.linalg.cholesky(
                k + jitter * np.eye(n), lower=True, check_finite=False
            )
        except np.linalg.LinAlgError:
            rel *= 10
            continue
        warnings.warn(f"{what}: added diagonal jitter {jitter:.3g}", stacklevel=3)
        return chol, jitter
    raise SingularKernelError(f"{what} is singular; last jitter tried {jitter:.3g}")


@dataclass(frozen=True, eq=False)
class PreparedSeries:
    """A series with its within-series kernel matrix factored.

    ``coef`` holds ``K'(t,t)^{-1} x`` for every channel, which is all a
    pairing needs.
    """

    series: TimeSeries
    chol: np.ndarray
    coef: np.ndarray
    jitter: float = 0.0

    @cached_property
    def kp_inv(self) -> np.ndarray:
        """Explicit inverse of ``K'(t,t)`` (plus jitter)."""
        n = self.chol.shape[0]
        return scipy.linalg.cho_solve((self.chol, True), np.eye(n), check_finite=False)

    @property
    def timestamps(self) -> np.ndarray:
        return self.series.timestamps


def _prepare_with(chol: np.ndarray, jitter: float, s: TimeSeries) -> PreparedSeries:
    coef = scipy.linalg.cho_solve((chol, True), s.values, check_finite=False)
    return PreparedSeries(s, chol, coef, jitter)


def prepare(cfg: SeriesKernelConfig, s: TimeSeries) -> PreparedSeries:
    """Factor ``K'(t,t)`` for ``s`` once, for reuse in every pairing."""
    kp = gram(cfg.k_prime, s.timestamps)
    chol, jitter = _cholesky(kp, f"within-series kernel matrix of series {s.id!r}")
    return _prepare_with(chol, jitter, s)


def prepare_dataset(cfg: SeriesKernelConfig, ds: Dataset) -> list[PreparedSeries]:
    """Prepare every series, factoring each distinct timestamp vector once."""
    factors: dict[bytes, tuple[np.ndarray, float]] = {}
    out = []
    for s in ds:
        key = s.timestamps.tobytes()
        if key not in factors:
            kp = gram(cfg.k_prime, s.timestamps)
            factors[key] = _cholesky(kp, f"within-series kernel matrix of series {s.id!r}")
        out.append(_prepare_with(*factors[key], s))
    return out


def _order_key(p: PreparedSeries):
    s = p.series
    return (s.id, len(s), s.timestamps.tobytes(), s.values.tobytes())


def _pair_block(cfg: SeriesKernelConfig, a: PreparedSeries, b: PreparedSeries) -> np.ndarray:
    # one fixed orientation per unordered pair makes k(a, b) == k(b, a) bitwise
    if _order_key(b) < _order_key(a):
        a, b = b, a
    kdd = gram(cfg.k_dprime, a.timestamps, b.timestamps)
    return a.coef.T @ kdd @ b.coef


def eval_univariate(cfg: SeriesKernelConfig, a: PreparedSeries, b: PreparedSeries) -> float:
    """Series kernel value for two prepared univariate series."""
    if a.series.d != 1 or b.series.d != 1:
        raise DimensionError("eval_univariate needs d=1 series; use eval_multivariate")
    return float(_pair_block(cfg, a, b)[0, 0])


def eval_multivariate(cfg: SeriesKernelConfig, a: PreparedSeries, b: PreparedSeries) -> float:
    """Weighted sum over coordinate-series pairs."""
    if a.series.d != b.series.d:
        raise DimensionError(
            f"channel mismatch: {a.series.d} vs {b.series.d}"
        )
    w = cfg.weight_matrix(a.series.d)
    return float(np.sum(w * _pair_block(cfg, a, b)))


def _mirror(g: np.ndarray) -> np.ndarray:
    return np.triu(g) + np.triu(g, 1).T


def _check_channels(X: Dataset, Xstar: Dataset) -> int:
    if len(X) == 0 or len(Xstar) == 0:
        raise DataFormatError("cross-Gram needs nonempty datasets")
    if X.d != Xstar.d:
        raise DimensionError(f"channel mismatch: {X.d} vs {Xstar.d}")
    return X.d


def _groups(prepared: list[PreparedSeries]) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Group series by identical timestamps: (timestamps, indices, stacked coef)."""
    index: dict[bytes, list[int]] = {}
    for i, p in enumerate(prepared):
        index.setdefault(p.timestamps.tobytes(), []).append(i)
    out = []
    for idx in index.values():
        # (D, n_g * d), channel-fastest within each series
        coef = np.concatenate([prepared[i].coef for i in idx], axis=1)
        out.append((prepared[idx[0]].timestamps, np.array(idx), coef))
    return out


def _mix(block: np.ndarray, n_a: int, n_b: int, w: np.ndarray) -> np.ndarray:
    d = w.shape[0]
    if d == 1:
        return block
    return np.einsum("aibj,ij->ab", block.reshape(n_a, d, n_b, d), w)


def cross_gram(cfg: SeriesKernelConfig, X: Dataset, Xstar: Dataset | None = None) -> np.ndarray:
    """``N x M`` matrix of series kernel values between ``X`` and ``Xstar``.

    Every series is prepared once.  When ``Xstar`` is omitted or is ``X``
    itself, only the upper triangle is computed and the result is exactly
    symmetric.
    """
    symmetric = Xstar is None or Xstar is X
    Xstar = X if symmetric else Xstar
    d = _check_channels(X, Xstar)
    w = cfg.weight_matrix(d)
    ga = _groups(prepare_dataset(cfg, X))
    gb = ga if symmetric else _groups(prepare_dataset(cfg, Xstar))
    out = np.empty((len(X), len(Xstar)))
    for i, (ta, ia, ca) in enumerate(ga):
        for j, (tb, ib, cb) in enumerate(gb):
            if symmetric and j < i:
                continue
            kdd = gram(cfg.k_dprime, ta, tb)
            v = _mix(ca.T @ kdd @ cb, ia.size, ib.size, w)
            out[np.ix_(ia, ib)] = v
            if symmetric and j > i:
                out[np.ix_(ib, ia)] = v.T
    return _mirror(out) if symmetric else out


def naive_cross_gram(cfg: SeriesKernelConfig, X: Dataset, Xstar: Dataset | None = None) -> np.ndarray:
    """Entry-by-entry evaluation with dense solves and no caching.

    Reference route only: it refactors both within-series matrices for every
    pair and does not jitter.
    """
    Xstar = X if Xstar is None else Xstar
    d = _check_channels(X, Xstar)
    w = cfg.weight_matrix(d)
    out = np.empty((len(X), len(Xstar)))
    for i, a in enumerate(X):
        for j, b in enumerate(Xstar):
            ka = gram(cfg.k_prime, a.timestamps)
            kb = gram(cfg.k_prime, b.timestamps)
            kab = gram(cfg.k_dprime, a.timestamps, b.timestamps)
            middle = np.linalg.solve(kb, np.linalg.solve(ka, kab).T).T
            out[i, j] = sum(
                w[p, q] * (a.values[:, p] @ middle @ b.values[:, q])
                for p in range(d)
                for q in range(d)
            )
    return out


def _shared_grid(ds: Dataset, role: str) -> np.ndarray:
    t = ds.shared_timestamps()
    if t is None:
        t0 = ds[0].timestamps
        bad = [s.id for s in ds if not np.array_equal(s.timestamps, t0)]
        raise DataFormatError(
            f"{role} does not share one timestamp grid; series differing from "
            f"{ds[0].id!r}: {bad}"
        )
    return t


def cross_gram_shared_grid(cfg: SeriesKernelConfig, X: Dataset, Xstar: Dataset | None = None) -> np.ndarray:
    """Cross-Gram for datasets on common grids ``t`` and ``t*``.

    Uses ``X^T K'(t,t)^{-1} K''(t,t*) K'(t*,t*)^{-1} X*`` with the values
    arranged as ``(D, N)`` matrices: two factorizations in total.
    """
    symmetric = Xstar is None or Xstar is X
    Xstar = X if symmetric else Xstar
    d = _check_channels(X, Xstar)
    w = cfg.weight_matrix(d)
    t = _shared_grid(X, "X")
    ts = t if symmetric else _shared_grid(Xstar, "Xstar")
    # (D, N*d), channel-fastest per series
    xa = X.value_tensor().reshape(t.size, -1)
    chol_a, _ = _cholesky(gram(cfg.k_prime, t), "within-series kernel matrix of X")
    ca = scipy.linalg.cho_solve((chol_a, True), xa, check_finite=False)
    if symmetric:
        cb = ca
    else:
        xb = Xstar.value_tensor().reshape(ts.size, -1)
        chol_b, _ = _cholesky(gram(cfg.k_prime, ts), "within-series kernel matrix of Xstar")
        cb = scipy.linalg.cho_solve((chol_b, True), xb, check_finite=False)
    out = _mix(ca.T @ gram(cfg.k_dprime, t, ts) @ cb, len(X), len(Xstar), w)
    return _mirror(out) if symmetric else out


def inverse_gram_shared_grid(cfg: SeriesKernelConfig, X: Dataset) -> np.ndarray:
    """Inverse of ``cross_gram(cfg, X, X)`` through the pseudo-inverse of ``X``.

    With the thin SVD ``X = U S V^T`` of the ``(D, N)`` value matrix the Gram
    factors as ``V S M S V^T`` where ``M = U^T K'^{-1} K'' K'^{-1} U`` is
    ``N x N``, so the inverse is ``V S^{-1} M^{-1} S^{-1} V^T``.  For
    ``D == N`` this equals ``X^{-T} K' K''^{-1} K' X^{-1}``; the factored form
    never inverts ``K''(t,t)``, which is far worse conditioned than ``M``
    for smooth kernels.  Univariate series only.
    """
    if X.d != 1:
        raise DimensionError("inverse_gram_shared_grid supports univariate series only")
    t = _shared_grid(X, "X")
    xm = X.value_tensor()[:, :, 0]
    D, N = xm.shape
    u, sv, vt = np.linalg.svd(xm, full_matrices=False)
    threshold = (sv[0] if sv.size else 0.0) * max(D, N) * np.finfo(float).eps
    rank = int(np.sum(sv > threshold))
    if N > D or rank < N:
        raise RankError(
            f"value matrix ({D}x{N}) has numerical rank {rank} < {N} "
            f"(threshold {threshold:.3g})"
        )
    chol, _ = _cholesky(gram(cfg.k_prime, t), "within-series kernel matrix of X")
    w = scipy.linalg.cho_solve((chol, True), u, check_finite=False)
    middle = w.T @ gram(cfg.k_dprime, t) @ w
    middle = (middle + middle.T) / 2
    try:
        mchol = scipy.linalg.cholesky(middle, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        raise SingularKernelError(
            "compressed between-series kernel matrix is singular; the Gram is not invertible"
        ) from None
    minv = scipy.linalg.cho_solve((mchol, True), np.eye(N), check_finite=False)
    scaled = vt.T / sv
    out = scaled @ minv @ scaled.T
    return (out + out.T) / 2


@dataclass(frozen=True, eq=False)
class GramBundle:
    """A symmetric Gram matrix with its eigendecomposition ``Q diag(V) Q^T``.

    ``eigvals`` are sorted descending and clamped at zero; ``raw_min_eig``
    keeps the unclamped minimum and ``n_clamped`` counts the clamped values.
    """

    gram: np.ndarray
    eigvecs: np.ndarray
    eigvals: np.ndarray
    raw_min_eig: float = 0.0
    n_clamped: int = 0

    def __len__(self) -> int:
        return self.eigvals.size

    def reconstruct(self) -> np.ndarray:
        return (self.eigvecs * self.eigvals) @ self.eigvecs.T


def bundle(g: np.ndarray) -> GramBundle:
    """Eigendecompose a Gram matrix once for repeated shifted solves."""
    g = np.asarray(g, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise DimensionError(f"Gram must be square, got shape {g.shape}")
    g = (g + g.T) / 2
    try:
        vals, vecs = scipy.linalg.eigh(g, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericError(f"eigendecomposition failed: {exc}") from None
    vals, vecs = vals[::-1], vecs[:, ::-1]
    raw_min = float(vals[-1]) if vals.size else 0.0
    top = max(float(vals[0]), 0.0) if vals.size else 0.0
    neg = vals < 0
    n_bad = int(np.sum(vals < -CLAMP_RTOL * top))
    if n_bad:
        warnings.warn(
            f"{n_bad} eigenvalues below -{CLAMP_RTOL:g} * max clamped to 0 "
            f"(min {raw_min:.3g}, max {top:.3g})",
            stacklevel=2,
        )
    vals = np.where(neg, 0.0, vals)
    return GramBundle(g, np.ascontiguousarray(vecs), vals, raw_min, int(np.sum(neg)))


def shifted_solve(b: GramBundle, lam: float, rhs) -> np.ndarray:
    """``(K + lam I)^{-1} rhs`` from the cached eigendecomposition."""
    if not lam >= 0:
        raise ConfigError(f"shift must be >= 0, got {lam}")
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != len(b):
        raise DimensionError(f"rhs has {rhs.shape[0]} rows, Gram is {len(b)}x{len(b)}")
    shifted = b.eigvals + lam
    top = shifted[0] if shifted.size else 0.0
    if shifted.size and shifted[-1] <= len(b) * np.finfo(float).eps * top:
        if lam == 0:
            raise SingularShiftError(
                "Gram matrix has a zero eigenvalue; use a shift lam > 0"
            )
        raise SingularShiftError(f"K + {lam:g} I is numerically singular")
    proj = b.eigvecs.T @ rhs
    if rhs.ndim == 1:
        return b.eigvecs @ (proj / shifted)
    return b.eigvecs @ (proj / shifted[:, None])
