"""Scalar kernels on timestamps, with optional Kronecker-delta regularization.

``k(a, b) = base(a, b) + lam * [a == b]`` where ``base`` is one of

* ``linear``:    ``a * b``
* ``rbf``:       ``exp(-gamma * (a - b)**2)``
* ``laplacian``: ``exp(-gamma * |a - b|)``

The delta term compares stored floats exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

__all__ = ["VectorKernel", "KINDS", "gram"]

KINDS = ("linear", "rbf", "laplacian")


@dataclass(frozen=True)
class VectorKernel:
    kind: str
    gamma: float | None = None
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown vector kernel kind {self.kind!r}")
        if self.kind == "linear":
            if self.gamma is not None:
                raise ConfigError("linear kernel takes no gamma")
        else:
            if self.gamma is None or not np.isfinite(self.gamma) or self.gamma <= 0:
                raise ConfigError(f"{self.kind} kernel needs gamma > 0, got {self.gamma}")
            object.__setattr__(self, "gamma", float(self.gamma))
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        object.__setattr__(self, "lam", float(self.lam))

    def __call__(self, a: float, b: float) -> float:
        return float(gram(self, np.array([a]), np.array([b]))[0, 0])

    def to_dict(self) -> dict:
        return {"kind": self.kind, "gamma": self.gamma, "lambda": self.lam}

    @classmethod
    def from_dict(cls, d: dict) -> VectorKernel:
        unknown = set(d) - {"kind", "gamma", "lambda"}
        if unknown:
            raise ConfigError(f"unknown vector kernel fields {sorted(unknown)}")
        if "kind" not in d:
            raise ConfigError("vector kernel needs a kind")
        return cls(d["kind"], d.get("gamma"), d.get("lambda", 0.0))


def _base(k: VectorKernel, t: np.ndarray, s: np.ndarray) -> np.ndarray:
    if k.kind == "linear":
        return np.multiply.outer(t, s)
    diff = np.subtract.outer(t, s)
    if k.kind == "rbf":
        return np.exp(-k.gamma * diff * diff)
    return np.exp(-k.gamma * np.abs(diff))


def gram(k: VectorKernel, t, s=None) -> np.ndarray:
    """Matrix of ``k(t_i, s_j)``.

    With ``s`` omitted (or the same object as ``t``) the result is exactly
    symmetric: the upper triangle is computed and mirrored.
    """
    t = np.asarray(t, dtype=float)
    symmetric = s is None or s is t
    s = t if symmetric else np.asarray(s, dtype=float)
    if t.ndim != 1 or s.ndim != 1:
        raise ConfigError("timestamps must be 1-D")
    g = _base(k, t, s)
    if k.lam:
        g = g + k.lam * (t[:, None] == s[None, :])
    if symmetric:
        upper = np.triu(g)
        g = upper + np.triu(g, 1).T
    return g
