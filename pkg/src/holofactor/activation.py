"""Activation functions on similarity vectors and the K-to-threshold mapping.

The winners-take-all threshold keeps only similarity values strictly above a
fixed threshold T. For random bipolar vectors the similarity values are
approximately N(0, 1/D), so a target expected activation count K maps to
``T = Phi^-1(1 - K/M) / sqrt(D)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

_STD_NORMAL = NormalDist()


@dataclass(frozen=True)
class ActivationSpec:
    """Which nonlinearity to apply between the similarity search and projection.

    kind: one of 'identity', 'top_k', 'threshold'
    k:    expected activation count; required integer >= 1 for 'top_k',
          fractional values are allowed only for deriving a threshold
    t:    normalized similarity threshold, required finite for 'threshold'
    """

    kind: str
    k: float | None = None
    t: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("identity", "top_k", "threshold"):
            raise ValueError(f"unknown activation kind {self.kind!r}")
        if self.kind == "top_k":
            if self.k is None or self.k < 1 or int(self.k) != self.k:
                raise ValueError("top_k requires an integer k >= 1")
        if self.kind == "threshold":
            if self.t is None or not math.isfinite(self.t):
                raise ValueError("threshold requires a finite t")


def identity(a: np.ndarray) -> np.ndarray:
    """Neutral activation: output equals input."""
    return np.asarray(a, dtype=np.float64)


def top_k(a: np.ndarray, k: int) -> np.ndarray:
    """Keep the K strongest strictly positive values, zero the rest.

    Only positive values are eligible; if fewer than K values are positive,
    only those are kept. Ties at rank K are broken by lowest index.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    a = np.asarray(a, dtype=np.float64)
    out = np.zeros_like(a)
    # stable sort on the negated values: descending by value, ascending index
    order = np.argsort(-a, kind="stable")
    kept = 0
    for idx in order:
        if kept >= k or a[idx] <= 0:
            break
        out[idx] = a[idx]
        kept += 1
    return out


def threshold(a: np.ndarray, t: float) -> np.ndarray:
    """Winners-take-all: keep values strictly above ``t``, zero the rest."""
    a = np.asarray(a, dtype=np.float64)
    return np.where(a > t, a, 0.0)


def k_to_threshold(k: float, m: int, d: int) -> float:
    """Threshold such that on average K of M random similarity values exceed it.

    Models the similarity distribution as N(0, 1/D); valid for 0 < K < M.
    """
    if not 0 < k < m:
        raise ValueError(f"k must satisfy 0 < k < m, got k={k}, m={m}")
    return inverse_normal_cdf(1.0 - k / m) / math.sqrt(d)


def inverse_normal_cdf(p: float) -> float:
    """Standard normal quantile, absolute error well below 1e-9 on (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie strictly inside (0, 1), got {p}")
    return _STD_NORMAL.inv_cdf(p)
