"""Bipolar hypervector algebra and exact codebook linear algebra.

Hypervectors are plain numpy arrays of dtype int8 with entries in {-1, +1}.
All operations are pure; whenever a tie has to be broken (an element-wise
sum of exactly zero) the randomness comes from a caller-provided
``numpy.random.Generator`` so that entire trials stay replayable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

BIPOLAR_DTYPE = np.int8


@dataclass(frozen=True)
class Codebook:
    """A factor's search space: M bipolar codevectors of shared dimension D.

    ``label`` identifies the factor (1-based), ``seed`` is the PRNG seed the
    codebook was drawn from so it can be regenerated bit-identically.
    """

    vectors: np.ndarray  # (M, D) int8, entries in {-1, +1}
    label: int = 1
    seed: int | None = None

    def __post_init__(self) -> None:
        v = self.vectors
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError("codebook must be a non-empty (M, D) matrix")
        if not np.isin(v, (-1, 1)).all():
            raise ValueError("codebook entries must be -1 or +1")

    @property
    def m(self) -> int:
        return self.vectors.shape[0]

    @property
    def d(self) -> int:
        return self.vectors.shape[1]


def random_codebook(m: int, d: int, seed: int, label: int = 1) -> Codebook:
    """Draw a codebook of ``m`` i.i.d. uniform bipolar vectors of dimension ``d``.

    Regeneration from the same ``(seed, m, d)`` is bit-identical.
    """
    if m < 1 or d < 1:
        raise ValueError(f"codebook size and dimension must be positive, got m={m}, d={d}")
    rng = np.random.default_rng(seed)
    vectors = rng.integers(0, 2, size=(m, d), dtype=BIPOLAR_DTYPE)
    vectors = (2 * vectors - 1).astype(BIPOLAR_DTYPE)
    return Codebook(vectors=vectors, label=label, seed=seed)


def _check_bipolar_1d(x: np.ndarray, name: str = "vector") -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    return x


def bind(xs: Sequence[np.ndarray]) -> np.ndarray:
    """Element-wise product of bipolar vectors (commutative, self-inverse)."""
    if len(xs) == 0:
        raise ValueError("bind requires at least one vector")
    first = _check_bipolar_1d(xs[0])
    out = first.astype(BIPOLAR_DTYPE, copy=True)
    for x in xs[1:]:
        x = _check_bipolar_1d(x)
        if x.shape != first.shape:
            raise ValueError("bind requires vectors of equal dimension")
        out *= x.astype(BIPOLAR_DTYPE, copy=False)
    return out


def unbind(p: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Reverse a binding: identical to bind since +-1 multiplication is self-inverse."""
    return bind([p, x])


def bundle(xs: Sequence[np.ndarray], rng: np.random.Generator) -> np.ndarray:
    """Superposition: element-wise sum followed by bipolarization.

    Elements whose sum is exactly zero are set to a fair random +-1 drawn
    from ``rng``.
    """
    if len(xs) == 0:
        raise ValueError("bundle requires at least one vector")
    first = _check_bipolar_1d(xs[0])
    total = np.zeros(first.shape[0], dtype=np.int64)
    for x in xs:
        x = _check_bipolar_1d(x)
        if x.shape != first.shape:
            raise ValueError("bundle requires vectors of equal dimension")
        total += x
    return bipolarize(total, rng)


def similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two bipolar vectors: <a, b> / D, in [-1, 1]."""
    a = _check_bipolar_1d(a)
    b = _check_bipolar_1d(b)
    if a.shape != b.shape:
        raise ValueError("similarity requires vectors of equal dimension")
    dot = int(np.dot(a.astype(np.int64), b.astype(np.int64)))
    return dot / a.shape[0]


def mvm(cb: Codebook, x: np.ndarray) -> np.ndarray:
    """Similarity of ``x`` against every codevector (exact, noise-free).

    Returns a float64 vector of length M with entry i equal to
    ``similarity(x, cb.vectors[i])``.
    """
    x = _check_bipolar_1d(x)
    if x.shape[0] != cb.d:
        raise ValueError(f"dimension mismatch: codebook D={cb.d}, vector D={x.shape[0]}")
    dots = cb.vectors.astype(np.int64) @ x.astype(np.int64)
    return dots.astype(np.float64) / cb.d


def transposed_mvm(cb: Codebook, w: np.ndarray) -> np.ndarray:
    """Similarity-weighted superposition of codevectors, before the sign.

    ``out[d] = sum_i w[i] * cb.vectors[i][d]`` as float64 of length D.
    """
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1 or w.shape[0] != cb.m:
        raise ValueError(f"weight length {w.shape} does not match codebook size M={cb.m}")
    return cb.vectors.astype(np.float64).T @ w


def bipolarize(v: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Element-wise sign with fair random +-1 for exact zeros."""
    v = np.asarray(v)
    out = np.where(v > 0, 1, -1).astype(BIPOLAR_DTYPE)
    zeros = np.flatnonzero(v == 0)
    if zeros.size:
        draws = rng.random(zeros.size)
        out[zeros] = np.where(draws < 0.5, 1, -1).astype(BIPOLAR_DTYPE)
    return out


def circular_shift(x: np.ndarray, k: int) -> np.ndarray:
    """Rotate right by ``k`` positions (mod D); inverse is a shift by ``-k``."""
    x = np.asarray(x)
    return np.roll(x, k)
