"""Ground truth: query synthesis and exhaustive brute-force factorization."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from holofactor.factorizer import BudgetError
from holofactor.vsa import BIPOLAR_DTYPE, Codebook, bind

DEFAULT_BRUTE_FORCE_BUDGET = 2**24


class CodebookCollisionError(RuntimeError):
    """Two distinct codevector combinations bind to the same product vector."""


@dataclass(frozen=True)
class QueryInstance:
    """A product vector with known provenance.

    ``corruption`` is the fraction of sign-flipped elements relative to the
    exact bind of the true codevectors (0 for exact products).
    """

    product: np.ndarray  # (D,) int8
    truth: tuple[int, ...]
    codebook_seeds: tuple[int | None, ...]
    corruption: float


def make_query(
    codebooks: Sequence[Codebook],
    truth: Sequence[int],
    corruption: float,
    rng: np.random.Generator,
) -> QueryInstance:
    """Bind the selected codevectors and sign-flip a fixed fraction of elements.

    Exactly ``round(corruption * D)`` uniformly chosen positions are negated,
    modeling an approximate product vector with a known error level.
    """
    if len(truth) != len(codebooks):
        raise ValueError("need one truth index per codebook")
    if not 0.0 <= corruption <= 0.5:
        raise ValueError("corruption must lie in [0, 0.5]")
    for idx, cb in zip(truth, codebooks):
        if not 0 <= idx < cb.m:
            raise ValueError(f"truth index {idx} out of range for codebook of size {cb.m}")
    product = bind([cb.vectors[idx] for cb, idx in zip(codebooks, truth)])
    n_flips = round(corruption * product.shape[0])
    if n_flips:
        flip = rng.permutation(product.shape[0])[:n_flips]
        product = product.copy()
        product[flip] = -product[flip]
    return QueryInstance(
        product=product.astype(BIPOLAR_DTYPE),
        truth=tuple(int(i) for i in truth),
        codebook_seeds=tuple(cb.seed for cb in codebooks),
        corruption=float(corruption),
    )


def brute_force(
    p: np.ndarray,
    codebooks: Sequence[Codebook],
    budget: int = DEFAULT_BRUTE_FORCE_BUDGET,
) -> tuple[tuple[int, ...], float, int]:
    """Exhaustive search over all codevector combinations.

    Returns ``(indices, best_similarity, op_count)`` where ``op_count`` is
    the M**F dot products an exhaustive scan of precomputed products costs
    (the comparison currency; the implementation factors the scan without
    changing what it searches). Ties are broken toward the lexicographically
    smallest combination; a tie at similarity 1.0 means two combinations
    bind to the same vector and raises CodebookCollisionError.
    """
    p = np.asarray(p)
    dim = codebooks[0].d
    if p.shape != (dim,):
        raise ValueError("product dimension does not match the codebooks")
    total = 1
    for cb in codebooks:
        total *= cb.m
    if total > budget:
        raise BudgetError(
            f"brute force over {total} combinations exceeds the budget of {budget}"
        )

    last = codebooks[-1]
    last_mat = last.vectors.astype(np.float64)
    heads = [cb for cb in codebooks[:-1]]
    best_dot = -np.inf
    best_idx: tuple[int, ...] = ()
    best_ties = 0

    def scan(prefix: tuple[int, ...], partial: np.ndarray) -> None:
        nonlocal best_dot, best_idx, best_ties
        if len(prefix) == len(heads):
            dots = last_mat @ partial.astype(np.float64)
            top = int(np.argmax(dots))
            if dots[top] > best_dot:
                best_dot = dots[top]
                best_idx = prefix + (top,)
                best_ties = int(np.count_nonzero(dots == dots[top]))
            elif dots[top] == best_dot:
                best_ties += int(np.count_nonzero(dots == dots[top]))
            return
        cb = heads[len(prefix)]
        for i in range(cb.m):
            scan(prefix + (i,), partial * cb.vectors[i])
        return

    scan((), p.astype(np.int64))
    best_sim = best_dot / dim
    if best_sim == 1.0 and best_ties > 1:
        raise CodebookCollisionError(
            "distinct combinations bind to identical vectors; regenerate the codebook seed"
        )
    return best_idx, float(best_sim), total
