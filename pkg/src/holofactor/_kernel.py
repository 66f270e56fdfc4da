"""Fused single-trial search loop, JIT-compiled.

The kernel advances one query through the full iterative search. It is the
throughput path behind :func:`holofactor.factorizer.factorize`; the readable
numpy stepper in :mod:`holofactor.factorizer` follows the identical update
and RNG discipline and the two are required (and tested) to agree bit for
bit for the same generator state.

Canonical RNG draw order per factor update:
  1. ``standard_normal(M_f)`` iff the similarity output noise std is > 0
  2. ``standard_normal(D)`` iff the projection output noise std is > 0
     (absolute mode: whenever sigma > 0; device mode: the std scales with
     the L2 norm of the activated vector, so the draw is skipped when no
     value was activated and no current flows)
  3. one uniform per exactly-zero projection element, in index order

Weight matrices are float32. Raw similarity dot products are exact integers
for clean bipolar weights, so the zero-noise configurations remain exact;
normalized values are formed in float64.
"""

from __future__ import annotations

import numpy as np
from numba import njit

ACT_IDENTITY = 0
ACT_TOP_K = 1
ACT_THRESHOLD = 2

CONV_THRESHOLD = 0
CONV_FIXED_POINT = 1


@njit(cache=True, nogil=True)
def run_trial(
    product,  # (D,) float32, entries +-1
    w_sim,  # (F, Mmax, D) float32, similarity-side weights (rows past M_f are 0)
    w_proj,  # (F, Mmax, D) float32, projection-side weights
    m_per_factor,  # (F,) int64
    est,  # (F, D) float32 +-1, initial estimates; mutated in place
    sim_sigma,  # float64, absolute per-entry noise std on similarity outputs
    proj_sigma_abs,  # float64, absolute per-entry noise std on projection outputs
    proj_sigma_l2,  # float64, projection noise std per unit L2 of the activated vector
    act_kind,  # int64, ACT_* code
    act_k,  # (F,) int64, top-k count per factor
    act_t,  # (F,) float64, threshold per factor
    conv_policy,  # int64, CONV_* code
    t_conv,  # float64, convergence detection threshold (normalized units)
    n_max,  # int64, iteration budget
    sequential,  # boolean, sequential vs parallel estimate updates
    gen,  # np.random.Generator
):
    n_factors = w_sim.shape[0]
    dim = product.shape[0]
    m_max = w_sim.shape[1]

    prev_est = est.copy()
    unbound = np.empty(dim, dtype=np.float32)
    proj = np.empty(dim, dtype=np.float32)
    act = np.empty(m_max, dtype=np.float64)
    last_alpha = np.full((n_factors, m_max), -np.inf, dtype=np.float64)

    converged = False
    iterations = 0
    for it in range(1, n_max + 1):
        prev_est[:, :] = est
        sweep_ok = True
        for f in range(n_factors):
            m = m_per_factor[f]

            # unbind the latest (sequential) or previous-sweep (parallel)
            # estimates of all other factors from the product vector
            unbound[:] = product
            for g in range(n_factors):
                if g == f:
                    continue
                if sequential:
                    unbound *= est[g]
                else:
                    unbound *= prev_est[g]

            # similarity search
            raw = w_sim[f] @ unbound
            alpha = raw[:m].astype(np.float64) / dim
            if sim_sigma > 0.0:
                alpha += sim_sigma * gen.standard_normal(m)
            amax = alpha.max()
            last_alpha[f, :m] = alpha
            if amax <= t_conv:
                sweep_ok = False

            # activation
            w = act[:m]
            if act_kind == ACT_IDENTITY:
                w[:] = alpha
            elif act_kind == ACT_TOP_K:
                w[:] = 0.0
                order = np.argsort(-alpha, kind="mergesort")
                kept = 0
                for oi in range(m):
                    idx = order[oi]
                    if kept >= act_k[f] or alpha[idx] <= 0.0:
                        break
                    w[idx] = alpha[idx]
                    kept += 1
            else:
                t_f = act_t[f]
                for i in range(m):
                    w[i] = alpha[i] if alpha[i] > t_f else 0.0

            # projection over activated rows
            proj[:] = 0.0
            l2sq = 0.0
            for i in range(m):
                wi = w[i]
                if wi != 0.0:
                    l2sq += wi * wi
                    proj += np.float32(wi) * w_proj[f, i]
            out = proj.astype(np.float64)
            if proj_sigma_abs > 0.0:
                out += proj_sigma_abs * gen.standard_normal(dim)
            elif proj_sigma_l2 > 0.0 and l2sq > 0.0:
                out += (proj_sigma_l2 * np.sqrt(l2sq)) * gen.standard_normal(dim)

            # bipolarize with fair random tie-breaks
            for d in range(dim):
                v = out[d]
                if v > 0.0:
                    est[f, d] = 1.0
                elif v < 0.0:
                    est[f, d] = -1.0
                else:
                    est[f, d] = 1.0 if gen.random() < 0.5 else -1.0

        iterations = it
        if conv_policy == CONV_THRESHOLD:
            converged = sweep_ok
        else:
            converged = True
            for f in range(n_factors):
                for d in range(dim):
                    if est[f, d] != prev_est[f, d]:
                        converged = False
                        break
                if not converged:
                    break
        if converged:
            break

    ops = 0
    for f in range(n_factors):
        ops += 2 * m_per_factor[f]
    return converged, iterations, last_alpha, iterations * ops
