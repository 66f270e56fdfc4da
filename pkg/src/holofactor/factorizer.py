"""Iterative factorization of bipolar product vectors.

The engine maintains one estimate per factor, and per sweep updates each
factor by unbinding the other estimates from the product vector, computing
(possibly noisy) similarities against the factor's codebook, sparsifying
them with the configured activation, and projecting back through the
transposed codebook followed by bipolarization. Updates are sequential by
default: factor f+1 already sees factor f's estimate from the current sweep.

Convergence is detected either by the similarity threshold rule (every
factor has at least one similarity above ``t_convergence_ratio`` in the
current sweep) or by a fixed point (two identical consecutive sweeps of all
estimates). Non-convergence within the iteration budget is a result state,
not an error; predictions are the per-factor argmax at exit either way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from holofactor import _kernel
from holofactor.activation import ActivationSpec, top_k as act_top_k
from holofactor.noise import (
    AdditiveGaussianBackend,
    ExactBackend,
    NoiseBackend,
    PcmBackend,
    ProgrammedArray,
    program_array,
)
from holofactor.vsa import BIPOLAR_DTYPE, Codebook, bipolarize

# Convergence detection threshold as a fraction of D. Tuned once with the
# Gaussian-process search in holofactor.tuning (see notes in the repository
# README); it separates a locked-in factor (similarity near 1, or near the
# mean drift attenuation for conductance backends) from the largest
# spurious similarity a random estimate produces.
DEFAULT_CONVERGENCE_RATIO = 0.55

_ACT_CODES = {
    "identity": _kernel.ACT_IDENTITY,
    "top_k": _kernel.ACT_TOP_K,
    "threshold": _kernel.ACT_THRESHOLD,
}
_CONV_CODES = {
    "threshold": _kernel.CONV_THRESHOLD,
    "fixed_point": _kernel.CONV_FIXED_POINT,
}


class BudgetError(RuntimeError):
    """An operation would exceed its configured compute budget."""


@dataclass(frozen=True)
class FactorizerConfig:
    """Search configuration; see module docstring for the update semantics."""

    activation: ActivationSpec | tuple[ActivationSpec, ...]
    t_convergence_ratio: float = DEFAULT_CONVERGENCE_RATIO
    backend: NoiseBackend = ExactBackend()
    n_max: int | None = None  # None: largest budget below the brute-force bound
    update_policy: str = "sequential"
    convergence_policy: str = "threshold"
    multiplex: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.t_convergence_ratio <= 1.0:
            raise ValueError("t_convergence_ratio must lie in [0, 1]")
        if self.update_policy not in ("sequential", "parallel"):
            raise ValueError(f"unknown update policy {self.update_policy!r}")
        if self.convergence_policy not in _CONV_CODES:
            raise ValueError(f"unknown convergence policy {self.convergence_policy!r}")
        if self.n_max is not None and self.n_max < 1:
            raise ValueError("n_max must be positive")


@dataclass
class FactorizerState:
    """Mutable per-query search state for the step-wise API."""

    estimates: np.ndarray  # (F, D) float32, entries +-1
    similarities: np.ndarray | None = None  # (F, Mmax) float64, last sweep
    iteration: int = 0
    op_count: int = 0
    prev_estimates: np.ndarray | None = None


@dataclass(frozen=True)
class FactorizationResult:
    converged: bool
    predicted: tuple[int, ...]
    iterations: int
    op_count: int
    trace: np.ndarray | None = None  # (iterations, F) max similarity per sweep


@dataclass(frozen=True)
class PcmArraySet:
    """Programmed arrays backing one experiment (shared across queries)."""

    sim: tuple[ProgrammedArray, ...]
    proj: tuple[ProgrammedArray, ...]
    multiplex: bool


@dataclass
class Prepared:
    """Precompiled weight matrices and noise levels for one experiment."""

    w_sim: np.ndarray  # (F, Mmax, D) float32
    w_proj: np.ndarray  # (F, Mmax, D) float32
    m_per_factor: np.ndarray  # (F,) int64
    sim_sigma: float
    proj_sigma_abs: float
    proj_sigma_l2: float
    act_kind: int
    act_k: np.ndarray  # (F,) int64
    act_t: np.ndarray  # (F,) float64
    arrays: PcmArraySet | None


def max_iterations(m: int, f: int) -> int:
    """Largest iteration budget that still beats brute force.

    Returns the largest integer strictly below M**(F-1) / F, so that the
    total number of similarity-search dot products N * M * F stays strictly
    below the M**F of exhaustive search.
    """
    if m < 2 or f < 2:
        raise ValueError("max_iterations requires m >= 2 and f >= 2")
    return (m ** (f - 1) - 1) // f


def shift_for_factor(f: int) -> int:
    """Circular shift multiplexing a shared crossbar: factor f shifts by f - 1.

    Factor numbers are 1-based; factor 1 is unshifted. The inverse shift is
    applied after the projection.
    """
    if f < 1:
        raise ValueError("factor numbers are 1-based")
    return f - 1


def multiplexed_codebooks(base: Codebook, n_factors: int) -> list[Codebook]:
    """Effective per-factor codebooks when one crossbar serves all factors.

    Shifting the unbound estimate right by ``shift_for_factor(f)`` before the
    similarity search (and reversing it after the projection) is equivalent
    to searching against codevectors whose coordinates are rotated left by
    the same amount; these are the codebooks a multiplexed experiment binds
    its queries from.
    """
    if n_factors < 2:
        raise ValueError("multiplexing requires at least two factors")
    out = []
    for f in range(1, n_factors + 1):
        vectors = np.roll(base.vectors, -shift_for_factor(f), axis=1)
        out.append(Codebook(vectors=vectors, label=f, seed=base.seed))
    return out


def init_estimates(codebooks: Sequence[Codebook], rng: np.random.Generator) -> list[np.ndarray]:
    """Superpose each codebook to give every codevector an equal initial chance."""
    if len(codebooks) < 2:
        raise ValueError("factorization requires at least two factors")
    out = []
    for cb in codebooks:
        total = cb.vectors.astype(np.int64).sum(axis=0)
        out.append(bipolarize(total, rng))
    return out


def unbind_estimate(p: np.ndarray, estimates: Sequence[np.ndarray], f: int) -> np.ndarray:
    """Remove every factor's estimate except factor ``f`` (1-based) from ``p``."""
    if not 1 <= f <= len(estimates):
        raise ValueError(f"factor index {f} out of range 1..{len(estimates)}")
    out = np.asarray(p).astype(BIPOLAR_DTYPE, copy=True)
    for g, est in enumerate(estimates, start=1):
        if g != f:
            out *= np.asarray(est, dtype=BIPOLAR_DTYPE)
    return out


def detect_limit_cycle(estimate_history: Sequence, l_max: int) -> int | None:
    """Smallest cycle length the latest state closes, if any.

    ``estimate_history`` is a sequence of per-sweep states, each a sequence
    of F bipolar estimates. A cycle of length l requires the latest state to
    equal the state l sweeps earlier with at least one differing state in
    between; a constant run is a fixed point, not a cycle.
    """

    def states_equal(a, b) -> bool:
        return all(np.array_equal(x, y) for x, y in zip(a, b))

    n = len(estimate_history)
    last = estimate_history[-1] if n else None
    for cycle_len in range(2, l_max + 1):
        if cycle_len >= n:
            break
        if not states_equal(last, estimate_history[-1 - cycle_len]):
            continue
        if any(
            not states_equal(last, estimate_history[-1 - j])
            for j in range(1, cycle_len)
        ):
            return cycle_len
    return None


def _activations_per_factor(config: FactorizerConfig, n_factors: int) -> tuple[ActivationSpec, ...]:
    act = config.activation
    if isinstance(act, ActivationSpec):
        return (act,) * n_factors
    acts = tuple(act)
    if len(acts) != n_factors:
        raise ValueError(f"need one activation per factor, got {len(acts)} for F={n_factors}")
    if len({a.kind for a in acts}) != 1:
        raise ValueError("per-factor activations must share the same kind")
    return acts


def _validate_budget(n_max: int, m_per_factor: Sequence[int]) -> None:
    search_ops = n_max * sum(m_per_factor)
    brute_ops = math.prod(m_per_factor)
    if search_ops >= brute_ops:
        raise ValueError(
            f"iteration budget {n_max} spends {search_ops} similarity ops, "
            f"not strictly below the {brute_ops} of brute force"
        )


def resolve_n_max(config: FactorizerConfig, codebooks: Sequence[Codebook]) -> int:
    ms = [cb.m for cb in codebooks]
    if config.n_max is not None:
        n = config.n_max
    else:
        # largest budget with N * sum(M) strictly below prod(M); equals
        # max_iterations(M, F) when all factors share one codebook size
        n = max(1, (math.prod(ms) - 1) // sum(ms))
    _validate_budget(n, ms)
    return n


def program_arrays(
    codebooks: Sequence[Codebook], config: FactorizerConfig, rng: np.random.Generator
) -> PcmArraySet:
    """Program the conductance arrays backing one experiment.

    Without multiplexing, arrays are programmed factor-major, similarity
    side before projection side. With multiplexing a single base array is
    programmed (plus an independent projection array unless shared) and
    reused for every factor through coordinate rotation.
    """
    backend = config.backend
    if not isinstance(backend, PcmBackend):
        raise TypeError("programming arrays requires a pcm backend")
    if config.multiplex:
        base = codebooks[0]
        for f, cb in enumerate(codebooks[1:], start=2):
            expected = np.roll(base.vectors, -shift_for_factor(f), axis=1)
            if not np.array_equal(cb.vectors, expected):
                raise ValueError(
                    "multiplexed codebooks must be coordinate rotations of the first "
                    "codebook; build them with multiplexed_codebooks()"
                )
        sim = program_array(base, backend.params, rng)
        proj = sim if backend.shared_array else program_array(base, backend.params, rng)
        return PcmArraySet(sim=(sim,), proj=(proj,), multiplex=True)
    sims, projs = [], []
    for cb in codebooks:
        sim = program_array(cb, backend.params, rng)
        proj = sim if backend.shared_array else program_array(cb, backend.params, rng)
        sims.append(sim)
        projs.append(proj)
    return PcmArraySet(sim=tuple(sims), proj=tuple(projs), multiplex=False)


def _operating_weights(arr: ProgrammedArray, params, read_time: float) -> np.ndarray:
    """Static effective weights of a programmed array in the operating model.

    The search engine treats the crossbar stochasticity as observed at the
    MVM output: the programming spread and the read noise act as fresh
    per-call dither (see :func:`prepare`), so the static weight of a device
    is its ideal target drifted by the device's own exponent. The fitted
    exponent spread enters as a relative variability around the mean drift
    coefficient, which leaves a small real-valued heterogeneity frozen into
    the array (about 1.5 percent at the one-hour read) and removes the value
    quantization of clean bipolar weights.
    """
    rel_exponents = params.nu * (1.0 + (arr.drift_exponents - params.nu))
    factors = np.power(read_time / params.t0_s, -rel_exponents)
    return arr.signs * factors


def _weight_stack(
    codebooks: Sequence[Codebook],
    arrays: PcmArraySet | None,
    backend: NoiseBackend,
    side: str,
) -> np.ndarray:
    n_factors = len(codebooks)
    dim = codebooks[0].d
    m_max = max(cb.m for cb in codebooks)
    stack = np.zeros((n_factors, m_max, dim), dtype=np.float32)
    if isinstance(backend, PcmBackend):
        source = arrays.sim if side == "sim" else arrays.proj
        if arrays.multiplex:
            base = _operating_weights(source[0], backend.params, backend.read_time_s)
            base = base.astype(np.float32)
            for f in range(n_factors):
                stack[f, : codebooks[f].m] = np.roll(base, -shift_for_factor(f + 1), axis=1)
        else:
            for f, arr in enumerate(source):
                stack[f, : codebooks[f].m] = _operating_weights(
                    arr, backend.params, backend.read_time_s
                ).astype(np.float32)
    else:
        for f, cb in enumerate(codebooks):
            stack[f, : cb.m] = cb.vectors.astype(np.float32)
    return stack


def prepare(
    codebooks: Sequence[Codebook],
    config: FactorizerConfig,
    rng: np.random.Generator | None = None,
    arrays: PcmArraySet | None = None,
) -> Prepared:
    """Freeze per-experiment state: weight matrices, noise levels, activation.

    For the pcm backend the drift heterogeneity is frozen here (drawn from
    ``rng`` unless ``arrays`` is supplied) while the programming spread and
    the read noise act as fresh per-device dither on every MVM, with
    standard deviation ``sigma_call = hypot(sigma_p * (t/T0)^-nu, sigma_r)``
    in conductance units. Summing D independent per-device draws makes the
    per-entry similarity noise exactly Gaussian with std
    ``sigma_call / (G_tar * sqrt(D))`` after the output normalization, and
    the projection-side noise std scales with the L2 norm of the activated
    similarity vector instead, ``sigma_call * ||w|| / G_tar``. Scaling both
    noise components to zero leaves a deterministic search over the frozen
    drifted weights.
    """
    if len(codebooks) < 2:
        raise ValueError("factorization requires at least two factors")
    dims = {cb.d for cb in codebooks}
    if len(dims) != 1:
        raise ValueError("all codebooks must share one dimension")
    dim = dims.pop()
    backend = config.backend

    sim_sigma = 0.0
    proj_sigma_abs = 0.0
    proj_sigma_l2 = 0.0
    if isinstance(backend, AdditiveGaussianBackend):
        sim_sigma = backend.sigma_out
        proj_sigma_abs = backend.sigma_out
    elif isinstance(backend, PcmBackend):
        if arrays is None:
            if rng is None:
                raise ValueError("pcm backend needs either programmed arrays or an rng")
            arrays = program_arrays(codebooks, config, rng)
        params = backend.params
        drift = (backend.read_time_s / params.t0_s) ** (-params.nu)
        # slow per-read fluctuation of the effective drift factor; a
        # scale-independent noise floor far below the programming and read
        # components at the fitted defaults
        sigma_drift = (
            params.g_tar_us
            * drift
            * params.nu
            * params.sigma_nu
            * math.log(backend.read_time_s / params.t0_s)
        )
        sigma_call = math.sqrt(
            (params.sigma_p_us * drift) ** 2 + params.sigma_r_us**2 + sigma_drift**2
        )
        sim_sigma = sigma_call / (params.g_tar_us * math.sqrt(dim))
        proj_sigma_l2 = sigma_call / params.g_tar_us

    acts = _activations_per_factor(config, len(codebooks))
    act_kind = _ACT_CODES[acts[0].kind]
    act_k = np.array([int(a.k) if a.kind == "top_k" else 0 for a in acts], dtype=np.int64)
    act_t = np.array([a.t if a.kind == "threshold" else 0.0 for a in acts], dtype=np.float64)

    return Prepared(
        w_sim=_weight_stack(codebooks, arrays, backend, "sim"),
        w_proj=_weight_stack(codebooks, arrays, backend, "proj"),
        m_per_factor=np.array([cb.m for cb in codebooks], dtype=np.int64),
        sim_sigma=sim_sigma,
        proj_sigma_abs=proj_sigma_abs,
        proj_sigma_l2=proj_sigma_l2,
        act_kind=act_kind,
        act_k=act_k,
        act_t=act_t,
        arrays=arrays,
    )


def _python_sweep(
    rt: Prepared,
    product: np.ndarray,
    est: np.ndarray,
    prev_est: np.ndarray,
    config: FactorizerConfig,
    rng: np.random.Generator,
    last_alpha: np.ndarray,
) -> bool:
    """One full sweep over all factors; the readable mirror of the kernel.

    Mutates ``est`` and ``last_alpha``; returns whether every factor produced
    a similarity above the convergence threshold. Must consume the RNG in
    exactly the kernel's order (see holofactor._kernel).
    """
    n_factors, dim = est.shape
    sequential = config.update_policy == "sequential"
    sweep_ok = True
    for f in range(n_factors):
        m = int(rt.m_per_factor[f])
        source = est if sequential else prev_est
        unbound = product.copy()
        for g in range(n_factors):
            if g != f:
                unbound *= source[g]
        raw = rt.w_sim[f] @ unbound
        alpha = raw[:m].astype(np.float64) / dim
        if rt.sim_sigma > 0.0:
            alpha += rt.sim_sigma * rng.standard_normal(m)
        last_alpha[f, :m] = alpha
        if alpha.max() <= config.t_convergence_ratio:
            sweep_ok = False

        if rt.act_kind == _kernel.ACT_IDENTITY:
            w = alpha
        elif rt.act_kind == _kernel.ACT_TOP_K:
            w = act_top_k(alpha, int(rt.act_k[f]))
        else:
            w = np.where(alpha > rt.act_t[f], alpha, 0.0)

        proj = np.zeros(dim, dtype=np.float32)
        l2sq = 0.0
        for i in np.flatnonzero(w):
            l2sq += w[i] * w[i]
            proj += np.float32(w[i]) * rt.w_proj[f, i]
        out = proj.astype(np.float64)
        if rt.proj_sigma_abs > 0.0:
            out += rt.proj_sigma_abs * rng.standard_normal(dim)
        elif rt.proj_sigma_l2 > 0.0 and l2sq > 0.0:
            out += (rt.proj_sigma_l2 * math.sqrt(l2sq)) * rng.standard_normal(dim)

        new_est = np.where(out > 0, 1.0, -1.0).astype(np.float32)
        zeros = np.flatnonzero(out == 0)
        if zeros.size:
            draws = rng.random(zeros.size)
            new_est[zeros] = np.where(draws < 0.5, 1.0, -1.0).astype(np.float32)
        est[f] = new_est
    return sweep_ok


def make_state(codebooks: Sequence[Codebook], rng: np.random.Generator) -> FactorizerState:
    """Fresh search state with superposition initial estimates."""
    est = np.stack([e.astype(np.float32) for e in init_estimates(codebooks, rng)])
    return FactorizerState(estimates=est)


def step(
    state: FactorizerState,
    product: np.ndarray,
    codebooks: Sequence[Codebook],
    config: FactorizerConfig,
    rng: np.random.Generator,
    arrays: PcmArraySet | None = None,
    prepared: Prepared | None = None,
) -> FactorizerState:
    """Advance the search by one full sweep over all factors."""
    rt = prepared if prepared is not None else prepare(codebooks, config, rng, arrays)
    n_factors = state.estimates.shape[0]
    m_max = int(rt.m_per_factor.max())
    state.prev_estimates = state.estimates.copy()
    last_alpha = np.full((n_factors, m_max), -np.inf)
    _python_sweep(
        rt,
        np.asarray(product, dtype=np.float32),
        state.estimates,
        state.prev_estimates,
        config,
        rng,
        last_alpha,
    )
    state.similarities = last_alpha
    state.iteration += 1
    state.op_count += 2 * int(rt.m_per_factor.sum())
    return state


def check_convergence(state: FactorizerState, config: FactorizerConfig) -> bool:
    """Whether the last completed sweep satisfies the convergence policy."""
    if state.iteration < 1:
        return False
    if config.convergence_policy == "threshold":
        if state.similarities is None:
            return False
        return bool(
            (state.similarities.max(axis=1) > config.t_convergence_ratio).all()
        )
    return state.prev_estimates is not None and np.array_equal(
        state.estimates, state.prev_estimates
    )


def factorize(
    product: np.ndarray,
    codebooks: Sequence[Codebook],
    config: FactorizerConfig,
    rng: np.random.Generator,
    arrays: PcmArraySet | None = None,
    prepared: Prepared | None = None,
    trace: bool = False,
) -> FactorizationResult:
    """Search for the codevector combination that binds to ``product``.

    Deterministic given the generator state. For the pcm backend, arrays are
    programmed from ``rng`` first (unless supplied), then the initial
    estimates consume their tie-break draws, then the sweep loop runs until
    convergence or the iteration budget. ``trace=True`` records the
    per-sweep maximum similarity of every factor (slower pure-numpy path,
    bit-identical results).
    """
    product = np.asarray(product)
    if product.ndim != 1 or product.shape[0] != codebooks[0].d:
        raise ValueError("product dimension does not match the codebooks")
    n_max = resolve_n_max(config, codebooks)
    rt = prepared if prepared is not None else prepare(codebooks, config, rng, arrays)
    est = np.stack([e.astype(np.float32) for e in init_estimates(codebooks, rng)])
    product32 = product.astype(np.float32)
    n_factors = len(codebooks)
    m_max = int(rt.m_per_factor.max())

    if not trace:
        converged, iterations, last_alpha, op_count = _kernel.run_trial(
            product32,
            rt.w_sim,
            rt.w_proj,
            rt.m_per_factor,
            est,
            rt.sim_sigma,
            rt.proj_sigma_abs,
            rt.proj_sigma_l2,
            rt.act_kind,
            rt.act_k,
            rt.act_t,
            _CONV_CODES[config.convergence_policy],
            config.t_convergence_ratio,
            n_max,
            config.update_policy == "sequential",
            rng,
        )
        trace_array = None
    else:
        prev_est = est.copy()
        last_alpha = np.full((n_factors, m_max), -np.inf)
        trace_rows = []
        converged = False
        iterations = 0
        for it in range(1, n_max + 1):
            prev_est[:, :] = est
            sweep_ok = _python_sweep(rt, product32, est, prev_est, config, rng, last_alpha)
            iterations = it
            trace_rows.append(last_alpha.max(axis=1).copy())
            if config.convergence_policy == "threshold":
                converged = sweep_ok
            else:
                converged = np.array_equal(est, prev_est)
            if converged:
                break
        op_count = iterations * 2 * int(rt.m_per_factor.sum())
        trace_array = np.array(trace_rows)

    predicted = tuple(
        int(np.argmax(last_alpha[f, : rt.m_per_factor[f]])) for f in range(n_factors)
    )
    return FactorizationResult(
        converged=bool(converged),
        predicted=predicted,
        iterations=int(iterations),
        op_count=int(op_count),
        trace=trace_array,
    )
