"""Stochastic matrix-vector-multiply backends.

Three backends are supported:

* exact          -- noise-free reference, identical to :mod:`holofactor.vsa`
* additive       -- exact result plus i.i.d. zero-mean Gaussian noise per
                    output entry, in normalized similarity units
* pcm            -- a device-level conductance model with programming noise,
                    power-law drift with per-device exponent variability, and
                    fresh read noise on every access:

                        G_T0 = G_tar + n_p,          n_p ~ N(0, sigma_p^2)
                        G(t) = G_T0 (t/T0)^-nu_dev + n_r,
                        nu_dev ~ N(nu, sigma_nu^2),  n_r ~ N(0, sigma_r^2)

Weights use a differential encoding: a +1 stores the device on the positive
side at G_tar and leaves the negative side at exactly 0, and vice versa. The
effective weight of a cell is ``(G_pos - G_neg) / G_tar``, about +-1 plus
noise. PCM-mode MVM outputs are divided by ``G_tar * D`` so every backend
emits the same normalized cosine units and activation thresholds stay
backend-independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from holofactor.vsa import Codebook, mvm as exact_mvm, transposed_mvm as exact_transposed_mvm


@dataclass(frozen=True)
class PcmParams:
    """Fitted conductance-model parameters (conductances in microsiemens)."""

    g_tar_us: float = 5.0
    t0_s: float = 60.0
    sigma_p_us: float = 1.1636
    sigma_r_us: float = 0.3951
    sigma_nu: float = 0.0907
    nu: float = 0.0428

    def __post_init__(self) -> None:
        if self.g_tar_us <= 0 or self.t0_s <= 0:
            raise ValueError("g_tar_us and t0_s must be positive")
        if min(self.sigma_p_us, self.sigma_r_us, self.sigma_nu) < 0:
            raise ValueError("noise standard deviations must be non-negative")


DEFAULT_PCM_PARAMS = PcmParams()


@dataclass(frozen=True)
class ExactBackend:
    kind: str = "exact"


@dataclass(frozen=True)
class AdditiveGaussianBackend:
    """Output-additive Gaussian noise, std in normalized similarity units."""

    sigma_out: float
    kind: str = "additive_gaussian"

    def __post_init__(self) -> None:
        if self.sigma_out < 0:
            raise ValueError("sigma_out must be non-negative")


@dataclass(frozen=True)
class PcmBackend:
    """Device-level conductance backend.

    ``shared_array`` selects whether the similarity and projection directions
    are served by the same programmed array (one physical core) or by two
    independently programmed arrays (two cores).
    """

    params: PcmParams = DEFAULT_PCM_PARAMS
    read_time_s: float = 3600.0
    shared_array: bool = False
    kind: str = "pcm"

    def __post_init__(self) -> None:
        if self.read_time_s < self.params.t0_s:
            raise ValueError("read_time_s must be at least the drift reference time t0_s")


NoiseBackend = ExactBackend | AdditiveGaussianBackend | PcmBackend


@dataclass(frozen=True)
class ProgrammedArray:
    """Per-device state frozen at programming time.

    ``g_t0`` holds the post-programming conductance of the single programmed
    device of each cell; ``signs`` records which differential side it sits on
    (the other side is exactly 0). ``drift_exponents`` are drawn once at
    programming time.
    """

    g_t0: np.ndarray  # (M, D) float64, microsiemens
    signs: np.ndarray  # (M, D) int8 in {-1, +1}
    drift_exponents: np.ndarray  # (M, D) float64

    def __post_init__(self) -> None:
        if not (self.g_t0.shape == self.signs.shape == self.drift_exponents.shape):
            raise ValueError("array field shapes must match")

    @property
    def shape(self) -> tuple[int, int]:
        return self.g_t0.shape

    @property
    def g_pos(self) -> np.ndarray:
        """Positive-side conductances (0 where the negative side is programmed)."""
        return np.where(self.signs > 0, self.g_t0, 0.0)

    @property
    def g_neg(self) -> np.ndarray:
        """Negative-side conductances (0 where the positive side is programmed)."""
        return np.where(self.signs < 0, self.g_t0, 0.0)


def program_array(cb: Codebook, params: PcmParams, rng: np.random.Generator) -> ProgrammedArray:
    """Program one device per cell to G_tar with Gaussian programming noise.

    Conductances are clamped at 0 from below (a conductance cannot be
    negative; at the default G_tar/sigma_p ratio the clamp is negligible).
    Draw order: conductances first, then drift exponents, both row-major.
    """
    shape = cb.vectors.shape
    g_t0 = params.g_tar_us + params.sigma_p_us * rng.standard_normal(shape)
    np.clip(g_t0, 0.0, None, out=g_t0)
    exponents = params.nu + params.sigma_nu * rng.standard_normal(shape)
    return ProgrammedArray(g_t0=g_t0, signs=cb.vectors.copy(), drift_exponents=exponents)


def drifted_conductance(arr: ProgrammedArray, params: PcmParams, t: float) -> np.ndarray:
    """Noise-free conductance at time ``t``: G_T0 * (t / T0) ** -nu_dev."""
    if t < params.t0_s:
        raise ValueError(f"read time {t} precedes the drift reference time {params.t0_s}")
    return arr.g_t0 * np.power(t / params.t0_s, -arr.drift_exponents)


def read_effective_weights(
    arr: ProgrammedArray, params: PcmParams, t: float, rng: np.random.Generator
) -> np.ndarray:
    """One full noisy read of the array at time ``t``, as effective weights.

    Per device ``G(t) = G_T0 * (t/T0)^-nu_dev + n_r`` with fresh read noise
    on every call; the effective weight of a cell is
    ``(G_pos - G_neg) / G_tar``.
    """
    g = drifted_conductance(arr, params, t)
    if params.sigma_r_us > 0:
        g = g + params.sigma_r_us * rng.standard_normal(arr.shape)
    return arr.signs * g / params.g_tar_us


def _require_dim(got: int, want: int) -> None:
    if got != want:
        raise ValueError(f"dimension mismatch: expected {want}, got {got}")


def noisy_mvm(
    source: Codebook | ProgrammedArray,
    x: np.ndarray,
    backend: NoiseBackend,
    rng: np.random.Generator,
) -> np.ndarray:
    """Similarity MVM under the chosen backend, in normalized cosine units."""
    x = np.asarray(x)
    if isinstance(backend, ExactBackend):
        return exact_mvm(source, x)
    if isinstance(backend, AdditiveGaussianBackend):
        out = exact_mvm(source, x)
        if backend.sigma_out > 0:
            out = out + backend.sigma_out * rng.standard_normal(out.shape[0])
        return out
    if isinstance(backend, PcmBackend):
        if not isinstance(source, ProgrammedArray):
            raise TypeError("pcm backend requires a ProgrammedArray source")
        _require_dim(x.shape[0], source.shape[1])
        weights = read_effective_weights(source, backend.params, backend.read_time_s, rng)
        return (weights @ x.astype(np.float64)) / x.shape[0]
    raise TypeError(f"unknown backend {backend!r}")


def noisy_transposed_mvm(
    source: Codebook | ProgrammedArray,
    w: np.ndarray,
    backend: NoiseBackend,
    rng: np.random.Generator,
) -> np.ndarray:
    """Projection MVM under the chosen backend (no 1/D normalization)."""
    w = np.asarray(w, dtype=np.float64)
    if isinstance(backend, ExactBackend):
        return exact_transposed_mvm(source, w)
    if isinstance(backend, AdditiveGaussianBackend):
        out = exact_transposed_mvm(source, w)
        if backend.sigma_out > 0:
            out = out + backend.sigma_out * rng.standard_normal(out.shape[0])
        return out
    if isinstance(backend, PcmBackend):
        if not isinstance(source, ProgrammedArray):
            raise TypeError("pcm backend requires a ProgrammedArray source")
        _require_dim(w.shape[0], source.shape[0])
        weights = read_effective_weights(source, backend.params, backend.read_time_s, rng)
        return weights.T @ w
    raise TypeError(f"unknown backend {backend!r}")


def scaled_pcm_params(scale: float, base: PcmParams = DEFAULT_PCM_PARAMS) -> tuple[PcmParams, float]:
    """Scale programming and read noise jointly, preserving their ratio.

    Drift parameters (nu, sigma_nu) are left untouched. Returns the scaled
    parameters together with the aggregated sweep-axis value
    ``sigma_total = sqrt(sigma_p^2 + sigma_r^2) * scale`` in microsiemens.
    """
    if scale < 0:
        raise ValueError("scale must be non-negative")
    params = replace(
        base,
        sigma_p_us=base.sigma_p_us * scale,
        sigma_r_us=base.sigma_r_us * scale,
    )
    sigma_total = math.hypot(base.sigma_p_us, base.sigma_r_us) * scale
    return params, sigma_total


def platform_aggregate_std(params: PcmParams = DEFAULT_PCM_PARAMS, t: float = 3600.0) -> float:
    """Conductance spread observed at the read hour: sigma_p drifted by the mean exponent.

    The programming spread decays with the nominal drift factor, giving
    ``sigma_p * (t / T0) ** -nu``; at the defaults and t = 3600 s this is
    0.977 uS, matching the 0.98 uS aggregate measured on hardware. This is
    a descriptive statistic only; sweeps use ``scaled_pcm_params``.
    """
    return params.sigma_p_us * (t / params.t0_s) ** (-params.nu)
