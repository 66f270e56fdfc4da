"""Factorization of bipolar product hypervectors by stochastic resonator search.

The package provides the vector algebra (:mod:`holofactor.vsa`), sparse
winners-take-all activations (:mod:`holofactor.activation`), stochastic
matrix-vector-multiply backends including a phase-change-memory conductance
model (:mod:`holofactor.noise`), the iterative factorizer engine
(:mod:`holofactor.factorizer`), brute-force ground truth
(:mod:`holofactor.oracle`), Gaussian-process hyperparameter tuning
(:mod:`holofactor.tuning`) and the experiment harness / CLI
(:mod:`holofactor.harness`, :mod:`holofactor.cli`).
"""

from holofactor.vsa import (
    Codebook,
    bind,
    bipolarize,
    bundle,
    circular_shift,
    mvm,
    random_codebook,
    similarity,
    transposed_mvm,
    unbind,
)
from holofactor.activation import (
    ActivationSpec,
    identity,
    inverse_normal_cdf,
    k_to_threshold,
    threshold,
    top_k,
)
from holofactor.noise import (
    AdditiveGaussianBackend,
    ExactBackend,
    PcmBackend,
    PcmParams,
    ProgrammedArray,
    noisy_mvm,
    noisy_transposed_mvm,
    program_array,
    read_effective_weights,
    scaled_pcm_params,
)
from holofactor.factorizer import (
    FactorizationResult,
    FactorizerConfig,
    detect_limit_cycle,
    factorize,
    init_estimates,
    max_iterations,
    multiplexed_codebooks,
    shift_for_factor,
)
from holofactor.oracle import QueryInstance, brute_force, make_query

__all__ = [
    "ActivationSpec",
    "AdditiveGaussianBackend",
    "Codebook",
    "ExactBackend",
    "FactorizationResult",
    "FactorizerConfig",
    "PcmBackend",
    "PcmParams",
    "ProgrammedArray",
    "QueryInstance",
    "bind",
    "bipolarize",
    "brute_force",
    "bundle",
    "circular_shift",
    "detect_limit_cycle",
    "factorize",
    "identity",
    "init_estimates",
    "inverse_normal_cdf",
    "k_to_threshold",
    "make_query",
    "max_iterations",
    "multiplexed_codebooks",
    "mvm",
    "noisy_mvm",
    "noisy_transposed_mvm",
    "program_array",
    "random_codebook",
    "read_effective_weights",
    "scaled_pcm_params",
    "shift_for_factor",
    "similarity",
    "threshold",
    "top_k",
    "transposed_mvm",
    "unbind",
]

__version__ = "0.1.0"
