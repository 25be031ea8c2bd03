"""Frog model on d-ary trees: exact distribution kernel, star-graph operator,
threshold certificates, Monte Carlo tree simulation, and transience weights."""

from .pmf import (
    DominanceVerdict,
    Outcome,
    Pmf,
    conditioned_nonzero,
    convolve,
    delta,
    dominates,
    poisson_pmf,
    thin,
    tv_distance,
)
from .operator import StarParams, apply_general, apply_poisson, iterate
from .thresholds import (
    EpsilonCertificate,
    cim_check,
    epsilon_max,
    recurrence_threshold,
    transience_threshold,
    verify_nbound,
)
from .simulate import SimConfig, run_batch, run_trial
from .weights import optimal_theta, supermartingale_check

__all__ = [
    "DominanceVerdict",
    "EpsilonCertificate",
    "Outcome",
    "Pmf",
    "SimConfig",
    "StarParams",
    "apply_general",
    "apply_poisson",
    "cim_check",
    "conditioned_nonzero",
    "convolve",
    "delta",
    "dominates",
    "epsilon_max",
    "iterate",
    "optimal_theta",
    "poisson_pmf",
    "recurrence_threshold",
    "run_batch",
    "run_trial",
    "supermartingale_check",
    "thin",
    "transience_threshold",
    "tv_distance",
    "verify_nbound",
]

__version__ = "0.1.0"
