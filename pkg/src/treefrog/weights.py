"""Exponential weight function and supermartingale check for transience.

W_n sums e^{-theta * depth} over awake frogs; for theta at the closed-form
optimum the per-step expansion factor m is below 1 exactly when the mean
sleeper density is below (d-1)^2 / (4d), making W_n / m^n a positive
supermartingale.
"""

import math
from dataclasses import dataclass

import numpy as np

from .simulate import SimConfig, run_batch
from .thresholds import transience_threshold


class SupercriticalError(ValueError):
    """Raised when the requested check only makes sense for m < 1."""


@dataclass(frozen=True)
class WeightParams:
    d: int
    eta_mean: float
    theta: float
    m: float

    @property
    def subcritical(self) -> bool:
        return self.m < 1.0


def expansion_factor(d: int, eta_mean: float, theta: float) -> float:
    """m(theta) = e^theta/(d+1) + d (Eeta+1) e^{-theta}/(d+1)."""
    return (math.exp(theta) + d * (eta_mean + 1.0) * math.exp(-theta)) / (d + 1)


def optimal_theta(d: int, eta_mean: float) -> WeightParams:
    """Minimizer theta* = ln((Eeta+1) d)/2, giving m* = 2 sqrt((Eeta+1) d)/(d+1)."""
    if d < 2:
        raise ValueError("d must be >= 2")
    if eta_mean < 0:
        raise ValueError("eta_mean must be >= 0")
    theta = 0.5 * math.log((eta_mean + 1.0) * d)
    m = 2.0 * math.sqrt((eta_mean + 1.0) * d) / (d + 1)
    return WeightParams(d=d, eta_mean=eta_mean, theta=theta, m=m)


def weight_trace(depth_profile: np.ndarray, theta: float) -> np.ndarray:
    """W_n for each step from a (steps x depth) awake-frog profile."""
    depths = np.arange(depth_profile.shape[1])
    return depth_profile @ np.exp(-theta * depths)


@dataclass
class SupermartingaleReport:
    params: WeightParams
    mean_w: np.ndarray        # empirical E[W_n]
    stderr_w: np.ndarray
    bound: np.ndarray         # m^n
    holds: bool               # mean within the one-sided band at every step
    failures: np.ndarray      # steps where the band check failed
    step_margin: float        # pooled mean of (W_{n+1} - m W_n) in SE units
    visit_decay: np.ndarray   # fraction of trials with a root visit after n
    absorbed_weight_bound: float  # max possible weight carried off at the cap

    @property
    def step_bound_holds(self) -> bool:
        return self.step_margin <= 3.0


def supermartingale_check(
    d: int,
    mu: float,
    trials: int,
    horizon: int,
    seed: int,
    depth_cap: int = 16,
    z: float = 2.326,  # one-sided 99%
) -> SupermartingaleReport:
    """Estimate E[W_n] over trials and verify it stays below m^n.

    Sleepers are Poi(mu), so Eeta = mu; requires mu below the transience
    threshold (otherwise m >= 1 and the bound is vacuous).
    """
    if mu >= transience_threshold(d):
        raise SupercriticalError(
            f"mu={mu} is not below the transience threshold "
            f"{transience_threshold(d):.6g} for d={d} (m >= 1)"
        )
    params = optimal_theta(d, mu)
    config = SimConfig(
        d=d,
        frog_law=("poisson", mu),
        variant="simple",
        horizon=horizon,
        depth_cap=depth_cap,
        trials=trials,
        seed=seed,
    )
    batch = run_batch(config, record_profiles=True)
    traces = np.stack([weight_trace(p, params.theta) for p in batch.profiles])
    mean_w = traces.mean(axis=0)
    stderr_w = (
        traces.std(axis=0, ddof=1) / math.sqrt(trials) if trials > 1 else np.zeros_like(mean_w)
    )
    bound = params.m ** np.arange(horizon + 1)
    ok = mean_w <= bound + z * stderr_w
    failures = np.flatnonzero(~ok)

    # pooled one-step supermartingale margin: mean of W_{n+1} - m W_n
    diffs = traces[:, 1:] - params.m * traces[:, :-1]
    flat = diffs.ravel()
    se = flat.std(ddof=1) / math.sqrt(flat.size) if flat.size > 1 else float("inf")
    step_margin = float(flat.mean() / se) if se > 0 else 0.0

    # fraction of trials whose last root visit falls after step n
    last_visit = np.full(trials, -1, dtype=np.int64)
    for i in range(trials):
        prof = batch.profiles[i]
        at_root = np.flatnonzero(prof[1:, 0]) + 1
        if at_root.size:
            last_visit[i] = at_root[-1]
    steps = np.arange(horizon + 1)
    visit_decay = (last_visit[None, :] > steps[:, None]).mean(axis=1)

    absorbed_bound = float(
        (batch.absorbed_at_cap * math.exp(-params.theta * depth_cap)).mean()
    )
    return SupermartingaleReport(
        params=params,
        mean_w=mean_w,
        stderr_w=stderr_w,
        bound=bound,
        holds=bool(ok.all()),
        failures=failures,
        step_margin=step_margin,
        visit_decay=visit_decay,
        absorbed_weight_bound=absorbed_bound,
    )


def export_trace_csv(path, report: SupermartingaleReport, z: float = 2.326):
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "mean_W", "m_pow_n", "band"])
        for n in range(report.mean_w.size):
            writer.writerow(
                [
                    n,
                    report.mean_w[n],
                    report.bound[n],
                    z * report.stderr_w[n],
                ]
            )
