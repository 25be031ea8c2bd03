"""Monte Carlo front end for the frog model on d-ary trees.

Wraps the numba kernels in `engine` with configuration, batching, summaries
and the phase-transition experiments (recurrence proxy, bisection search,
backtracking-coupling dominance test, cover times).
"""

import csv
import json
import math
import time
from dataclasses import dataclass

import numpy as np

from . import engine
from .pmf import Pmf

DEFAULT_MAX_FROGS = 20_000_000
DEFAULT_MAX_VERTICES = 80_000_000


class SimulationError(RuntimeError):
    pass


class ResourceLimitError(SimulationError):
    """A hard per-trial resource limit was hit; reported, never silent."""


class TimeBudgetExceeded(SimulationError):
    def __init__(self, message, completed, elapsed):
        super().__init__(message)
        self.completed = completed
        self.elapsed = elapsed


class BracketError(ValueError):
    pass


@dataclass(frozen=True)
class PoissonLaw:
    mu: float

    def mean(self):
        return self.mu

    def _encode(self):
        return engine.LAW_POISSON, float(self.mu), np.ones(1)


@dataclass(frozen=True)
class FixedLaw:
    k: int

    def mean(self):
        return float(self.k)

    def _encode(self):
        return engine.LAW_FIXED, float(self.k), np.ones(1)


@dataclass(frozen=True)
class CustomLaw:
    pmf: Pmf

    def mean(self):
        return self.pmf.mean()

    def _encode(self):
        cdf = np.cumsum(self.pmf.masses / self.pmf.masses.sum())
        return engine.LAW_CUSTOM, 0.0, cdf


def frog_law(spec) -> "PoissonLaw | FixedLaw | CustomLaw":
    """Coerce ('poisson', mu) / ('fixed', k) / a Pmf into a law object."""
    if isinstance(spec, (PoissonLaw, FixedLaw, CustomLaw)):
        return spec
    if isinstance(spec, Pmf):
        return CustomLaw(spec)
    kind, value = spec
    if kind == "poisson":
        return PoissonLaw(float(value))
    if kind == "fixed":
        return FixedLaw(int(value))
    raise ValueError(f"unknown frog law kind {kind!r}")


@dataclass(frozen=True)
class SimConfig:
    d: int
    frog_law: object
    variant: str = "simple"  # or "nonbacktracking"
    horizon: int = 100
    depth_cap: int = 20
    trials: int = 1000
    seed: int = 0
    max_frogs: int = DEFAULT_MAX_FROGS
    max_vertices: int = DEFAULT_MAX_VERTICES

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("d must be >= 2")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.depth_cap < 2:
            raise ValueError("depth_cap must be >= 2")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.variant not in ("simple", "nonbacktracking"):
            raise ValueError(f"unknown variant {self.variant!r}")
        object.__setattr__(self, "frog_law", frog_law(self.frog_law))

    @property
    def variant_code(self):
        return (
            engine.VARIANT_SIMPLE
            if self.variant == "simple"
            else engine.VARIANT_NONBACKTRACKING
        )


@dataclass
class SimOutcome:
    root_visits: int
    root_visit_times: np.ndarray
    frogs_woken: int
    absorbed_at_cap: int
    depth_profile: np.ndarray | None = None
    weight_trace: np.ndarray | None = None


def run_trial(config: SimConfig, trial_index: int, record_profile=False) -> SimOutcome:
    kind, param, table = config.frog_law._encode()
    arrivals, woken, absorbed, profile, status, _nv = engine.run_tree_trial(
        engine.trial_key(config.seed, trial_index),
        config.d,
        config.variant_code,
        config.horizon,
        config.depth_cap,
        kind,
        param,
        table,
        record_profile,
        config.max_frogs,
        config.max_vertices,
    )
    if status == engine.STATUS_FROG_LIMIT:
        raise ResourceLimitError(
            f"trial {trial_index}: active frog count exceeded "
            f"max_frogs={config.max_frogs}"
        )
    if status == engine.STATUS_VERTEX_LIMIT:
        raise ResourceLimitError(
            f"trial {trial_index}: realized vertex count exceeded "
            f"max_vertices={config.max_vertices}"
        )
    times = np.repeat(np.arange(arrivals.size), arrivals)
    return SimOutcome(
        root_visits=int(arrivals.sum()),
        root_visit_times=times,
        frogs_woken=int(woken),
        absorbed_at_cap=int(absorbed),
        depth_profile=profile if record_profile else None,
    )


@dataclass
class BatchResult:
    config: SimConfig
    root_visits: np.ndarray
    frogs_woken: np.ndarray
    absorbed_at_cap: np.ndarray
    profiles: list | None = None
    elapsed: float = 0.0

    @property
    def trials(self):
        return self.root_visits.size

    def mean_visits(self):
        return float(self.root_visits.mean())

    def var_visits(self):
        return float(self.root_visits.var(ddof=1)) if self.trials > 1 else 0.0

    def stderr_visits(self):
        return math.sqrt(self.var_visits() / self.trials)

    def empirical_pmf(self) -> Pmf:
        counts = np.bincount(self.root_visits)
        return Pmf(counts / self.trials, 0.0, tol=0.5)

    def iter_trial_records(self):
        for i in range(self.trials):
            yield {
                "trial": i,
                "root_visits": int(self.root_visits[i]),
                "frogs_woken": int(self.frogs_woken[i]),
                "absorbed_at_cap": int(self.absorbed_at_cap[i]),
            }

    def write_jsonl(self, path):
        with open(path, "w") as fh:
            for rec in self.iter_trial_records():
                fh.write(json.dumps(rec) + "\n")

    def summary_row(self):
        cfg = self.config
        mu = cfg.frog_law.mean()
        return {
            "d": cfg.d,
            "mu": mu,
            "variant": cfg.variant,
            "T": cfg.horizon,
            "D": cfg.depth_cap,
            "trials": self.trials,
            "mean_visits": self.mean_visits(),
            "stderr": self.stderr_visits(),
            "mean_woken": float(self.frogs_woken.mean()),
        }


SUMMARY_COLUMNS = [
    "d", "mu", "variant", "T", "D", "trials",
    "mean_visits", "stderr", "mean_woken",
]


def write_summary_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def run_batch(
    config: SimConfig,
    record_profiles: bool = False,
    time_budget_s: float | None = None,
) -> BatchResult:
    """Run `config.trials` independent trials; deterministic given the seed.

    With a time budget, raises TimeBudgetExceeded once the budget is spent
    (the exception carries how many trials completed).
    """
    visits = np.empty(config.trials, dtype=np.int64)
    woken = np.empty(config.trials, dtype=np.int64)
    absorbed = np.empty(config.trials, dtype=np.int64)
    profiles = [] if record_profiles else None
    t0 = time.monotonic()
    for i in range(config.trials):
        out = run_trial(config, i, record_profile=record_profiles)
        visits[i] = out.root_visits
        woken[i] = out.frogs_woken
        absorbed[i] = out.absorbed_at_cap
        if record_profiles:
            profiles.append(out.depth_profile)
        if time_budget_s is not None:
            elapsed = time.monotonic() - t0
            if elapsed > time_budget_s and i + 1 < config.trials:
                raise TimeBudgetExceeded(
                    f"completed {i + 1}/{config.trials} trials in "
                    f"{elapsed:.1f}s, budget {time_budget_s:.1f}s",
                    completed=i + 1,
                    elapsed=elapsed,
                )
    return BatchResult(
        config=config,
        root_visits=visits,
        frogs_woken=woken,
        absorbed_at_cap=absorbed,
        profiles=profiles,
        elapsed=time.monotonic() - t0,
    )


# --- backtracking-coupling dominance experiment ----------------------------


@dataclass(frozen=True)
class OneSidedCdfReport:
    """Empirical one-sided test of `lower` stochastically below `upper`.

    statistic = sup_x [F_upper(x) - F_lower(x)] over empirical CDFs; a true
    dominance relation makes the population value <= 0, so a statistic above
    the combined one-sided DKW radii is a significant violation.
    """

    statistic: float
    threshold: float
    witness: int
    violation: bool


def one_sided_cdf_test(
    lower_samples: np.ndarray, upper_samples: np.ndarray, alpha: float = 0.005
) -> OneSidedCdfReport:
    hi = int(max(lower_samples.max(), upper_samples.max()))
    grid = np.arange(hi + 1)
    f_lo = np.searchsorted(np.sort(lower_samples), grid, side="right") / lower_samples.size
    f_up = np.searchsorted(np.sort(upper_samples), grid, side="right") / upper_samples.size
    diff = f_up - f_lo
    witness = int(np.argmax(diff))
    stat = float(diff[witness])
    radius = math.sqrt(math.log(1.0 / alpha) / (2.0 * lower_samples.size)) + math.sqrt(
        math.log(1.0 / alpha) / (2.0 * upper_samples.size)
    )
    return OneSidedCdfReport(
        statistic=stat,
        threshold=radius,
        witness=witness,
        violation=stat > radius,
    )


@dataclass
class DominanceExperimentReport:
    forward: OneSidedCdfReport  # nonbacktracking below simple (expected to hold)
    reversed: OneSidedCdfReport  # simple below nonbacktracking (expected to fail)
    nb_batch: BatchResult
    simple_batch: BatchResult

    @property
    def consistent(self):
        return not self.forward.violation


def dominance_experiment(
    config_simple: SimConfig,
    config_nb: SimConfig,
    alpha: float = 0.005,
    time_budget_s: float | None = None,
) -> DominanceExperimentReport:
    for name in ("d", "horizon", "depth_cap", "trials"):
        if getattr(config_simple, name) != getattr(config_nb, name):
            raise ValueError(f"configs must match on {name}")
    if config_simple.frog_law != config_nb.frog_law:
        raise ValueError("configs must match on frog_law")
    if config_simple.variant != "simple" or config_nb.variant != "nonbacktracking":
        raise ValueError("variant mismatch: expected (simple, nonbacktracking)")
    budget = None if time_budget_s is None else time_budget_s / 2.0
    simple = run_batch(config_simple, time_budget_s=budget)
    nb = run_batch(config_nb, time_budget_s=budget)
    fwd = one_sided_cdf_test(nb.root_visits, simple.root_visits, alpha)
    rev = one_sided_cdf_test(simple.root_visits, nb.root_visits, alpha)
    return DominanceExperimentReport(
        forward=fwd, reversed=rev, nb_batch=nb, simple_batch=simple
    )


# --- cover time ------------------------------------------------------------


@dataclass
class CoverTimeStats:
    d: int
    height: int
    trials: int
    mean: float
    stderr: float
    quantiles: dict
    samples: np.ndarray


def cover_time(
    d: int, height: int, trials: int, seed: int, max_steps: int = 50_000_000
) -> CoverTimeStats:
    """Cover-time statistics for the one-per-site model on a finite tree."""
    if height < 0:
        raise ValueError("height must be >= 0")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    samples = np.empty(trials, dtype=np.int64)
    for i in range(trials):
        t = engine.run_cover_trial(engine.trial_key(seed, i), d, height, max_steps)
        if t < 0:
            raise SimulationError(
                f"trial {i}: tree not covered within max_steps={max_steps}"
            )
        samples[i] = t
    qs = {q: float(np.quantile(samples, q)) for q in (0.25, 0.5, 0.75, 0.95)}
    stderr = (
        float(samples.std(ddof=1)) / math.sqrt(trials) if trials > 1 else 0.0
    )
    return CoverTimeStats(
        d=d,
        height=height,
        trials=trials,
        mean=float(samples.mean()),
        stderr=stderr,
        quantiles=qs,
        samples=samples,
    )


# --- recurrence proxy and critical search ----------------------------------


def recurrence_proxy(
    d: int,
    mu: float,
    T: int,
    D: int,
    trials: int,
    seed: int,
    time_budget_s: float | None = None,
) -> float:
    """Mean root-visit count of the simple-walk model within a finite window.

    A monotone surrogate for the (undecidable) recurrence property; its value
    depends on T and D and should only be compared across runs with matched
    settings.
    """
    config = SimConfig(
        d=d,
        frog_law=("poisson", mu),
        variant="simple",
        horizon=T,
        depth_cap=D,
        trials=trials,
        seed=seed,
    )
    return run_batch(config, time_budget_s=time_budget_s).mean_visits()


@dataclass
class CriticalSearchResult:
    crossing: float
    curve: list  # (mu, proxy) pairs in evaluation order
    threshold_visits: float


def critical_search(
    d: int,
    T: int,
    D: int,
    trials: int,
    threshold_visits: float,
    mu_lo: float,
    mu_hi: float,
    iterations: int,
    seed: int,
    time_budget_s: float | None = None,
) -> CriticalSearchResult:
    """Bisection on mu against the recurrence proxy (shared base seed)."""
    t0 = time.monotonic()

    def budget_left():
        if time_budget_s is None:
            return None
        left = time_budget_s - (time.monotonic() - t0)
        if left <= 0:
            raise TimeBudgetExceeded(
                "critical_search budget exhausted", completed=len(curve), elapsed=time.monotonic() - t0
            )
        return left

    curve = []

    def proxy(mu):
        value = recurrence_proxy(d, mu, T, D, trials, seed, time_budget_s=budget_left())
        curve.append((mu, value))
        return value

    p_lo = proxy(mu_lo)
    p_hi = proxy(mu_hi)
    if not (p_lo < threshold_visits < p_hi):
        raise BracketError(
            f"proxy({mu_lo})={p_lo:.4g} and proxy({mu_hi})={p_hi:.4g} do not "
            f"bracket threshold_visits={threshold_visits}"
        )
    lo, hi = mu_lo, mu_hi
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if proxy(mid) < threshold_visits:
            lo = mid
        else:
            hi = mid
    return CriticalSearchResult(
        crossing=0.5 * (lo + hi), curve=curve, threshold_visits=threshold_visits
    )


def empirical_root_visit_pmf(config: SimConfig) -> Pmf:
    """Empirical root-visit law; used as a finite-horizon stand-in for the
    nonbacktracking fixed point."""
    return run_batch(config).empirical_pmf()
