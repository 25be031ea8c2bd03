"""Exact arithmetic on truncated integer-valued probability distributions.

A `Pmf` stores masses on 0..K plus an explicit `tail_mass` for everything
above K.  All constructors and operations propagate tail mass conservatively:
mass is never silently dropped, so a `Dominates` verdict from `dominates` is
trustworthy even after long chains of operations.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import gammaln

NORM_ATOL = 1e-12
CDF_SLACK = 1e-10


class PmfError(ValueError):
    pass


@dataclass(frozen=True)
class Pmf:
    """Truncated pmf on the nonnegative integers.

    masses[k] = P(X = k) for k = 0..K; tail_mass = P(X > K); tol is the
    truncation budget the constructor was asked to respect.
    """

    masses: np.ndarray
    tail_mass: float
    tol: float = 1e-12

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=np.float64)
        if m.ndim != 1 or m.size == 0:
            raise PmfError("masses must be a nonempty 1-D array")
        if np.any(m < -NORM_ATOL):
            raise PmfError("negative mass in pmf")
        m = np.clip(m, 0.0, None)
        m.setflags(write=False)
        object.__setattr__(self, "masses", m)
        object.__setattr__(self, "tail_mass", float(self.tail_mass))
        if self.tail_mass < -NORM_ATOL:
            raise PmfError("negative tail mass")
        total = float(m.sum()) + self.tail_mass
        if abs(total - 1.0) > NORM_ATOL:
            raise PmfError(f"pmf not normalized: total mass {total!r}")

    @property
    def support_max(self) -> int:
        return self.masses.size - 1

    def cdf(self) -> np.ndarray:
        """CDF at 0..K, counting only the explicitly represented masses."""
        return np.cumsum(self.masses)

    def mean(self) -> float:
        # tail mass excluded; with tail <= tol this is exact to within
        # tol * (unknown tail location), fine for tol ~ 1e-12
        return float(np.arange(self.masses.size) @ self.masses)

    def variance(self) -> float:
        ks = np.arange(self.masses.size)
        mu = self.mean()
        return float((ks - mu) ** 2 @ self.masses)

    def prob(self, k: int) -> float:
        if 0 <= k < self.masses.size:
            return float(self.masses[k])
        return 0.0


def from_masses(masses, tol: float = 1e-12) -> Pmf:
    """Build a Pmf from raw masses, assigning any missing mass to the tail."""
    m = np.clip(np.asarray(masses, dtype=np.float64), 0.0, None)
    tail = max(0.0, 1.0 - float(m.sum()))
    return Pmf(m, tail, tol)


def delta(k: int) -> Pmf:
    if k < 0:
        raise PmfError("point mass location must be nonnegative")
    m = np.zeros(k + 1)
    m[k] = 1.0
    return Pmf(m, 0.0)


def _check_tol(tol: float):
    if not (0.0 < tol < 1.0):
        raise PmfError(f"tol must lie in (0, 1), got {tol}")


def poisson_pmf(rate: float, tol: float = 1e-12) -> Pmf:
    """Poisson(rate) truncated at the smallest K with tail mass <= tol."""
    _check_tol(tol)
    if rate < 0:
        raise PmfError(f"Poisson rate must be nonnegative, got {rate}")
    if rate == 0.0:
        return delta(0)
    # generous initial support, extended if the tail budget is not met
    k_hi = int(rate + 12.0 * np.sqrt(rate) + 30)
    while True:
        ks = np.arange(k_hi + 1)
        logp = -rate + ks * np.log(rate) - gammaln(ks + 1)
        masses = np.exp(logp)
        csum = np.cumsum(masses)
        if 1.0 - csum[-1] <= tol:
            break
        k_hi *= 2
    kcut = int(np.searchsorted(csum, 1.0 - tol))
    kcut = min(kcut, k_hi)
    masses = masses[: kcut + 1]
    tail = max(0.0, 1.0 - float(masses.sum()))
    return Pmf(masses, tail, tol)


def binomial_pmf(n: int, p: float) -> Pmf:
    """Exact Bin(n, p); no truncation needed (finite support)."""
    if n < 0:
        raise PmfError("n must be nonnegative")
    if not (0.0 <= p <= 1.0):
        raise PmfError(f"success probability must lie in [0, 1], got {p}")
    if p == 0.0:
        return delta(0)
    if p == 1.0:
        return delta(n)
    ks = np.arange(n + 1)
    logm = (
        gammaln(n + 1)
        - gammaln(ks + 1)
        - gammaln(n - ks + 1)
        + ks * np.log(p)
        + (n - ks) * np.log1p(-p)
    )
    masses = np.exp(logm)
    masses /= masses.sum()
    return Pmf(masses, 0.0)


def conditioned_nonzero(rate: float, tol: float = 1e-12) -> Pmf:
    """Poi(rate) conditioned to be nonzero; mass at 0 is exactly zero."""
    _check_tol(tol)
    if rate <= 0:
        raise PmfError("conditioning Poi(0) on being nonzero is degenerate")
    base = poisson_pmf(rate, tol * (1.0 - np.exp(-rate)))
    denom = -np.expm1(-rate)  # 1 - e^{-rate}, accurate for small rate
    masses = base.masses.copy()
    masses[0] = 0.0
    masses /= denom
    tail = max(0.0, 1.0 - float(masses.sum()))
    return Pmf(masses, tail, tol)


def thin(pi: Pmf, p: float) -> Pmf:
    """Law of Bin(X, p) for X ~ pi.

    The tail of `pi` maps entirely into the output tail; p in {0, 1} is
    handled exactly.
    """
    if not (0.0 <= p <= 1.0):
        raise PmfError(f"thinning probability must lie in [0, 1], got {p}")
    if p == 0.0:
        return delta(0)
    if p == 1.0:
        return Pmf(pi.masses.copy(), pi.tail_mass, pi.tol)
    K = pi.support_max
    out = np.zeros(K + 1)
    logp, logq = np.log(p), np.log1p(-p)
    for k in range(K + 1):
        w = pi.masses[k]
        if w == 0.0:
            continue
        js = np.arange(k + 1)
        logb = (
            gammaln(k + 1) - gammaln(js + 1) - gammaln(k - js + 1)
            + js * logp + (k - js) * logq
        )
        out[: k + 1] += w * np.exp(logb)
    tail = max(0.0, 1.0 - float(out.sum()))
    return Pmf(np.trim_zeros(out, "b") if out[-1] == 0.0 and out.sum() > 0 else out,
               tail, pi.tol)


def convolve(p1: Pmf, p2: Pmf) -> Pmf:
    """Law of X + Y for independent X ~ p1, Y ~ p2."""
    out = np.convolve(p1.masses, p2.masses)
    tail = max(0.0, 1.0 - float(out.sum()))
    return Pmf(out, tail, max(p1.tol, p2.tol))


def truncate(pi: Pmf, tol: float) -> Pmf:
    """Re-truncate, moving the smallest top-end masses into the tail.

    The combined tail after truncation is kept <= tol whenever possible;
    existing tail mass is never reduced.
    """
    _check_tol(tol)
    if pi.tail_mass >= tol:
        return pi
    rev_csum = np.cumsum(pi.masses[::-1])[::-1]  # mass at >= k
    budget = tol - pi.tail_mass
    keep = pi.masses.size
    while keep > 1 and rev_csum[keep - 1] <= budget:
        keep -= 1
    masses = pi.masses[:keep].copy()
    tail = max(0.0, 1.0 - float(masses.sum()))
    return Pmf(masses, tail, tol)


def tv_distance(p1: Pmf, p2: Pmf) -> float:
    """Total-variation distance, counting tails as disjoint worst case."""
    n = max(p1.masses.size, p2.masses.size)
    a = np.zeros(n)
    b = np.zeros(n)
    a[: p1.masses.size] = p1.masses
    b[: p2.masses.size] = p2.masses
    return 0.5 * (float(np.abs(a - b).sum()) + p1.tail_mass + p2.tail_mass)


class Outcome(Enum):
    DOMINATES = "dominates"
    NOT_DOMINATES = "not_dominates"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class DominanceVerdict:
    outcome: Outcome
    witness: int | None = None  # value where the CDF inequality provably fails
    slack: float | None = None  # tail slack that blocked certification

    def __bool__(self):
        return self.outcome is Outcome.DOMINATES


def dominates(lower: Pmf, upper: Pmf) -> DominanceVerdict:
    """One-sided certificate that `lower` is stochastically dominated by `upper`.

    Conservative rule: the tail of `lower` is assumed to sit at +infinity and
    the tail of `upper` just above its truncation point, so a DOMINATES
    verdict is sound.  A NOT_DOMINATES verdict carries a witness x at which
    CDF_lower(x) < CDF_upper(x) provably holds even under the placements most
    favorable to dominance.  Everything else is INCONCLUSIVE.
    """
    n = max(lower.masses.size, upper.masses.size)
    cl = np.zeros(n)
    cu = np.zeros(n)
    cl[: lower.masses.size] = lower.masses
    cu[: upper.masses.size] = upper.masses
    cl = np.cumsum(cl)
    cu = np.cumsum(cu)

    cert_ok = bool(np.all(cl >= cu - CDF_SLACK)) and (
        lower.tail_mass <= upper.tail_mass + CDF_SLACK
    )
    if cert_ok:
        return DominanceVerdict(Outcome.DOMINATES)

    # refutation: true CDF_lower(x) <= cl(x) + tail_lower, true CDF_upper(x) >= cu(x)
    refuted = cl + lower.tail_mass + CDF_SLACK < cu
    if np.any(refuted):
        witness = int(np.argmax(refuted))
        return DominanceVerdict(Outcome.NOT_DOMINATES, witness=witness)

    gap = float(np.max(cu - cl))
    blocking = max(gap, lower.tail_mass - upper.tail_mass)
    return DominanceVerdict(Outcome.INCONCLUSIVE, slack=blocking)


def likelihood_ratio_monotone(rate1: float, rate2: float, kmax: int) -> bool:
    """Check that the likelihood ratio of the two nonzero-conditioned Poissons
    is nondecreasing on k = 1..kmax (evaluated in log space)."""
    if not (0 < rate1 <= rate2):
        raise PmfError("need 0 < rate1 <= rate2")
    ks = np.arange(1, kmax + 1, dtype=np.float64)
    logr = (
        np.log(-np.expm1(-rate1))
        - np.log(-np.expm1(-rate2))
        + (rate1 - rate2)
        + ks * np.log(rate2 / rate1)
    )
    return bool(np.all(np.diff(logr) >= -1e-12))


def poisson_division_verify(
    rate: float, n: int, samples: int, seed: int
) -> float:
    """Monte Carlo check of the nonzero-conditioned Poisson decomposition.

    Samples Z = sum of M iid Poi(rate/n)-conditioned-nonzero variables with
    M ~ Bin(n, 1 - e^{-rate/n}) and returns the empirical TV distance to
    Poi(rate).
    """
    if rate < 0:
        raise PmfError("rate must be nonnegative")
    if n < 1:
        raise PmfError("n must be a positive integer")
    if rate == 0.0:
        return tv_distance(delta(0), delta(0))
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    p_nz = -np.expm1(-rate / n)
    M = rng.binomial(n, p_nz, size=samples)
    total = int(M.sum())
    cond = conditioned_nonzero(rate / n, tol=1e-15)
    draws = rng.choice(
        cond.masses.size, size=total, p=cond.masses / cond.masses.sum()
    )
    owner = np.repeat(np.arange(samples), M)
    Z = np.bincount(owner, weights=draws, minlength=samples).astype(np.int64)
    counts = np.bincount(Z)
    empirical = Pmf(counts / samples, 0.0, tol=1.0 - 1e-12)
    return tv_distance(empirical, poisson_pmf(rate, 1e-12))
