"""The two-wave star-graph operator on root-visit laws.

The star graph has a center with d+1 leaves: the target leaf, plus v_1..v_d.
Poi(mu) particles start at the center and a pi-distributed batch at v_1; any
v_i (i >= 2) hit by a first-wave particle releases a fresh pi-distributed
second-wave batch, whose members reach the target independently with
probability 1/d.  `apply_general` computes the exact image law; `apply_poisson`
uses the Poisson-mixture closed form; `mc_star_system` simulates the particle
system literally.
"""

import functools
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .pmf import (
    DominanceVerdict,
    Outcome,
    Pmf,
    convolve,
    delta,
    dominates,
    poisson_pmf,
    thin,
    truncate,
)

SUPPORT_CAP = 4096
_MC_CHUNK = 1 << 16


class OperatorError(RuntimeError):
    pass


class SupportCapExceeded(OperatorError):
    """An iterate outgrew the hard support cap; indicates a bug upstream."""


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class StarParams:
    d: int
    mu: float
    tol: float = 1e-12

    def __post_init__(self):
        if self.d < 2:
            raise PreconditionError(f"tree arity d must be >= 2, got {self.d}")
        if self.mu < 0:
            raise PreconditionError(f"density mu must be >= 0, got {self.mu}")
        if not (0.0 < self.tol < 1.0):
            raise PreconditionError(f"tol must lie in (0, 1), got {self.tol}")

    @property
    def m(self) -> float:
        return self.mu / (self.d + 1)


@dataclass(frozen=True)
class MixtureRep:
    """Poisson-mixture representation of the image of Poi(lambda)."""

    lam: float
    u_prob: float
    rates: np.ndarray  # rates[u] = (u+1) lam / d + mu / (d+1), u = 0..d-1

    @classmethod
    def build(cls, lam: float, params: StarParams) -> "MixtureRep":
        if lam < 0:
            raise PreconditionError("lambda must be nonnegative")
        d, m = params.d, params.m
        u_prob = float(-np.expm1(-lam / d - m))
        rates = (np.arange(d) + 1) * lam / d + m
        rates.setflags(write=False)
        return cls(lam, u_prob, rates)


def _binom_weights(n: int, p: float) -> np.ndarray:
    if n == 0:
        return np.ones(1)
    if p == 0.0:
        w = np.zeros(n + 1)
        w[0] = 1.0
        return w
    if p == 1.0:
        w = np.zeros(n + 1)
        w[n] = 1.0
        return w
    ks = np.arange(n + 1)
    logw = (
        gammaln(n + 1) - gammaln(ks + 1) - gammaln(n - ks + 1)
        + ks * np.log(p) + (n - ks) * np.log1p(-p)
    )
    w = np.exp(logw)
    return w / w.sum()


def _mix(weights, pmfs, tol) -> Pmf:
    n = max(p.masses.size for p in pmfs)
    out = np.zeros(n)
    for w, p in zip(weights, pmfs):
        out[: p.masses.size] += w * p.masses
    tail = max(0.0, 1.0 - float(out.sum()))
    return Pmf(out, tail, tol)


def apply_poisson(lam: float, params: StarParams) -> Pmf:
    """Image of Poi(lambda): a Bin(d-1, u_prob)-mixture of Poissons."""
    rep = MixtureRep.build(lam, params)
    d = params.d
    uw = _binom_weights(d - 1, rep.u_prob)
    comps = [poisson_pmf(float(r), params.tol) for r in rep.rates]
    return _mix(uw, comps, params.tol)


@functools.lru_cache(maxsize=64)
def _log_stirling2(nmax: int, tmax: int):
    """log S(n, t) for 0 <= n <= nmax, 0 <= t <= tmax (second kind)."""
    tab = np.full((nmax + 1, tmax + 1), -np.inf)
    tab[0, 0] = 0.0
    for n in range(1, nmax + 1):
        for t in range(1, min(n, tmax) + 1):
            grow = np.log(t) + tab[n - 1, t] if tab[n - 1, t] > -np.inf else -np.inf
            tab[n, t] = np.logaddexp(grow, tab[n - 1, t - 1])
    tab.setflags(write=False)
    return tab


def _occupancy_table(nmax: int, boxes: int) -> np.ndarray:
    """Row n = law of the number of occupied boxes for n uniform balls."""
    logs2 = _log_stirling2(nmax, boxes)
    ts = np.arange(boxes + 1)
    log_choose = gammaln(boxes + 1) - gammaln(ts + 1) - gammaln(boxes - ts + 1)
    log_fact = gammaln(ts + 1)
    ns = np.arange(nmax + 1)[:, None]
    logp = log_choose[None, :] + log_fact[None, :] + logs2 - ns * np.log(boxes)
    occ = np.exp(logp)
    occ /= occ.sum(axis=1, keepdims=True)
    return occ


def occupancy_pmf(balls: int, boxes: int) -> Pmf:
    """Number of occupied boxes after dropping `balls` balls uniformly."""
    if boxes < 1:
        raise PreconditionError("boxes must be >= 1")
    if balls < 0:
        raise PreconditionError("balls must be >= 0")
    if balls == 0:
        return delta(0)
    occ = _occupancy_table(balls, boxes)
    return Pmf(occ[balls], 0.0)


def apply_general(pi: Pmf, params: StarParams) -> Pmf:
    """Exact image of an arbitrary truncated law under the star operator.

    Decomposition (all contributions independent):
      (a) Poi(m) center particles reaching the target, m = mu/(d+1);
      (b) j of the X_1 = k ~ pi particles from v_1 reaching it directly
          (Bin(k, 1/d)), the other k - j landing uniformly on v_2..v_d
          with occupancy t;
      (c) U = t + Bin(d-1-t, 1-e^{-m}) released batches in total, since
          center particles hit each remaining box independently;
      (d) a U-fold convolution of Bin(pi, 1/d) second-wave arrivals.
    """
    d, m, tol = params.d, params.m, params.tol
    K = pi.support_max
    q_hit = float(-np.expm1(-m))

    # batch arrival law and its convolution powers
    B = thin(pi, 1.0 / d)
    bpows = [delta(0)]
    for _ in range(d - 1):
        conv = convolve(bpows[-1], B)
        bpows.append(truncate(conv, conv.tail_mass + tol))

    occ = _occupancy_table(K, d - 1)
    # extra center-hit boxes: row t -> law of U over 0..d-1
    hit = np.zeros((d, d))
    for t in range(d):
        hit[t, t:] = _binom_weights(d - 1 - t, q_hit)

    # w[j, u] = P(j direct arrivals from v_1, U = u released batches)
    w = np.zeros((K + 1, d))
    for k in range(K + 1):
        pk = pi.masses[k]
        if pk == 0.0:
            continue
        binj = _binom_weights(k, 1.0 / d)
        occ_rows = occ[k - np.arange(k + 1)]  # occupancy of the k - j leftovers
        w[: k + 1, :] += pk * binj[:, None] * (occ_rows[:, : d] @ hit)

    # assemble sum over u of (direct-arrival offset law) * B^{*u}
    pieces = []
    weights = []
    for u in range(d):
        ju = w[:, u]
        s = float(ju.sum())
        if s <= 0.0:
            continue
        pieces.append(convolve(Pmf(ju / s, 0.0, tol), bpows[u]))
        weights.append(s)
    if not pieces:
        mixed = delta(0)
    else:
        # account for pi's tail: treat it as unrepresented outcome mass
        scale = sum(weights)
        mixed = _mix(np.asarray(weights) / scale, pieces, tol)
        mixed = Pmf(mixed.masses * scale, 1.0 - scale * (1.0 - mixed.tail_mass), tol)

    out = convolve(mixed, poisson_pmf(m, tol))
    out = truncate(out, out.tail_mass + tol)
    if out.masses.size > SUPPORT_CAP:
        raise SupportCapExceeded(
            f"operator image support {out.masses.size} exceeds cap {SUPPORT_CAP}"
        )
    return out


def _sample_pmf(rng, pi: Pmf, size: int) -> np.ndarray:
    p = pi.masses / pi.masses.sum()
    return rng.choice(pi.masses.size, size=size, p=p)


def mc_star_system(pi: Pmf, params: StarParams, trials: int, seed: int) -> Pmf:
    """Empirical law of target arrivals from literal two-wave simulation.

    Trials are processed in fixed-size chunks, each with its own
    counter-based RNG stream derived from (seed, chunk); results are
    identical regardless of how chunks are scheduled.
    """
    if trials < 1:
        raise PreconditionError("trials must be >= 1")
    d, mu = params.d, params.mu
    counts = np.zeros(0, dtype=np.int64)
    done = 0
    chunk_index = 0
    while done < trials:
        n = min(_MC_CHUNK, trials - done)
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(seed, spawn_key=(chunk_index,)))
        )
        X = rng.poisson(mu, size=n)
        # center particles pick one of d+1 leaves uniformly
        A0 = rng.multinomial(X, np.full(d + 1, 1.0 / (d + 1)))
        X1 = _sample_pmf(rng, pi, n)
        # v_1 particles pick target or one of v_2..v_d uniformly
        A1 = rng.multinomial(X1, np.full(d, 1.0 / d))
        arrivals = A0[:, 0] + A1[:, 0]
        for i in range(2, d + 1):
            hit = (A0[:, i] + A1[:, i - 1]) > 0
            nhit = int(hit.sum())
            if nhit == 0:
                continue
            batch = _sample_pmf(rng, pi, nhit)
            arrivals[hit] += rng.binomial(batch, 1.0 / d)
        c = np.bincount(arrivals)
        if c.size > counts.size:
            c[: counts.size] += counts
            counts = c
        else:
            counts[: c.size] += c
        done += n
        chunk_index += 1
    return Pmf(counts / trials, 0.0, tol=0.5)


def iterate(params: StarParams, n: int) -> list[Pmf]:
    """Iterates nu_k of the operator started from the point mass at zero."""
    if n < 1:
        raise PreconditionError("n must be >= 1")
    out = []
    nu = delta(0)
    for k in range(1, n + 1):
        try:
            nu = apply_general(nu, params)
        except SupportCapExceeded as exc:
            raise SupportCapExceeded(f"iteration {k}: {exc}") from exc
        # per-iteration tail budget of tol on top of whatever the exact
        # arithmetic already pushed into the tail; keeps support near the
        # bulk of the distribution while the cumulative tail stays ~ k * tol
        nu = truncate(nu, nu.tail_mass + params.tol)
        out.append(nu)
    return out


def verify_bootstrap(
    params: StarParams, epsilon: float, n: int, iterates: list[Pmf] | None = None
) -> list[DominanceVerdict]:
    """Check Poi(k * epsilon) <= nu_k in stochastic order for k = 1..n."""
    if epsilon <= 0:
        raise PreconditionError("epsilon must be positive")
    if iterates is None:
        iterates = iterate(params, n)
    verdicts = []
    for k, nu in enumerate(iterates[:n], start=1):
        lower = poisson_pmf(k * epsilon, params.tol)
        verdicts.append(dominates(lower, nu))
    return verdicts


def verify_monotonicity(p1: Pmf, p2: Pmf, params: StarParams) -> bool:
    """Dominance of the inputs must be preserved by the operator."""
    pre = dominates(p1, p2)
    if pre.outcome is not Outcome.DOMINATES:
        raise PreconditionError(
            f"inputs are not certified ordered: {pre.outcome.value}"
        )
    post = dominates(apply_general(p1, params), apply_general(p2, params))
    return post.outcome is Outcome.DOMINATES
