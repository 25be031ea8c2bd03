"""Unit tests for the truncated-pmf kernel.

Exact laws are checked against scipy.stats; structural checks (dominance,
truncation, tail accounting) are checked against brute-force oracles written
independently in this file.
"""

import numpy as np
import pytest
import scipy.stats as st
from hypothesis import given, settings
from hypothesis import strategies as hst

from treefrog.pmf import (
    CDF_SLACK,
    DominanceVerdict,
    Outcome,
    Pmf,
    PmfError,
    binomial_pmf,
    conditioned_nonzero,
    convolve,
    delta,
    dominates,
    from_masses,
    likelihood_ratio_monotone,
    poisson_pmf,
    poisson_division_verify,
    thin,
    truncate,
    tv_distance,
)


# --- construction and invariants -------------------------------------------


def test_pmf_rejects_unnormalized():
    with pytest.raises(PmfError, match="not normalized"):
        Pmf(np.array([0.5, 0.4]), 0.0)


def test_pmf_rejects_negative_mass():
    with pytest.raises(PmfError, match="negative mass"):
        Pmf(np.array([1.1, -0.1]), 0.0)


def test_pmf_rejects_negative_tail():
    with pytest.raises(PmfError, match="negative tail"):
        Pmf(np.array([1.1]), -0.1)


def test_pmf_rejects_empty_and_2d():
    with pytest.raises(PmfError):
        Pmf(np.empty(0), 1.0)
    with pytest.raises(PmfError):
        Pmf(np.ones((2, 2)) / 4, 0.0)


def test_pmf_masses_read_only():
    p = poisson_pmf(1.0)
    with pytest.raises(ValueError):
        p.masses[0] = 0.5


def test_delta_basic():
    p = delta(3)
    assert p.prob(3) == 1.0
    assert p.prob(0) == 0.0
    assert p.prob(99) == 0.0
    assert p.mean() == 3.0
    assert p.variance() == 0.0
    assert p.tail_mass == 0.0
    with pytest.raises(PmfError):
        delta(-1)


def test_from_masses_routes_deficit_to_tail():
    p = from_masses([0.25, 0.25], tol=0.6)
    assert p.tail_mass == pytest.approx(0.5)


# --- exact laws vs scipy ---------------------------------------------------


@pytest.mark.parametrize("rate", [0.01, 0.3, 1.0, 4.5, 20.0, 150.0])
def test_poisson_pmf_matches_scipy(rate):
    p = poisson_pmf(rate, tol=1e-12)
    ks = np.arange(p.masses.size)
    np.testing.assert_allclose(p.masses, st.poisson.pmf(ks, rate), rtol=1e-12)
    assert p.tail_mass <= 1e-12
    assert p.tail_mass == pytest.approx(float(st.poisson.sf(p.support_max, rate)), rel=1e-6)


def test_poisson_pmf_zero_rate_is_delta():
    p = poisson_pmf(0.0)
    assert p.masses.size == 1 and p.prob(0) == 1.0


def test_poisson_pmf_minimal_support():
    # one fewer atom would leave more than tol in the tail
    p = poisson_pmf(3.0, tol=1e-8)
    assert float(st.poisson.sf(p.support_max - 1, 3.0)) > 1e-8


def test_poisson_pmf_rejects_bad_args():
    with pytest.raises(PmfError):
        poisson_pmf(-1.0)
    with pytest.raises(PmfError):
        poisson_pmf(1.0, tol=0.0)
    with pytest.raises(PmfError):
        poisson_pmf(1.0, tol=1.5)


@pytest.mark.parametrize("n,p", [(0, 0.5), (1, 0.3), (7, 0.5), (40, 0.9), (13, 0.0), (13, 1.0)])
def test_binomial_pmf_matches_scipy(n, p):
    b = binomial_pmf(n, p)
    ks = np.arange(b.masses.size)
    np.testing.assert_allclose(b.masses, st.binom.pmf(ks, n, p), atol=1e-14)
    assert b.tail_mass == 0.0


def test_conditioned_nonzero_matches_closed_form():
    for rate in (0.05, 0.7, 2.0, 9.0):
        c = conditioned_nonzero(rate, tol=1e-12)
        assert c.prob(0) == 0.0
        denom = 1.0 - np.exp(-rate)
        ks = np.arange(1, c.masses.size)
        np.testing.assert_allclose(
            c.masses[1:], st.poisson.pmf(ks, rate) / denom, rtol=1e-10
        )
        assert c.mean() == pytest.approx(rate / denom, rel=1e-9)
    with pytest.raises(PmfError):
        conditioned_nonzero(0.0)


# --- thinning ---------------------------------------------------------------


@pytest.mark.parametrize("lam", [0.1, 1.0, 5.0])
@pytest.mark.parametrize("p", [0.1, 0.5, 0.9])
def test_thin_poisson_identity(lam, p):
    # thinning Poi(lam) with retention p gives Poi(lam * p)
    got = thin(poisson_pmf(lam, 1e-14), p)
    want = poisson_pmf(lam * p, 1e-14)
    assert tv_distance(got, want) <= 1e-9


def test_thin_binomial_identity():
    got = thin(binomial_pmf(12, 0.6), 0.25)
    want = binomial_pmf(12, 0.15)
    assert tv_distance(got, want) <= 1e-12


def test_thin_edge_probabilities():
    pi = binomial_pmf(5, 0.4)
    assert thin(pi, 0.0).prob(0) == 1.0
    assert tv_distance(thin(pi, 1.0), pi) == 0.0
    with pytest.raises(PmfError):
        thin(pi, 1.5)


def test_thin_preserves_tail_mass():
    pi = Pmf(np.array([0.5, 0.3]), 0.2, tol=0.3)
    out = thin(pi, 0.5)
    # the unrepresented 0.2 cannot be thinned, so it must stay unrepresented
    assert out.tail_mass >= 0.2 - 1e-15


# --- convolution and truncation --------------------------------------------


def test_convolve_poisson_additivity():
    got = convolve(poisson_pmf(0.7, 1e-14), poisson_pmf(1.8, 1e-14))
    assert tv_distance(got, poisson_pmf(2.5, 1e-14)) <= 1e-12


def test_convolve_delta_shifts():
    p = binomial_pmf(4, 0.5)
    shifted = convolve(p, delta(3))
    assert shifted.prob(3) == pytest.approx(p.prob(0))
    assert shifted.mean() == pytest.approx(p.mean() + 3.0)


def test_truncate_respects_budget_and_keeps_mass():
    p = poisson_pmf(5.0, tol=1e-14)
    t = truncate(p, 1e-6)
    assert t.masses.size < p.masses.size
    assert t.tail_mass <= 1e-6
    assert float(t.masses.sum()) + t.tail_mass == pytest.approx(1.0, abs=1e-12)
    # truncation only moved mass into the tail, never invented or lost any
    np.testing.assert_array_equal(t.masses, p.masses[: t.masses.size])


def test_truncate_noop_when_tail_already_large():
    p = Pmf(np.array([0.9]), 0.1, tol=0.2)
    assert truncate(p, 0.05) is p


# --- tv distance ------------------------------------------------------------


def test_tv_distance_basic():
    a = poisson_pmf(1.0)
    assert tv_distance(a, a) <= 1e-12
    b = poisson_pmf(2.0)
    assert tv_distance(a, b) == pytest.approx(tv_distance(b, a))
    # brute force on finite laws
    x = binomial_pmf(3, 0.5)
    y = binomial_pmf(3, 0.7)
    brute = 0.5 * sum(
        abs(x.prob(k) - y.prob(k)) for k in range(4)
    )
    assert tv_distance(x, y) == pytest.approx(brute)


def test_tv_distance_counts_tails():
    a = Pmf(np.array([0.9]), 0.1, tol=0.2)
    b = Pmf(np.array([0.9]), 0.1, tol=0.2)
    # identical explicit parts, but the tails might be disjoint
    assert tv_distance(a, b) == pytest.approx(0.1)


# --- stochastic dominance ---------------------------------------------------


def _brute_dominates(lower, upper):
    """CDF comparison by explicit loop; tails placed adversarially as in the
    contract (lower's tail at +inf, upper's just above its support)."""
    hi = max(lower.support_max, upper.support_max)
    ok = True
    for x in range(hi + 1):
        cl = sum(lower.prob(k) for k in range(x + 1))
        cu = sum(upper.prob(k) for k in range(x + 1))
        if cl < cu - CDF_SLACK:
            ok = False
    if lower.tail_mass > upper.tail_mass + CDF_SLACK:
        ok = False
    return ok


def test_dominates_poisson_ordering():
    small = poisson_pmf(1.0)
    large = poisson_pmf(2.5)
    assert dominates(small, large).outcome is Outcome.DOMINATES
    v = dominates(large, small)
    assert v.outcome is Outcome.NOT_DOMINATES
    assert v.witness is not None
    # the witness really is a point where the CDFs cross the wrong way
    w = v.witness
    cl = float(np.cumsum(large.masses)[w]) if w <= large.support_max else 1.0
    cu = float(np.cumsum(small.masses)[w]) if w <= small.support_max else 1.0
    assert cl + large.tail_mass < cu


def test_dominates_is_reflexive():
    p = poisson_pmf(3.0)
    assert bool(dominates(p, p))


def test_dominates_inconclusive_on_large_lower_tail():
    lower = Pmf(np.array([0.5]), 0.5, tol=0.6)
    upper = delta(0)
    v = dominates(lower, upper)
    assert v.outcome is Outcome.INCONCLUSIVE
    assert v.slack is not None and v.slack > 0


def test_dominance_verdict_bool():
    assert bool(DominanceVerdict(Outcome.DOMINATES))
    assert not bool(DominanceVerdict(Outcome.INCONCLUSIVE, slack=0.1))
    assert not bool(DominanceVerdict(Outcome.NOT_DOMINATES, witness=2))


@settings(max_examples=200, deadline=None)
@given(
    lo=hst.lists(hst.floats(0.0, 1.0), min_size=1, max_size=20),
    up=hst.lists(hst.floats(0.0, 1.0), min_size=1, max_size=20),
)
def test_dominates_agrees_with_brute_force(lo, up):
    if sum(lo) == 0 or sum(up) == 0:
        return
    lower = from_masses(np.array(lo) / sum(lo))
    upper = from_masses(np.array(up) / sum(up))
    verdict = dominates(lower, upper)
    if verdict.outcome is Outcome.DOMINATES:
        assert _brute_dominates(lower, upper)
    elif verdict.outcome is Outcome.NOT_DOMINATES:
        assert not _brute_dominates(lower, upper)


@settings(max_examples=200, deadline=None)
@given(raw=hst.lists(hst.floats(0.0, 1.0), min_size=1, max_size=30))
def test_from_masses_always_valid(raw):
    if sum(raw) == 0:
        return
    scale = sum(raw) * 1.5  # leave some mass for the tail
    p = from_masses(np.array(raw) / scale)
    assert float(p.masses.sum()) + p.tail_mass == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(
    a=hst.floats(0.05, 8.0),
    b=hst.floats(0.05, 8.0),
)
def test_convolve_mean_additive(a, b):
    x = poisson_pmf(a, 1e-13)
    y = poisson_pmf(b, 1e-13)
    assert convolve(x, y).mean() == pytest.approx(a + b, rel=1e-6)


# --- conditioned-Poisson comparisons ---------------------------------------


def test_likelihood_ratio_monotone_grid():
    rates = np.round(np.arange(0.1, 5.01, 0.1), 10)
    for i, r1 in enumerate(rates):
        for r2 in rates[i:]:
            assert likelihood_ratio_monotone(float(r1), float(r2), kmax=60)
    with pytest.raises(PmfError):
        likelihood_ratio_monotone(2.0, 1.0, kmax=10)


def test_conditioned_nonzero_dominance_increases_with_rate():
    for r1, r2 in [(0.1, 0.2), (0.5, 2.0), (1.0, 4.9)]:
        v = dominates(conditioned_nonzero(r1), conditioned_nonzero(r2))
        assert v.outcome is Outcome.DOMINATES, (r1, r2, v)


# --- Poisson division -------------------------------------------------------


def test_poisson_division_small_sample():
    tv = poisson_division_verify(rate=2.0, n=5, samples=20_000, seed=11)
    assert tv < 0.03


def test_poisson_division_zero_rate():
    assert poisson_division_verify(rate=0.0, n=5, samples=10, seed=0) == 0.0


def test_poisson_division_deterministic_in_seed():
    a = poisson_division_verify(rate=1.5, n=4, samples=5_000, seed=3)
    b = poisson_division_verify(rate=1.5, n=4, samples=5_000, seed=3)
    assert a == b


def test_poisson_division_rejects_bad_args():
    with pytest.raises(PmfError):
        poisson_division_verify(rate=-1.0, n=5, samples=10, seed=0)
    with pytest.raises(PmfError):
        poisson_division_verify(rate=1.0, n=0, samples=10, seed=0)
