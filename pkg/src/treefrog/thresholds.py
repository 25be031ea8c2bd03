"""Closed-form threshold calculators and numeric inequality verifiers.

Everything here is a pure function of (d, mu) and friends; the grid verifier
`verify_nbound` is an independent cross-check of the closed form returned by
`epsilon_max`.
"""

import math
from dataclasses import dataclass

import numpy as np

# Numerical slack for the grid inequality check.  Must sit between the
# floating-point noise of the expm1 arithmetic (~2e-16 near the crossing)
# and the smallest genuine violation we need to detect: a relative 1e-6
# bump of epsilon above the closed-form maximum produces a worst-grid
# violation of only ~6e-13, so anything looser would mask it.
EQUALITY_TOL = 1e-15


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class EpsilonCertificate:
    d: int
    mu: float
    m: float
    epsilon_max: float | None
    lambda_grid_checked: str = "not checked"

    @property
    def exists(self) -> bool:
        return self.epsilon_max is not None


def epsilon_max(d: int, mu: float) -> EpsilonCertificate:
    """Largest growth increment certified by the binomial-parameter bound.

    epsilon_max = -d * ln(e^{-m} + e^{-m/d}) with m = mu/(d+1), present only
    when the log argument is below 1.  Absence is a valid outcome (the
    certificate simply does not apply), not an error.
    """
    if d < 2:
        raise DomainError("d must be >= 2")
    if mu < 0:
        raise DomainError("mu must be >= 0")
    m = mu / (d + 1)
    base = math.exp(-m) + math.exp(-m / d)
    eps = -d * math.log(base) if base < 1.0 else None
    return EpsilonCertificate(d=d, mu=mu, m=m, epsilon_max=eps)


def default_lambda_grid() -> np.ndarray:
    """512 log-spaced points on [1e-6, 1e3], plus the endpoint lambda = 0."""
    return np.concatenate(([0.0], np.logspace(-6.0, 3.0, 512)))


def nbound_sides(d: int, mu: float, epsilon: float, lam):
    """LHS and RHS of the binomial-parameter inequality at rate lambda."""
    lam = np.asarray(lam, dtype=np.float64)
    m = mu / (d + 1)
    lhs = -np.expm1(-(lam + epsilon) / d)
    rhs = (-np.expm1(-lam / d - m)) * (-np.expm1(-(lam + m) / d))
    return lhs, rhs


def verify_nbound(d: int, mu: float, epsilon: float, lambdas=None) -> bool:
    """Grid check that 1-e^{-(l+eps)/d} <= (1-e^{-l/d-m})(1-e^{-(l+m)/d})."""
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    if lambdas is None:
        lambdas = default_lambda_grid()
    lambdas = np.asarray(lambdas, dtype=np.float64)
    if lambdas.size == 0 or np.any(lambdas < 0):
        raise DomainError("lambda grid must be nonempty and nonnegative")
    lhs, rhs = nbound_sides(d, mu, epsilon, lambdas)
    return bool(np.all(lhs <= rhs + EQUALITY_TOL))


def binomial_param_compare(d: int, mu: float, epsilon: float, lam: float):
    """Success parameters (pM, pN) of the two Bin(d-1, .) laws being compared.

    The lower law is dominated by the upper one iff pM <= pN.
    """
    lhs, rhs = nbound_sides(d, mu, epsilon, lam)
    return float(lhs), float(rhs)


def cim_check(x: float):
    """Evaluate x^{-2} + x^{-2/x}; holds iff the value is below 1 (x >= 2)."""
    if x < 2:
        raise DomainError(f"check is defined for x >= 2 only, got {x}")
    value = x ** -2.0 + x ** (-2.0 / x)
    return value, value < 1.0


def recurrence_threshold(d: int) -> float:
    """Density above which recurrence is guaranteed: 2(d+1) ln d."""
    if d < 2:
        raise DomainError("d must be >= 2")
    return 2.0 * (d + 1) * math.log(d)


def transience_threshold(d: int) -> float:
    """Mean density below which transience is guaranteed: (d-1)^2 / (4d)."""
    if d < 2:
        raise DomainError("d must be >= 2")
    return (d - 1) ** 2 / (4.0 * d)
