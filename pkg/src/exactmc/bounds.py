"""Computable geometric tail bounds on regeneration times.

Given drift/minorization constants (lambda, b, epsilon, A_sup) for a
geometrically ergodic chain, this module produces the explicit bound
P(tau >= n) <= M * d(n) with d(n) = beta**(-n), and the per-proposal
acceptance scale a(n) = beta**n / (M * kappa) used by the rejection
sampler.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any


class InvalidDriftError(ValueError):
    """Raised when drift constants violate their admissible ranges."""


class BetaRangeError(ValueError):
    """Raised when beta falls outside the admissible (1, beta_star) range."""


@dataclass(frozen=True)
class DriftSpec:
    """Drift and minorization constants for one chain.

    ``lam`` and ``b`` come from E[V(X')|x] <= lam*V(x) + b*I(x in C),
    ``epsilon`` is the minorization lower bound on the small set, and
    ``A_sup`` is the supremum of the one-step drift expectation over C.
    """

    lam: float
    b: float
    epsilon: float
    A_sup: float
    small_set: Any = None

    def __post_init__(self) -> None:
        if not 0.0 < self.lam < 1.0:
            raise InvalidDriftError(f"lambda must lie in (0,1), got {self.lam}")
        if not 0.0 < self.epsilon <= 1.0:
            raise InvalidDriftError(
                f"epsilon must lie in (0,1], got {self.epsilon}"
            )
        if self.b < 0.0:
            raise InvalidDriftError(f"b must be nonnegative, got {self.b}")
        if self.A_sup < 1.0:
            raise InvalidDriftError(f"A_sup must be >= 1, got {self.A_sup}")

    @property
    def J(self) -> float:
        return (self.A_sup - self.epsilon) / self.lam


def beta_star(drift: DriftSpec) -> float:
    """Largest admissible rate beta for the geometric tail bound.

    Equals 1/lambda when J = (A_sup - eps)/lambda < 1, otherwise
    exp{log(lambda) * log(1-eps) / (log J - log(1-eps))}.  Always in
    (1, 1/lambda].
    """
    J = drift.J
    if J < 1.0:
        return 1.0 / drift.lam
    log_one_minus_eps = math.log1p(-drift.epsilon)
    value = math.exp(
        math.log(drift.lam) * log_one_minus_eps
        / (math.log(J) - log_one_minus_eps)
    )
    return min(value, 1.0 / drift.lam)


def big_M(drift: DriftSpec, beta: float) -> float:
    """Multiplier M in P(tau >= n) <= M * beta**(-n)."""
    bstar = beta_star(drift)
    _check_beta(drift, beta, bstar)
    phi = phi_beta(drift, beta)
    J = drift.J
    one_minus_eps = 1.0 - drift.epsilon
    base = drift.b / (drift.epsilon * (1.0 - drift.lam))
    numer = 1.0 - beta * one_minus_eps
    denom = 1.0 - one_minus_eps * (J / one_minus_eps) ** phi
    M = beta * base**phi * (numer / denom)
    if not (math.isfinite(M) and M > 0.0):
        raise BetaRangeError(
            f"tail multiplier M is not positive/finite at beta={beta}: {M}"
        )
    return M


def phi_beta(drift: DriftSpec, beta: float) -> float:
    """Interpolation exponent phi(beta) = log(beta)/log(1/lambda)."""
    return math.log(beta) / math.log(1.0 / drift.lam)


def _check_beta(drift: DriftSpec, beta: float, bstar: float) -> None:
    # The right endpoint beta = beta_star = 1/lambda is admissible when
    # J < 1 (the bound stays finite there); otherwise the interval is open.
    if drift.J < 1.0:
        ok = 1.0 < beta <= bstar + 1e-15
    else:
        ok = 1.0 < beta < bstar
    if not ok:
        raise BetaRangeError(
            f"beta={beta} outside admissible range (1, {bstar})"
        )


def d_n(beta: float, n: int) -> float:
    """Geometric decay term d(n) = beta**(-n)."""
    if beta <= 1.0:
        raise BetaRangeError(f"beta must exceed 1, got {beta}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return beta ** (-n)


def D_total(beta: float) -> float:
    """Sum of d(n) over n >= 1, i.e. 1/(beta-1)."""
    if beta <= 1.0:
        raise BetaRangeError(f"beta must exceed 1, got {beta}")
    return 1.0 / (beta - 1.0)


@dataclass(frozen=True)
class TailBound:
    """Frozen tail bound P(tau >= n) <= M * beta**(-n) plus kappa."""

    drift: DriftSpec
    beta: float
    kappa: float
    J: float = field(init=False)
    beta_star: float = field(init=False)
    phi: float = field(init=False)
    M: float = field(init=False)
    D: float = field(init=False)

    def __post_init__(self) -> None:
        if self.kappa <= 1.0:
            raise ValueError(f"kappa must exceed 1, got {self.kappa}")
        object.__setattr__(self, "J", self.drift.J)
        object.__setattr__(self, "beta_star", beta_star(self.drift))
        object.__setattr__(self, "phi", phi_beta(self.drift, self.beta))
        object.__setattr__(self, "M", big_M(self.drift, self.beta))
        object.__setattr__(self, "D", D_total(self.beta))

    def tail(self, n: int) -> float:
        """The bound M * d(n) on P(tau >= n)."""
        return self.M * d_n(self.beta, n)

    def constants(self) -> dict[str, float]:
        d = self.drift
        return {
            "lambda": d.lam,
            "b": d.b,
            "epsilon": d.epsilon,
            "A_sup": d.A_sup,
            "J": self.J,
            "beta_star": self.beta_star,
            "beta": self.beta,
            "phi_beta": self.phi,
            "M": self.M,
            "D": self.D,
            "kappa": self.kappa,
        }


def make_tail_bound(drift: DriftSpec, beta: float, kappa: float) -> TailBound:
    return TailBound(drift=drift, beta=beta, kappa=kappa)


def scale_a(bound: TailBound, n: int) -> float:
    """Acceptance scale a(n) = beta**n / (M * kappa) = 1/[M d(n) kappa].

    Guarantees a * P(tau >= n) <= 1/kappa by the tail bound.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return bound.beta**n / (bound.M * bound.kappa)
