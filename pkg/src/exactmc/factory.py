"""Smoothed Bernoulli factory.

Turns a stream of i.i.d. Bernoulli(p) bits (p unknown) into a single
Bernoulli(a*p) bit for a known scale ``a``, provided a*p <= 1-omega.  The
linear target a*p is extended to a twice-differentiable f with curvature
bound C = a^2*sqrt(2)/(delta*sqrt(e)); Bernstein-style envelopes around f
are tightened by doubling the bit count and compared against a single
uniform G0 until they decide the output bit.

The expected number of input bits is infinite: the stopping tail is
P(consumed > n) = a^2/(n*delta*sqrt(2e)) for n at or past the initial
doubling level, independently of p.  Callers must budget accordingly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np
from numpy.random import Generator
from scipy.special import gammaln, ndtr

SQRT_PI_HALF = math.sqrt(math.pi) / 2.0


class FactoryConfigError(ValueError):
    """Raised for parameter combinations that cannot terminate."""


class BitSource(Protocol):
    """Counting view of an i.i.d. Bernoulli bit stream."""

    def take(self, count: int) -> int:
        """Consume the next ``count`` bits; return how many were 1."""
        ...


class BernoulliBitSource:
    """Synthetic Bernoulli(p) bit stream for benchmarks and tests."""

    def __init__(self, p: float, rng: Generator):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p must lie in [0,1], got {p}")
        self.p = p
        self.rng = rng
        self.consumed = 0

    def take(self, count: int) -> int:
        self.consumed += count
        if self.p == 0.0:
            return 0
        return int(self.rng.binomial(count, self.p))


@dataclass(frozen=True)
class FactoryParams:
    """Configuration of the smoothed target f(p) ~= a*p."""

    scale_a: float
    omega: float = 0.2
    delta_smooth: float = 1.0 / 6.0
    max_budget: int | None = 2**32

    def __post_init__(self) -> None:
        if self.scale_a <= 0.0:
            raise ValueError(f"scale_a must be positive, got {self.scale_a}")
        if not 0.0 < self.delta_smooth < self.omega < 1.0:
            raise ValueError(
                "need 0 < delta_smooth < omega < 1, got "
                f"delta_smooth={self.delta_smooth}, omega={self.omega}"
            )
        if self.max_budget is not None and self.max_budget < 1:
            raise ValueError("max_budget must be positive when set")

    @property
    def seam(self) -> float:
        """Start of the smoothing segment, (1-omega)/a."""
        return (1.0 - self.omega) / self.scale_a


@dataclass
class DoublingState:
    """Envelope state after one doubling step of a factory run."""

    n: int
    h_n: int
    l_n: float
    u_n: float
    l_star: float
    u_star: float
    l_tilde: float
    u_tilde: float
    g0: float
    consumed: int


@dataclass(frozen=True)
class FactoryResult:
    """Outcome of one factory run."""

    bit: int | None
    consumed: int
    final_n: int
    exhausted: bool


def _erf(z: np.ndarray | float) -> np.ndarray | float:
    # erf through the standard normal distribution function.
    return 2.0 * ndtr(np.asarray(z, dtype=float) * math.sqrt(2.0)) - 1.0


def smooth_extension(x, params: FactoryParams):
    """The cap F(x) = delta*(sqrt(pi)/2)*erf(a*x/delta), F'(0)=a."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0.0):
        raise ValueError("smooth_extension requires x >= 0")
    out = params.delta_smooth * SQRT_PI_HALF * _erf(
        params.scale_a * arr / params.delta_smooth
    )
    return float(out) if np.isscalar(x) else out


def target_f(p, params: FactoryParams):
    """Smoothed target: a*p below the seam, capped below 1-omega above it."""
    arr = np.asarray(p, dtype=float)
    if np.any((arr < 0.0) | (arr > 1.0)):
        raise ValueError("target_f requires p in [0,1]")
    seam = params.seam
    linear = params.scale_a * arr
    above = np.clip(arr - seam, 0.0, None)
    capped = (1.0 - params.omega) + params.delta_smooth * SQRT_PI_HALF * _erf(
        params.scale_a * above / params.delta_smooth
    )
    out = np.where(arr < seam, linear, capped)
    return float(out) if np.isscalar(p) else out


def curvature_bound(params: FactoryParams) -> float:
    """Uniform bound C = a^2*sqrt(2)/(delta*sqrt(e)) on |f''|."""
    return params.scale_a**2 * math.sqrt(2.0) / (
        params.delta_smooth * math.sqrt(math.e)
    )


def coeff_lower(n: int, k, params: FactoryParams):
    """Lower Bernstein coefficient a(n,k) = f(k/n)."""
    arr = np.asarray(k)
    if np.any((arr < 0) | (arr > n)) or n < 1:
        raise ValueError(f"need 0 <= k <= n with n >= 1, got k={k}, n={n}")
    return target_f(arr / n, params) if not np.isscalar(k) else target_f(
        k / n, params
    )


def coeff_upper(n: int, k, params: FactoryParams):
    """Upper Bernstein coefficient b(n,k) = a(n,k) + C/(2n)."""
    return coeff_lower(n, k, params) + curvature_bound(params) / (2.0 * n)


def initial_power(params: FactoryParams) -> int:
    """Smallest n = 2^m with b(n,n) <= 1 (Minimum consumption level)."""
    if params.omega - params.delta_smooth * SQRT_PI_HALF <= 0.0:
        raise FactoryConfigError(
            "omega - delta_smooth*sqrt(pi)/2 <= 0: the upper envelope can "
            "never drop below 1, the factory would not terminate"
        )
    n = 1
    while coeff_upper(n, n, params) > 1.0:
        n *= 2
    return n


def hypergeom_log_weights(n: int, h_n: int) -> tuple[np.ndarray, np.ndarray]:
    """Support and log-weights of i ~ Hypergeometric(n, n/2, h_n).

    These are the conditional probabilities that the first n/2 of n
    exchangeable bits contain i of the h_n successes.
    """
    half = n // 2
    lo = max(0, h_n - half)
    hi = min(h_n, half)
    i = np.arange(lo, hi + 1, dtype=np.int64)
    lw = (
        gammaln(half + 1.0) - gammaln(h_n - i + 1.0) - gammaln(half - (h_n - i) + 1.0)
        + gammaln(half + 1.0) - gammaln(i + 1.0) - gammaln(half - i + 1.0)
        - (gammaln(n + 1.0) - gammaln(h_n + 1.0) - gammaln(n - h_n + 1.0))
    )
    return i, lw


def reweighted_bounds(
    n: int,
    h_n: int,
    coeff: Callable[[int, np.ndarray], np.ndarray],
) -> float:
    """Hypergeometric reweighting sum_i w(i) * coeff(n/2, i).

    ``n`` must be a power of two with at least one completed doubling; the
    weights are computed in log space so the evaluation stays finite for n
    up to 2**32.
    """
    if n < 2 or n & (n - 1):
        raise ValueError(f"n must be a power of two >= 2, got {n}")
    if not 0 <= h_n <= n:
        raise ValueError(f"need 0 <= h_n <= n, got h_n={h_n}")
    i, lw = hypergeom_log_weights(n, h_n)
    w = np.exp(lw)
    total = float(w.sum())
    # gammaln rounding grows with n (about 5e-8 at n = 2**24); renormalize
    # and only reject gross errors.
    if abs(total - 1.0) > 1e-6:
        raise FloatingPointError(
            f"hypergeometric weights sum to {total}, expected 1"
        )
    vals = np.asarray(coeff(n // 2, i), dtype=float)
    return float(w @ vals) / total


def run_factory(
    params: FactoryParams,
    bit_source: BitSource,
    uniform_source: Generator,
    trace: list[DoublingState] | None = None,
) -> FactoryResult:
    """Produce one Bernoulli(a*p) bit from a Bernoulli(p) bit source.

    The normalized envelope starts at the raw Bernstein bounds of the
    initial level (the pre-data bounds are the trivial [0,1]); from the
    second level on it contracts by the reweighted half-resolution bounds.
    Returns an exhausted result without a bit if ``max_budget`` would be
    exceeded.
    """
    C = curvature_bound(params)
    n0 = initial_power(params)
    budget = params.max_budget
    g0 = float(uniform_source.random())

    if budget is not None and n0 > budget:
        return FactoryResult(bit=None, consumed=0, final_n=0, exhausted=True)

    lower = lambda nn, i: coeff_lower(nn, i, params)  # noqa: E731

    h = bit_source.take(n0)
    consumed = n0
    n = n0
    l_tilde, u_tilde = 0.0, 1.0
    while True:
        l_n = float(coeff_lower(n, h, params))
        u_n = l_n + C / (2.0 * n)
        if n == n0:
            l_star, u_star = 0.0, 1.0
        else:
            l_star = reweighted_bounds(n, h, lower)
            # widths are constant per level, so u* = l* + C/n exactly
            u_star = l_star + C / n
        width = u_star - l_star
        if width < 1e-300:
            bit = 1 if g0 <= l_tilde else 0
            return FactoryResult(bit=bit, consumed=consumed, final_n=n,
                                 exhausted=False)
        span = u_tilde - l_tilde
        new_l = l_tilde + (l_n - l_star) / width * span
        new_u = u_tilde - (u_star - u_n) / width * span
        # The coefficient inequalities make the envelope monotone; clamp
        # only the floating-point dust.
        l_tilde = min(max(new_l, l_tilde), 1.0)
        u_tilde = max(min(new_u, u_tilde), l_tilde)
        if trace is not None:
            trace.append(DoublingState(
                n=n, h_n=h, l_n=l_n, u_n=u_n, l_star=l_star, u_star=u_star,
                l_tilde=l_tilde, u_tilde=u_tilde, g0=g0, consumed=consumed,
            ))
        if g0 <= l_tilde:
            return FactoryResult(bit=1, consumed=consumed, final_n=n,
                                 exhausted=False)
        if g0 >= u_tilde:
            return FactoryResult(bit=0, consumed=consumed, final_n=n,
                                 exhausted=False)
        if budget is not None and consumed + n > budget:
            return FactoryResult(bit=None, consumed=consumed, final_n=n,
                                 exhausted=True)
        h += bit_source.take(n)
        consumed += n
        n *= 2
