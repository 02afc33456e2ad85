"""Metropolis sampler for the Exp(1) target with uniform proposals.

Target density f(x) = e^{-x} on [0, inf); proposals are uniform on
[x-gamma, x+gamma].  Drift function V(x) = e^{cx}; the small set is
C = [0, gamma] with minorization s(x) = eps * I(x in C) against
q(y) = e^{-y}/(1-e^{-gamma}) on [0, gamma].
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from numpy.random import Generator
from scipy.optimize import minimize_scalar

from .bounds import DriftSpec, InvalidDriftError, beta_star

DEFAULT_C = 0.028
DEFAULT_GAMMA = 4.0
DEFAULT_KAPPA = 1.25
DEFAULT_BETA = None  # resolved to beta_star (J < 1 at the defaults)


def _expm1_ratio(t: float, gamma: float) -> float:
    """(e^{t*gamma} - 1)/t with a series branch near t = 0."""
    if abs(t) < 1e-6:
        x = t * gamma
        return gamma * (1.0 + x / 2.0 + x * x / 6.0 + x * x * x / 24.0)
    return math.expm1(t * gamma) / t


def _tail_factor(c: float, gamma: float) -> float:
    """The uphill-proposal contribution shared by both drift branches.

    I23 = int_0^gamma (e^{(c-1)z} + 1 - e^{-z}) dz.
    """
    return (
        _expm1_ratio(c - 1.0, gamma) + gamma + math.exp(-gamma) - 1.0
    )


def expected_V_inside(x: float, c: float, gamma: float) -> float:
    """Closed-form E[V(X')|x] for x in [0, gamma] with V = e^{cx}.

    Accounts for the rejected negative proposals on (x-gamma, 0).
    """
    ecx = math.exp(c * x)
    return (
        (gamma - x) * ecx
        + (ecx - 1.0) / c
        + ecx * _tail_factor(c, gamma)
    ) / (2.0 * gamma)


def drift_lambda(c: float, gamma: float) -> float:
    """lambda = (1/2gamma) * int_0^gamma (e^{-cz}+e^{(c-1)z}+1-e^{-z}) dz."""
    return (
        _expm1_ratio(-c, gamma) + _tail_factor(c, gamma)
    ) / (2.0 * gamma)


def mh_drift_constants(
    c: float, gamma: float
) -> tuple[float, float, float, float]:
    """(lambda, b, A_sup, epsilon) for the Exp(1) Metropolis chain.

    lambda is exact in closed form; A_sup and b come from bounded scalar
    maximization over the small set [0, gamma] (tolerance 1e-8).
    """
    if c <= 0.0 or gamma <= 0.0:
        raise ValueError("c and gamma must be positive")
    lam = drift_lambda(c, gamma)
    if lam >= 1.0:
        raise InvalidDriftError(
            f"drift rate lambda = {lam} >= 1 at c={c}, gamma={gamma}"
        )
    ev = lambda x: expected_V_inside(x, c, gamma)  # noqa: E731

    res_a = minimize_scalar(
        lambda x: -ev(x), bounds=(0.0, gamma), method="bounded",
        options={"xatol": 1e-10},
    )
    A_sup = max(-res_a.fun, ev(0.0), ev(gamma))

    gap = lambda x: ev(x) - lam * math.exp(c * x)  # noqa: E731
    res_b = minimize_scalar(
        lambda x: -gap(x), bounds=(0.0, gamma), method="bounded",
        options={"xatol": 1e-10},
    )
    b = max(-res_b.fun, gap(0.0), gap(gamma))

    eps = (1.0 - math.exp(-gamma)) / (2.0 * gamma)
    return lam, b, A_sup, eps


@njit(cache=False)
def _mh_tour(rng, gamma, one_minus_emg):  # pragma: no cover - jitted
    x = -math.log1p(-rng.random() * one_minus_emg)
    n = 0
    while True:
        n += 1
        y = x + gamma * (2.0 * rng.random() - 1.0)
        accepted = False
        if y >= 0.0:
            if y <= x:
                accepted = True
            elif rng.random() < math.exp(x - y):
                accepted = True
        x_next = y if accepted else x
        u = rng.random()
        if accepted and x <= gamma and x_next <= gamma:
            if u < math.exp(-min(x, x_next)):
                return n
        x = x_next


@njit(cache=False)
def _mh_tau_count(rng, count, threshold, gamma, one_minus_emg):
    hits = 0
    for _ in range(count):
        if _mh_tour(rng, gamma, one_minus_emg) >= threshold:
            hits += 1
    return hits


@njit(cache=False)
def _mh_tau_values(rng, count, gamma, one_minus_emg):
    out = np.empty(count, dtype=np.int64)
    for i in range(count):
        out[i] = _mh_tour(rng, gamma, one_minus_emg)
    return out


@dataclass(frozen=True)
class MhExpModel:
    """Regenerative kernel for the Exp(1) Metropolis chain."""

    c: float = DEFAULT_C
    gamma: float = DEFAULT_GAMMA
    lam: float = field(init=False)
    b: float = field(init=False)
    A_sup: float = field(init=False)
    epsilon: float = field(init=False)

    def __post_init__(self) -> None:
        lam, b, a_sup, eps = mh_drift_constants(self.c, self.gamma)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "A_sup", a_sup)
        object.__setattr__(self, "epsilon", eps)

    def drift_spec(self) -> DriftSpec:
        return DriftSpec(
            lam=self.lam, b=self.b, epsilon=self.epsilon, A_sup=self.A_sup,
            small_set=(0.0, self.gamma),
        )

    def default_beta(self) -> float:
        return beta_star(self.drift_spec())

    # -- split-chain kernel interface ------------------------------------
    def step(self, x: float, rng: Generator) -> tuple[float, tuple]:
        y = x + self.gamma * (2.0 * rng.random() - 1.0)
        accepted = False
        if y >= 0.0:
            if y <= x:
                accepted = True
            elif rng.random() < math.exp(x - y):
                accepted = True
        x_next = y if accepted else x
        return x_next, (accepted, y)

    def q_sample(self, rng: Generator) -> float:
        u = rng.random()
        return -math.log1p(-u * (1.0 - math.exp(-self.gamma)))

    def regen_prob(self, x: float, x_next: float, aux: tuple) -> float:
        accepted, _ = aux
        if not accepted or x > self.gamma or x_next > self.gamma:
            return 0.0
        # s(x) q(y) / [g(y|x) min(1, f(y)/f(x))], evaluated as displayed.
        s = self.epsilon
        q = math.exp(-x_next) / (1.0 - math.exp(-self.gamma))
        g = 1.0 / (2.0 * self.gamma)
        accept_term = 1.0 if x_next <= x else math.exp(x - x_next)
        return s * q / (g * accept_term)

    def s_lower(self, x: float) -> float:
        return self.epsilon if 0.0 <= x <= self.gamma else 0.0

    def in_small_set(self, x: float) -> bool:
        return 0.0 <= x <= self.gamma

    # -- fast paths ------------------------------------------------------
    def tau_count_ge(self, rng: Generator, count: int, threshold: int) -> int:
        return int(_mh_tau_count(
            rng, count, threshold, self.gamma,
            1.0 - math.exp(-self.gamma),
        ))

    def tau_values(self, rng: Generator, count: int) -> np.ndarray:
        return _mh_tau_values(
            rng, count, self.gamma, 1.0 - math.exp(-self.gamma)
        )


def beta_star_grid(
    c_values: np.ndarray, gamma_values: np.ndarray
) -> list[tuple[float, float, float]]:
    """beta_star over a (c, gamma) grid; NaN marks cells with lambda >= 1."""
    rows: list[tuple[float, float, float]] = []
    for c in np.asarray(c_values, dtype=float):
        for g in np.asarray(gamma_values, dtype=float):
            try:
                lam, b, a_sup, eps = mh_drift_constants(float(c), float(g))
                bs = beta_star(DriftSpec(lam=lam, b=b, epsilon=eps,
                                         A_sup=a_sup))
            except (InvalidDriftError, ValueError):
                bs = float("nan")
            rows.append((float(c), float(g), bs))
    return rows
