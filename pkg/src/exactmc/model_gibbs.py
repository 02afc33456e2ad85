"""Two-variable Gibbs sampler for the normal-data posterior.

Posterior pi(mu, theta) ∝ theta^{-(m+1)/2} exp{-m(s2+(ybar-mu)^2)/(2 theta)}
with conditionals mu | theta ~ N(ybar, theta/m) and
theta | mu ~ IG((m-1)/2, m[s2+(ybar-mu)^2]/2); updates theta then mu.
Drift function V(theta, mu) = 1 + (mu-ybar)^2; the small set is V <= d.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from numpy.random import Generator
from scipy.special import gammaincc, gammainccinv

from .bounds import DriftSpec

DEFAULT_BETA = 1.35
DEFAULT_KAPPA = 1.25


def ig_cdf(shape: float, rate: float, t) -> float | np.ndarray:
    """CDF of IG(shape, rate) (density ∝ w^{-(shape+1)} e^{-rate/w})."""
    return gammaincc(shape, rate / np.asarray(t, dtype=float))


def ig_cdf_inverse(shape: float, rate: float, u) -> float | np.ndarray:
    """Quantile of IG(shape, rate) at probability u."""
    return rate / gammainccinv(shape, np.asarray(u, dtype=float))


def gibbs_minorization(
    d: float, s2: float, m: int
) -> tuple[float, float]:
    """(theta_star, epsilon) for the small set (mu-ybar)^2 <= d-1.

    theta_star is the crossing point of the two extreme inverse-gamma
    densities; epsilon integrates their pointwise infimum.
    """
    if d <= 1.0:
        raise ValueError(f"d must exceed 1, got {d}")
    a1 = (m - 1) / 2.0
    theta_star = m * (d - 1.0) / ((m - 1) * math.log1p((d - 1.0) / s2))
    b_big = m * (s2 + d - 1.0) / 2.0
    b_small = m * s2 / 2.0
    eps = float(
        ig_cdf(a1, b_big, theta_star)
        + (1.0 - ig_cdf(a1, b_small, theta_star))
    )
    return theta_star, eps


@njit(cache=False)
def _gibbs_tau_scan(rng, mu0, threshold, a1, m, ybar, s2,
                    dm1, theta_star):  # pragma: no cover - jitted
    """Count tours with tau >= threshold, starting from the given Q draws."""
    hits = 0
    for j in range(mu0.shape[0]):
        mu = mu0[j]
        n = 0
        while True:
            n += 1
            rate = m * (s2 + (ybar - mu) * (ybar - mu)) / 2.0
            theta = rate / rng.standard_gamma(a1)
            mu_next = ybar + math.sqrt(theta / m) * rng.standard_normal()
            dev = (ybar - mu) * (ybar - mu)
            u = rng.random()
            if dev <= dm1:
                bump = dm1 if theta < theta_star else 0.0
                p = ((s2 + bump) / (s2 + dev)) ** a1 * math.exp(
                    (m * dev - m * bump) / (2.0 * theta)
                )
                if u < p:
                    if n >= threshold:
                        hits += 1
                    break
            mu = mu_next
    return hits


@njit(cache=False)
def _gibbs_tau_scan_values(rng, mu0, a1, m, ybar, s2, dm1, theta_star):
    out = np.empty(mu0.shape[0], dtype=np.int64)
    for j in range(mu0.shape[0]):
        mu = mu0[j]
        n = 0
        while True:
            n += 1
            rate = m * (s2 + (ybar - mu) * (ybar - mu)) / 2.0
            theta = rate / rng.standard_gamma(a1)
            mu_next = ybar + math.sqrt(theta / m) * rng.standard_normal()
            dev = (ybar - mu) * (ybar - mu)
            u = rng.random()
            if dev <= dm1:
                bump = dm1 if theta < theta_star else 0.0
                p = ((s2 + bump) / (s2 + dev)) ** a1 * math.exp(
                    (m * dev - m * bump) / (2.0 * theta)
                )
                if u < p:
                    out[j] = n
                    break
            mu = mu_next
    return out


@dataclass(frozen=True)
class GibbsModel:
    """Regenerative kernel for the two-variable Gibbs chain."""

    ybar: float = 1.0
    s2: float = 4.0
    m: int = 11
    lam: float = 0.5
    d: float | None = None
    b: float = field(init=False)
    d_eff: float = field(init=False)
    theta_star: float = field(init=False)
    epsilon: float = field(init=False)
    A_sup: float = field(init=False)

    def __post_init__(self) -> None:
        if self.m < 5:
            raise ValueError("m >= 5 required for geometric ergodicity")
        b = (self.s2 + self.m - 4.0) / (self.m - 3.0)
        lam_min = 1.0 / (self.m - 3.0)
        if not lam_min < self.lam < 1.0:
            raise ValueError(
                f"lambda must lie in ({lam_min}, 1), got {self.lam}"
            )
        d = self.d if self.d is not None else b / (self.lam - lam_min)
        if d < b / (self.lam - lam_min) - 1e-12:
            raise ValueError(
                f"d = {d} below the drift requirement "
                f"{b / (self.lam - lam_min)}"
            )
        theta_star, eps = gibbs_minorization(d, self.s2, self.m)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "d_eff", d)
        object.__setattr__(self, "theta_star", theta_star)
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "A_sup", d / (self.m - 3.0) + b)

    @property
    def a1(self) -> float:
        return (self.m - 1) / 2.0

    def drift_spec(self) -> DriftSpec:
        return DriftSpec(
            lam=self.lam, b=self.b, epsilon=self.epsilon, A_sup=self.A_sup,
            small_set=self.d_eff,
        )

    def theta_rate(self, mu: float) -> float:
        return self.m * (self.s2 + (self.ybar - mu) ** 2) / 2.0

    # -- split-chain kernel interface ------------------------------------
    def step(
        self, x: tuple[float, float], rng: Generator
    ) -> tuple[tuple[float, float], None]:
        _, mu_prev = x
        theta = self.theta_rate(mu_prev) / rng.standard_gamma(self.a1)
        mu = self.ybar + math.sqrt(theta / self.m) * rng.standard_normal()
        return (theta, mu), None

    def q_sample(self, rng: Generator) -> tuple[float, float]:
        theta, mu = self.q_sample_batch(rng, 1)
        return float(theta[0]), float(mu[0])

    def q_sample_batch(
        self, rng: Generator, count: int
    ) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized draws from Q: theta from the normalized infimum
        density, then mu ~ N(ybar, theta/m)."""
        a1 = self.a1
        b_big = self.m * (self.s2 + self.d_eff - 1.0) / 2.0
        b_small = self.m * self.s2 / 2.0
        f_big = float(ig_cdf(a1, b_big, self.theta_star))
        f_small = float(ig_cdf(a1, b_small, self.theta_star))
        w_big = f_big / self.epsilon
        u0 = rng.random(count)
        u1 = rng.random(count)
        z = rng.standard_normal(count)
        low = u0 < w_big
        c = np.where(low, u1 * f_big, f_small + u1 * (1.0 - f_small))
        rate = np.where(low, b_big, b_small)
        theta = rate / gammainccinv(a1, c)
        mu = self.ybar + np.sqrt(theta / self.m) * z
        return theta, mu

    def regen_prob(
        self,
        x: tuple[float, float],
        x_next: tuple[float, float],
        aux: None,
    ) -> float:
        _, mu_prev = x
        theta, _ = x_next
        if (mu_prev - self.ybar) ** 2 > self.d_eff - 1.0:
            return 0.0
        return self.regen_prob_small_set(mu_prev, theta)

    def regen_prob_small_set(self, mu_prev: float, theta: float) -> float:
        """The closed-form ratio; requires mu_prev inside the small set.

        Depends only on (mu_prev, theta) -- not on theta_prev or the new
        mu.
        """
        dev = (self.ybar - mu_prev) ** 2
        if dev > self.d_eff - 1.0:
            raise ValueError(
                f"mu_prev = {mu_prev} outside the small set (dev={dev})"
            )
        bump = self.d_eff - 1.0 if theta < self.theta_star else 0.0
        return ((self.s2 + bump) / (self.s2 + dev)) ** self.a1 * math.exp(
            (self.m * dev - self.m * bump) / (2.0 * theta)
        )

    def s_lower(self, x: tuple[float, float]) -> float:
        return self.epsilon if self.in_small_set(x) else 0.0

    def in_small_set(self, x: tuple[float, float]) -> bool:
        _, mu = x
        return 1.0 + (mu - self.ybar) ** 2 <= self.d_eff

    # -- fast paths ------------------------------------------------------
    def tau_count_ge(self, rng: Generator, count: int, threshold: int) -> int:
        _, mu0 = self.q_sample_batch(rng, count)
        return int(_gibbs_tau_scan(
            rng, mu0, threshold, self.a1, float(self.m), self.ybar,
            self.s2, self.d_eff - 1.0, self.theta_star,
        ))

    def tau_values(self, rng: Generator, count: int) -> np.ndarray:
        _, mu0 = self.q_sample_batch(rng, count)
        return _gibbs_tau_scan_values(
            rng, mu0, self.a1, float(self.m), self.ybar, self.s2,
            self.d_eff - 1.0, self.theta_star,
        )

    # -- i.i.d. oracle ---------------------------------------------------
    def sequential_oracle_draw(self, rng: Generator) -> tuple[float, float]:
        """One i.i.d. posterior draw: theta from its marginal, then mu."""
        shape = self.m / 2.0 - 1.0
        theta = (self.m * self.s2 / 2.0) / rng.standard_gamma(shape)
        mu = self.ybar + math.sqrt(theta / self.m) * rng.standard_normal()
        return theta, mu
