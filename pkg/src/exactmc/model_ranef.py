"""Balanced one-way random effects block Gibbs sampler.

Model: Y_ij = phi_i + e_ij with phi_i ~ N(mu, s2_phi), e_ij ~ N(0, s2_e),
inverse-gamma priors on both variances and a flat prior on mu.  The block
Gibbs chain updates theta = (s2_phi, s2_e) then xi = (mu, phi).  Drift
function V(xi) = K + d1*w1(xi) + d2*w2(xi) with w1 = sum (phi_i - mu)^2
and w2 = sum m (phi_i - ybar_i)^2; the operative small set is the
rectangle {K + d1*w1 <= d, K + d2*w2 <= d}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from numpy.random import Generator
from scipy.special import gammaincc, gammainccinv

from .bounds import DriftSpec

DEFAULT_BETA = 1.000083
DEFAULT_KAPPA = 1.25

STYRENE_WORKER_MEANS = (
    3.302, 4.587, 5.052, 5.089, 4.498, 5.186, 4.915,
    4.876, 5.262, 5.009, 5.602, 4.336, 4.813,
)


@dataclass(frozen=True)
class StyreneData:
    """Bundled styrene exposure summary statistics (13 workers, 3 reps)."""

    ybar_i: tuple[float, ...] = STYRENE_WORKER_MEANS
    SST: float = 11.430
    SSE: float = 14.711
    q: int = 13
    m: int = 3

    @property
    def M_tot(self) -> int:
        return self.q * self.m

    @property
    def sum_sq_group_dev(self) -> float:
        """Sum of (ybar_i - ybar)^2 as implied by SST under balance."""
        return self.SST / self.m


def styrene_dataset() -> StyreneData:
    return StyreneData()


def balanced_delta2(q: int, m: int) -> float:
    """Variance-sum constant for the balanced design."""
    return 1.0 - 1.0 / (q * (m + 1)) + max(q * (m + 1) / m**2, 1.0 / m)


def ig_intersection(shape: float, rate_big: float, rate_small: float) -> float:
    """Crossing point of IG(shape, rate_big) and IG(shape, rate_small)."""
    if rate_big == rate_small:
        raise ValueError("degenerate intersection: equal rates")
    return (rate_big - rate_small) / (
        shape * (math.log(rate_big) - math.log(rate_small))
    )


def infimum_mass(shape: float, rate_big: float, rate_small: float,
                 crossing: float) -> float:
    """Integral of the pointwise infimum of the two IG densities."""
    below = float(gammaincc(shape, rate_big / crossing))
    above = 1.0 - float(gammaincc(shape, rate_small / crossing))
    return below + above


@njit(cache=False)
def _ranef_xi(rng, s2phi, s2e, ybar_i, ybar, m, q):  # pragma: no cover
    denom = s2e + m * s2phi
    mu = ybar + math.sqrt((s2phi + s2e / m) / q) * rng.standard_normal()
    phi = np.empty(q, dtype=np.float64)
    sd = math.sqrt(s2phi * s2e / denom)
    for i in range(q):
        mean = (s2e * mu + m * s2phi * ybar_i[i]) / denom
        phi[i] = mean + sd * rng.standard_normal()
    return mu, phi


@njit(cache=False)
def _ranef_tau_scan(rng, s2phi0, s2e0, threshold, ybar_i, ybar, m, q,
                    a_phi, a_e, beta1, beta2, sse, d, K, d1, d2,
                    star_phi, star_e, collect, out):  # pragma: no cover
    hits = 0
    for j in range(s2phi0.shape[0]):
        mu, phi = _ranef_xi(rng, s2phi0[j], s2e0[j], ybar_i, ybar, m, q)
        n = 0
        while True:
            n += 1
            w1 = 0.0
            w2 = 0.0
            for i in range(q):
                w1 += (phi[i] - mu) ** 2
                w2 += m * (phi[i] - ybar_i[i]) ** 2
            s2phi = (w1 / 2.0 + beta1) / rng.standard_gamma(a_phi)
            s2e = ((w2 + sse) / 2.0 + beta2) / rng.standard_gamma(a_e)
            u = rng.random()
            if K + d1 * w1 <= d and K + d2 * w2 <= d:
                cap1 = (d - K) / d1 if s2phi < star_phi else 0.0
                cap2 = (d - K) / d2 if s2e < star_e else 0.0
                p = (
                    ((cap1 + 2.0 * beta1) / (w1 + 2.0 * beta1)) ** a_phi
                    * math.exp((w1 - cap1) / (2.0 * s2phi))
                    * ((cap2 + sse + 2.0 * beta2)
                       / (w2 + sse + 2.0 * beta2)) ** a_e
                    * math.exp((w2 - cap2) / (2.0 * s2e))
                )
                if u < p:
                    if n >= threshold:
                        hits += 1
                    if collect:
                        out[j] = n
                    break
            mu, phi = _ranef_xi(rng, s2phi, s2e, ybar_i, ybar, m, q)
    return hits


@dataclass(frozen=True)
class RanefModel:
    """Regenerative kernel for the styrene random-effects chain."""

    data: StyreneData = field(default_factory=styrene_dataset)
    alpha1: float = 0.1
    alpha2: float = 0.1
    beta1: float = 10.0
    beta2: float = 10.0
    K_offset: float = 50.0
    delta1: float = 1.0
    delta2: float = 1.0
    lam: float = 0.97
    Delta2: float = field(init=False)
    lambda_star: float = field(init=False)
    b: float = field(init=False)
    d: float = field(init=False)
    A_sup: float = field(init=False)
    sigma_phi_star: float = field(init=False)
    sigma_e_star: float = field(init=False)
    epsilon: float = field(init=False)

    def __post_init__(self) -> None:
        q, m, M_tot = self.data.q, self.data.m, self.data.M_tot
        delta2_const = balanced_delta2(q, m)
        denom_phi = q + 2.0 * self.alpha1 - 2.0
        denom_e = M_tot + 2.0 * self.alpha2 - 2.0
        lam_star = max(
            1.0 / denom_phi,
            (self.delta1 * delta2_const / self.delta2 + q + 1.0) / denom_e,
        )
        if not lam_star < self.lam < 1.0:
            raise ValueError(
                f"lambda must lie in ({lam_star}, 1), got {self.lam}"
            )
        ssq = self.data.sum_sq_group_dev
        b = (
            self.K_offset * (1.0 - self.lam)
            + 2.0 * self.delta1 * self.beta1 / denom_phi
            + (self.delta1 * delta2_const + self.delta2 * (q + 1.0))
            * (self.data.SSE + 2.0 * self.beta2) / denom_e
            + (self.delta1 + m * self.delta2) * ssq
        )
        d = b / (self.lam - lam_star)
        A_sup = (
            (d - self.K_offset) / denom_phi
            + (self.delta1 * delta2_const / self.delta2 + q + 1.0)
            / denom_e * (d - self.K_offset)
            + b + lam_star
        )
        star_phi = ig_intersection(
            self.shape_phi, self.rate_phi_big(d), self.beta1
        )
        star_e = ig_intersection(
            self.shape_e, self.rate_e_big(d), self.rate_e_small
        )
        eps = (
            infimum_mass(self.shape_phi, self.rate_phi_big(d), self.beta1,
                         star_phi)
            * infimum_mass(self.shape_e, self.rate_e_big(d),
                           self.rate_e_small, star_e)
        )
        object.__setattr__(self, "Delta2", delta2_const)
        object.__setattr__(self, "lambda_star", lam_star)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "A_sup", A_sup)
        object.__setattr__(self, "sigma_phi_star", star_phi)
        object.__setattr__(self, "sigma_e_star", star_e)
        object.__setattr__(self, "epsilon", eps)

    # -- derived shapes/rates -------------------------------------------
    @property
    def shape_phi(self) -> float:
        return self.data.q / 2.0 + self.alpha1

    @property
    def shape_e(self) -> float:
        return self.data.M_tot / 2.0 + self.alpha2

    def rate_phi_big(self, d: float) -> float:
        return (d - self.K_offset) / (2.0 * self.delta1) + self.beta1

    def rate_e_big(self, d: float) -> float:
        return ((d - self.K_offset) / self.delta2 + self.data.SSE) / 2.0 \
            + self.beta2

    @property
    def rate_e_small(self) -> float:
        return self.data.SSE / 2.0 + self.beta2

    @property
    def grand_mean(self) -> float:
        return float(np.mean(self.data.ybar_i))

    def drift_spec(self) -> DriftSpec:
        return DriftSpec(
            lam=self.lam, b=self.b, epsilon=self.epsilon, A_sup=self.A_sup,
            small_set=self.d,
        )

    # -- conditional updates --------------------------------------------
    def w_stats(self, xi: tuple[float, np.ndarray]) -> tuple[float, float]:
        mu, phi = xi
        ybar_i = np.asarray(self.data.ybar_i)
        w1 = float(np.sum((phi - mu) ** 2))
        w2 = float(np.sum(self.data.m * (phi - ybar_i) ** 2))
        return w1, w2

    def theta_update(
        self, xi: tuple[float, np.ndarray], rng: Generator
    ) -> tuple[float, float]:
        w1, w2 = self.w_stats(xi)
        s2phi = (w1 / 2.0 + self.beta1) / rng.standard_gamma(self.shape_phi)
        s2e = ((w2 + self.data.SSE) / 2.0 + self.beta2) / rng.standard_gamma(
            self.shape_e
        )
        return s2phi, s2e

    def xi_update(
        self, theta: tuple[float, float], rng: Generator
    ) -> tuple[float, np.ndarray]:
        s2phi, s2e = theta
        mu, phi = _ranef_xi(
            rng, s2phi, s2e, np.asarray(self.data.ybar_i), self.grand_mean,
            float(self.data.m), self.data.q,
        )
        return float(mu), phi

    # -- split-chain kernel interface ------------------------------------
    def step(self, x, rng: Generator):
        _, xi_prev = x
        theta = self.theta_update(xi_prev, rng)
        xi = self.xi_update(theta, rng)
        return (theta, xi), None

    def q_sample(self, rng: Generator):
        s2phi, s2e = self.q_sample_theta_batch(rng, 1)
        theta = (float(s2phi[0]), float(s2e[0]))
        return theta, self.xi_update(theta, rng)

    def q_sample_theta_batch(
        self, rng: Generator, count: int
    ) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized theta-marginal draws from the regeneration measure."""
        s2phi = self._piecewise_ig_batch(
            rng, count, self.shape_phi, self.rate_phi_big(self.d),
            self.beta1, self.sigma_phi_star,
        )
        s2e = self._piecewise_ig_batch(
            rng, count, self.shape_e, self.rate_e_big(self.d),
            self.rate_e_small, self.sigma_e_star,
        )
        return s2phi, s2e

    @staticmethod
    def _piecewise_ig_batch(rng, count, shape, rate_big, rate_small,
                            crossing) -> np.ndarray:
        f_big = float(gammaincc(shape, rate_big / crossing))
        f_small = float(gammaincc(shape, rate_small / crossing))
        mass = infimum_mass(shape, rate_big, rate_small, crossing)
        w_big = f_big / mass
        u0 = rng.random(count)
        u1 = rng.random(count)
        low = u0 < w_big
        c = np.where(low, u1 * f_big, f_small + u1 * (1.0 - f_small))
        rate = np.where(low, rate_big, rate_small)
        return rate / gammainccinv(shape, c)

    def regen_prob(self, x, x_next, aux) -> float:
        _, xi_prev = x
        theta, _ = x_next
        w1, w2 = self.w_stats(xi_prev)
        if not self._w_in_small_set(w1, w2):
            return 0.0
        return self.regen_prob_small_set(w1, w2, theta)

    def _w_in_small_set(self, w1: float, w2: float) -> bool:
        return (
            self.K_offset + self.delta1 * w1 <= self.d
            and self.K_offset + self.delta2 * w2 <= self.d
        )

    def regen_prob_small_set(
        self, w1: float, w2: float, theta: tuple[float, float]
    ) -> float:
        """Closed-form regeneration probability; xi' must be in the set."""
        if not self._w_in_small_set(w1, w2):
            raise ValueError(
                f"(w1={w1}, w2={w2}) outside the enlarged small set"
            )
        s2phi, s2e = theta
        cap1 = (self.d - self.K_offset) / self.delta1 \
            if s2phi < self.sigma_phi_star else 0.0
        cap2 = (self.d - self.K_offset) / self.delta2 \
            if s2e < self.sigma_e_star else 0.0
        sse = self.data.SSE
        return (
            ((cap1 + 2.0 * self.beta1) / (w1 + 2.0 * self.beta1))
            ** self.shape_phi
            * math.exp((w1 - cap1) / (2.0 * s2phi))
            * ((cap2 + sse + 2.0 * self.beta2)
               / (w2 + sse + 2.0 * self.beta2)) ** self.shape_e
            * math.exp((w2 - cap2) / (2.0 * s2e))
        )

    def s_lower(self, x) -> float:
        return self.epsilon if self.in_small_set(x) else 0.0

    def in_small_set(self, x) -> bool:
        _, xi = x
        w1, w2 = self.w_stats(xi)
        return self._w_in_small_set(w1, w2)

    # -- fast paths ------------------------------------------------------
    def _scan(self, rng, count, threshold, collect):
        s2phi0, s2e0 = self.q_sample_theta_batch(rng, count)
        out = np.empty(count if collect else 0, dtype=np.int64)
        hits = _ranef_tau_scan(
            rng, s2phi0, s2e0, threshold, np.asarray(self.data.ybar_i),
            self.grand_mean, float(self.data.m), self.data.q,
            self.shape_phi, self.shape_e, self.beta1, self.beta2,
            self.data.SSE, self.d, self.K_offset, self.delta1, self.delta2,
            self.sigma_phi_star, self.sigma_e_star, collect, out,
        )
        return hits, out

    def tau_count_ge(self, rng: Generator, count: int, threshold: int) -> int:
        hits, _ = self._scan(rng, count, threshold, False)
        return int(hits)

    def tau_values(self, rng: Generator, count: int) -> np.ndarray:
        _, out = self._scan(rng, count, 1, True)
        return out
