"""Generic split-chain machinery over a regenerative Markov kernel.

The split chain is simulated retrospectively: after each transition
x -> x_next, the regeneration flag delta is Bernoulli with success
probability s(x)*q(x_next)/k(x_next|x), so the residual kernel is never
constructed.  Tours start at the atom (X1 ~ Q) and tau is the index of
the first delta = 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Protocol, runtime_checkable

import numpy as np
from numpy.random import Generator

PROB_TOL = 1e-12


class RegenProbError(AssertionError):
    """Raised when a model's regeneration probability leaves [0,1]."""


@runtime_checkable
class RegenerativeKernel(Protocol):
    """Capabilities a model must provide to the split-chain simulator."""

    def step(self, x: Any, rng: Generator) -> tuple[Any, Any]:
        """One transition from P(x, .); returns (x_next, aux)."""
        ...

    def q_sample(self, rng: Generator) -> Any:
        """One draw from the regeneration measure Q."""
        ...

    def regen_prob(self, x: Any, x_next: Any, aux: Any) -> float:
        """P(delta = 1 | x, x_next) for a transition produced by step()."""
        ...

    def s_lower(self, x: Any) -> float:
        """The minorization function s(x)."""
        ...

    def in_small_set(self, x: Any) -> bool:
        ...


@dataclass(frozen=True)
class TourResult:
    """One regeneration tour: tau plus bookkeeping."""

    tau: int
    steps_taken: int
    terminal_state: Any


def _checked_prob(p: float) -> float:
    if not -PROB_TOL <= p <= 1.0 + PROB_TOL:
        raise RegenProbError(
            f"regeneration probability {p} outside [0,1]; model bug"
        )
    return min(max(p, 0.0), 1.0)


def draw_tau(kernel: RegenerativeKernel, rng: Generator) -> TourResult:
    """Simulate one tour from the atom; tau = first n with delta_n = 1."""
    x = kernel.q_sample(rng)
    n = 0
    while True:
        n += 1
        x_next, aux = kernel.step(x, rng)
        p = _checked_prob(kernel.regen_prob(x, x_next, aux))
        if rng.random() < p:
            return TourResult(tau=n, steps_taken=n + 1, terminal_state=x_next)
        x = x_next


def tau_count_ge(
    kernel: RegenerativeKernel,
    rng: Generator,
    count: int,
    threshold: int,
) -> int:
    """Number of ``count`` fresh tau draws that are >= ``threshold``.

    Dispatches to a model-provided fast path when available.
    """
    fast = getattr(kernel, "tau_count_ge", None)
    if fast is not None:
        return int(fast(rng, count, threshold))
    hits = 0
    for _ in range(count):
        if draw_tau(kernel, rng).tau >= threshold:
            hits += 1
    return hits


def tau_values(
    kernel: RegenerativeKernel, rng: Generator, count: int
) -> np.ndarray:
    """``count`` i.i.d. tau draws as an int64 array."""
    fast = getattr(kernel, "tau_values", None)
    if fast is not None:
        return np.asarray(fast(rng, count), dtype=np.int64)
    return np.array(
        [draw_tau(kernel, rng).tau for _ in range(count)], dtype=np.int64
    )


def draw_from_Qn(
    kernel: RegenerativeKernel,
    n: int,
    rng: Generator,
    restart_budget: int | None = None,
) -> tuple[Any, int]:
    """Draw X_n conditional on no regeneration before n (the mixture Q_n).

    Re-runs n-step tour prefixes until delta_1 = ... = delta_{n-1} = 0 and
    returns (state, restarts).  Expected restarts are 1/P(tau >= n); the
    optional budget exists for diagnostics runs only.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    restarts = 0
    while True:
        x = kernel.q_sample(rng)
        if n == 1:
            return x, restarts
        ok = True
        for _ in range(n - 1):
            x_next, aux = kernel.step(x, rng)
            p = _checked_prob(kernel.regen_prob(x, x_next, aux))
            if rng.random() < p:
                ok = False
                break
            x = x_next
        if ok:
            return x, restarts
        restarts += 1
        if restart_budget is not None and restarts >= restart_budget:
            raise RuntimeError(
                f"draw_from_Qn exceeded restart budget {restart_budget}"
            )
