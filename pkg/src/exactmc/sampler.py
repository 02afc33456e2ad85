"""Top-level exact sampling algorithm.

Draw T* ~ Geometric(1-1/beta); accept it with an exact Bernoulli
(a(T*) * P(tau >= T*)) coin built either from a single tour (a <= 1) or
from the Bernoulli factory fed by tour indicator bits (a > 1); once a
proposal is accepted, return a draw from the mixture component Q_{T*}.
The result is exactly stationary.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

from numpy.random import Generator

from . import _rng
from .bounds import TailBound, scale_a
from .factory import FactoryParams, FactoryResult, run_factory
from .regen import RegenerativeKernel, draw_from_Qn, draw_tau, tau_count_ge


@dataclass(frozen=True)
class SamplerConfig:
    """Everything needed to reproduce a run bit-exactly."""

    bound: TailBound
    seed: int
    factory_omega: float = 0.2
    factory_delta: float = 1.0 / 6.0
    factory_budget: int | None = 2**32
    worker_count: int = 1
    tau_budget: int | None = None

    def __post_init__(self) -> None:
        if self.worker_count < 1:
            raise ValueError("worker_count must be >= 1")
        # The factory admits a*p <= 1-omega (closed), so kappa may sit
        # exactly at 1/kappa = 1-omega, which the default settings do.
        if 1.0 / self.bound.kappa > 1.0 - self.factory_omega + 1e-12:
            raise ValueError(
                "need 1/kappa <= 1 - omega: got kappa="
                f"{self.bound.kappa}, omega={self.factory_omega}"
            )

    def factory_params(self, a: float) -> FactoryParams:
        return FactoryParams(
            scale_a=a,
            omega=self.factory_omega,
            delta_smooth=self.factory_delta,
            max_budget=self.factory_budget,
        )


@dataclass(frozen=True)
class ProposalRecord:
    """Telemetry for one T* proposal."""

    n: int
    a: float
    path: str  # "small" or "factory"
    tau_consumed: int
    bit: int | None
    exhausted: bool = False


@dataclass
class DrawRecord:
    """One exact draw plus its cost accounting."""

    value: Any
    accepted_T: int
    proposals_tried: int
    tau_consumed: int
    factory_invocations: int
    qn_restarts: int
    wall_time: float
    abandoned: bool = False
    proposals: list[ProposalRecord] = field(default_factory=list)


class TourBitSource:
    """Adapts fresh i.i.d. tours into the factory bits W_i = I(tau_i >= n).

    Tours come from the block-indexed substream family for one factory
    invocation; whole untouched blocks may be generated by parallel
    workers without changing any value consumed.
    """

    def __init__(
        self,
        kernel: RegenerativeKernel,
        stream: _rng.TauStream,
        threshold: int,
        workers: int = 1,
    ):
        self.kernel = kernel
        self.stream = stream
        self.threshold = threshold
        self.workers = workers
        self.consumed = 0

    def _count(self, gen: Generator | None, block: int, k: int) -> int:
        if gen is None:
            gen = self.stream.generator_for(block)
        return tau_count_ge(self.kernel, gen, k, self.threshold)

    def take(self, count: int) -> int:
        self.consumed += count
        items = self.stream.split(count)
        parallel = [it for it in items if it[0] is None]
        if self.workers > 1 and len(parallel) > 1:
            serial = [it for it in items if it[0] is not None]
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                futures = [
                    pool.submit(self._count, None, block, k)
                    for (_, block, k) in parallel
                ]
                hits = sum(f.result() for f in futures)
            hits += sum(self._count(g, b, k) for (g, b, k) in serial)
            return hits
        return sum(self._count(g, b, k) for (g, b, k) in items)


def propose_T(beta: float, rng: Generator) -> int:
    """T* ~ Geometric(1 - 1/beta) on {1, 2, ...}."""
    if beta <= 1.0:
        raise ValueError(f"beta must exceed 1, got {beta}")
    return int(rng.geometric(1.0 - 1.0 / beta))


def coin_small_a(
    a: float,
    n: int,
    kernel: RegenerativeKernel,
    tau_rng: Generator,
    v_rng: Generator | None = None,
) -> int:
    """Exact Bernoulli(a * P(tau >= n)) coin for a <= 1: B = V * W."""
    if not 0.0 < a <= 1.0:
        raise ValueError(f"coin_small_a requires a in (0,1], got {a}")
    w = tau_count_ge(kernel, tau_rng, 1, n)
    if v_rng is None:
        v_rng = tau_rng
    v = 1 if a >= 1.0 else (1 if v_rng.random() < a else 0)
    return v * w


def coin_large_a(
    a: float,
    n: int,
    kernel: RegenerativeKernel,
    factory_params: FactoryParams,
    tau_stream: _rng.TauStream,
    g0_rng: Generator,
    workers: int = 1,
) -> FactoryResult:
    """Exact Bernoulli(a * P(tau >= n)) coin for a > 1 via the factory."""
    if a <= 1.0:
        raise ValueError(f"coin_large_a requires a > 1, got {a}")
    source = TourBitSource(kernel, tau_stream, n, workers=workers)
    return run_factory(factory_params, source, g0_rng)


def exact_draw(
    config: SamplerConfig,
    kernel: RegenerativeKernel,
    draw_index: int = 0,
) -> DrawRecord:
    """Produce one exact stationary draw (or an abandoned record).

    All randomness is addressed by (seed, domain, draw_index, ...): a
    proposal stream, a V-coin stream, a G0 stream, one Q_n stream, and a
    fresh tau substream family per acceptance-coin invocation.
    """
    bound = config.bound
    seed = config.seed
    start = time.perf_counter()
    prop_rng = _rng.substream(seed, _rng.DOMAIN_PROPOSAL, draw_index)
    v_rng = _rng.substream(seed, _rng.DOMAIN_VCOIN, draw_index)
    g0_rng = _rng.substream(seed, _rng.DOMAIN_G0, draw_index)

    proposals: list[ProposalRecord] = []
    tau_total = 0
    factory_calls = 0
    invocation = 0
    while True:
        n = propose_T(bound.beta, prop_rng)
        a = scale_a(bound, n)
        tau_stream = _rng.TauStream(
            seed, _rng.DOMAIN_TAU, draw_index, invocation
        )
        invocation += 1
        if a <= 1.0:
            # One tour: its substream family, first block, first tour.
            gen = tau_stream.split(1)[0][0]
            assert gen is not None
            bit = coin_small_a(a, n, kernel, gen, v_rng)
            tau_total += 1
            proposals.append(ProposalRecord(n=n, a=a, path="small",
                                            tau_consumed=1, bit=bit))
        else:
            factory_calls += 1
            result = coin_large_a(
                a, n, kernel, config.factory_params(a), tau_stream, g0_rng,
                workers=config.worker_count,
            )
            tau_total += result.consumed
            proposals.append(ProposalRecord(
                n=n, a=a, path="factory", tau_consumed=result.consumed,
                bit=result.bit, exhausted=result.exhausted,
            ))
            if result.exhausted:
                return DrawRecord(
                    value=None, accepted_T=0, proposals_tried=len(proposals),
                    tau_consumed=tau_total,
                    factory_invocations=factory_calls, qn_restarts=0,
                    wall_time=time.perf_counter() - start,
                    abandoned=True, proposals=proposals,
                )
            bit = result.bit
        if config.tau_budget is not None and tau_total > config.tau_budget:
            return DrawRecord(
                value=None, accepted_T=0, proposals_tried=len(proposals),
                tau_consumed=tau_total, factory_invocations=factory_calls,
                qn_restarts=0, wall_time=time.perf_counter() - start,
                abandoned=True, proposals=proposals,
            )
        if bit == 1:
            break

    qn_rng = _rng.substream(seed, _rng.DOMAIN_QN, draw_index)
    value, restarts = draw_from_Qn(kernel, n, qn_rng)
    return DrawRecord(
        value=value, accepted_T=n, proposals_tried=len(proposals),
        tau_consumed=tau_total, factory_invocations=factory_calls,
        qn_restarts=restarts, wall_time=time.perf_counter() - start,
        proposals=proposals,
    )


def uniform_ergodic_draw(
    epsilon: float,
    kernel: RegenerativeKernel,
    rng: Generator,
) -> Any:
    """Fast path for uniformly ergodic kernels with constant s = epsilon.

    T ~ Geometric(epsilon) directly replaces the rejection sampler, since
    then p_n = eps*(1-eps)**(n-1) exactly.
    """
    if not 0.0 < epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in (0,1], got {epsilon}")
    if getattr(kernel, "constant_s", None) is None:
        raise TypeError(
            "uniform_ergodic_draw requires a kernel with constant s "
            "(attribute constant_s)"
        )
    if abs(kernel.constant_s - epsilon) > 1e-12:
        raise ValueError(
            f"kernel has constant s = {kernel.constant_s}, not {epsilon}"
        )
    t = int(rng.geometric(epsilon))
    value, _ = draw_from_Qn(kernel, t, rng)
    return value
