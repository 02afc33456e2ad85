"""Deterministic named RNG substreams derived from a single root seed.

Every random consumer in the toolkit owns a substream addressed by a
(domain, *indices) path.  Streams are independent by construction
(SeedSequence spawn keys), so the assignment of work to OS threads or
processes can never change which numbers a consumer sees.
"""
from __future__ import annotations

import numpy as np
from numpy.random import Generator, SeedSequence, default_rng

# Domain codes for substream paths.
DOMAIN_PROPOSAL = 1  # geometric T* proposals
DOMAIN_VCOIN = 2     # the independent Bernoulli(a) coin for the small-a path
DOMAIN_G0 = 3        # the factory's single uniform G0
DOMAIN_TAU = 4       # regeneration-tour streams feeding the acceptance coins
DOMAIN_QN = 5        # the final draw from Q_n after acceptance
DOMAIN_BENCH = 6     # synthetic bit streams for factory benchmarks
DOMAIN_MISC = 7      # oracles and diagnostics

#: Number of regeneration tours produced per tau block stream.
TAU_BLOCK = 4096


def substream(seed: int, *path: int) -> Generator:
    """Return the generator for the substream addressed by ``path``."""
    return default_rng(SeedSequence(entropy=seed, spawn_key=tuple(path)))


class TauStream:
    """Sequential view over the block-indexed tau substream family.

    Tours are produced in blocks of :data:`TAU_BLOCK`; block ``j`` depends
    only on ``(seed, *prefix, j)``, so untouched whole blocks can be filled
    by any number of workers without affecting the values consumed.
    """

    def __init__(self, seed: int, *prefix: int):
        self.seed = seed
        self.prefix = prefix
        self.block_index = 0
        self.offset = 0  # tours already consumed from the current block
        self._gen: Generator | None = None

    def _current(self) -> Generator:
        if self._gen is None:
            self._gen = substream(self.seed, *self.prefix, self.block_index)
        return self._gen

    def split(self, count: int) -> list[tuple[Generator | None, int, int]]:
        """Reserve ``count`` tours; return work items (gen, block_index, k).

        The first/last items may be partial blocks and carry the live
        generator; full interior blocks carry ``None`` so the caller may
        create their generators in worker threads via :meth:`generator_for`.
        """
        items: list[tuple[Generator | None, int, int]] = []
        remaining = count
        while remaining > 0:
            room = TAU_BLOCK - self.offset
            take = min(remaining, room)
            partial = self.offset > 0 or take < TAU_BLOCK
            gen = self._current() if partial else None
            items.append((gen, self.block_index, take))
            self.offset += take
            remaining -= take
            if self.offset == TAU_BLOCK:
                self.block_index += 1
                self.offset = 0
                self._gen = None
        return items

    def generator_for(self, block_index: int) -> Generator:
        return substream(self.seed, *self.prefix, block_index)
