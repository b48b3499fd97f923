"""Deterministic random-stream derivation for simulation runs.

A StreamPlan owns nothing but a master seed.  Every stream a run needs is
derived from (master seed, purpose tag, optional node number) through
SeedSequence, so two runs built from equal plans consume identical draws
and one node's noise never depends on what the other nodes or the
samplers drew.

Sampling streams are addressable by round: round r of a width-k run
occupies uniform draws [r*k, (r+1)*k), which PCG64 can jump to directly.
Gradient-noise streams are keyed by the physical node, not by token, so
a node produces the same noise sequence under every algorithm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_TAG_SELECTION = 1
_TAG_PERMUTATION = 2
_TAG_NOISE = 3
_TAG_PROBLEM = 4


@dataclass(frozen=True)
class StreamPlan:
    master_seed: int

    def __post_init__(self) -> None:
        if not isinstance(self.master_seed, (int, np.integer)) or isinstance(
            self.master_seed, bool
        ):
            raise ValueError(f"master seed must be an integer, got {self.master_seed!r}")
        if self.master_seed < 0:
            raise ValueError(f"master seed must be >= 0, got {self.master_seed}")

    def _bitgen(self, *key: int) -> np.random.PCG64:
        entropy = (int(self.master_seed),) + tuple(int(v) for v in key)
        return np.random.PCG64(np.random.SeedSequence(entropy))

    def selection_stream(self, k: int, start_round: int = 0) -> np.random.Generator:
        """Stream that picks active sets, positioned at the given round."""
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        if start_round < 0:
            raise ValueError(f"round must be >= 0, got {start_round}")
        bg = self._bitgen(_TAG_SELECTION)
        if start_round:
            bg.advance(start_round * k)
        return np.random.Generator(bg)

    def permutation_stream(self, k: int, start_round: int = 0) -> np.random.Generator:
        """Stream that assigns tokens within a sampled set."""
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        if start_round < 0:
            raise ValueError(f"round must be >= 0, got {start_round}")
        bg = self._bitgen(_TAG_PERMUTATION)
        if start_round:
            bg.advance(start_round * k)
        return np.random.Generator(bg)

    def noise_stream(self, node: int) -> np.random.Generator:
        """Gradient-noise stream of one physical node (numbered from 1)."""
        if node < 1:
            raise ValueError(f"node must be >= 1, got {node}")
        return np.random.Generator(self._bitgen(_TAG_NOISE, node))

    def problem_stream(self) -> np.random.Generator:
        """Stream for drawing the problem instance itself."""
        return np.random.Generator(self._bitgen(_TAG_PROBLEM))
