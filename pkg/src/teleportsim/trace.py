"""Per-iteration record of a simulation run."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(eq=False)
class RunTrace:
    """Metrics of one run, one record per iteration from 0 to T.

    Record 0 describes the initial state before any update.  A run that
    diverges (error above 1e12 or non-finite) is truncated at the first
    offending iteration and flagged, so a truncated trace has fewer than
    T + 1 records.  final_params holds the d x k column matrix at the
    last recorded iteration.
    """

    algorithm: str
    topology: str
    n: int
    k: int
    eta: float
    seed: int
    iterations: np.ndarray
    error: np.ndarray
    consensus_error: np.ndarray
    grad_norm_sq: np.ndarray
    final_params: np.ndarray
    diverged: bool = False
    extras: dict = field(default_factory=dict)

    @property
    def records(self) -> int:
        return int(self.iterations.shape[0])

    @property
    def final_error(self) -> float:
        return float(self.error[-1])

    def mean_grad_norm_sq(self) -> float:
        """Average squared gradient norm over all recorded iterations."""
        return float(self.grad_norm_sq.mean())
