"""Run metrics and convergence-rate evaluators.

The rate evaluators spell out the two upper bounds (full participation
vs subset activation) with all absolute constants set to 1; they are
meant for comparing regimes and choosing k, not for predicting absolute
iteration counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .trace import RunTrace
from .tuning import BoundInputs


def _check_columns(Z: np.ndarray) -> np.ndarray:
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[1] < 1:
        raise ValueError(f"expected a d x k column matrix, got shape {Z.shape}")
    return Z


def error_to_optimum(Z: np.ndarray, x_star: np.ndarray) -> float:
    """(1/k) sum_m ||z_m - x_star||^2 over the k columns."""
    Z = _check_columns(Z)
    x_star = np.asarray(x_star, dtype=np.float64)
    if x_star.shape != (Z.shape[0],):
        raise ValueError(
            f"optimum must have shape ({Z.shape[0]},), got {x_star.shape}"
        )
    diff = Z - x_star[:, None]
    return float(np.einsum("jm,jm->", diff, diff)) / Z.shape[1]


def consensus_error(Z: np.ndarray) -> float:
    """(1/k) sum_m ||z_m - mean||^2, zero exactly at consensus."""
    Z = _check_columns(Z)
    dev = Z - Z.mean(axis=1)[:, None]
    return float(np.einsum("jm,jm->", dev, dev)) / Z.shape[1]


def iterations_to_target(trace: RunTrace, target: float) -> int | None:
    """First recorded iteration with error <= target, None if never."""
    if target <= 0:
        raise ValueError(f"target must be positive, got {target}")
    hit = np.nonzero(trace.error <= target)[0]
    if hit.size == 0:
        return None
    return int(trace.iterations[hit[0]])


@dataclass(frozen=True)
class RateEstimate:
    """One evaluated bound: the three summands and their total."""

    stochastic_term: float
    drift_term: float
    optimization_term: float

    @property
    def total(self) -> float:
        return self.stochastic_term + self.drift_term + self.optimization_term


def _check_gap(p: float) -> float:
    if not 0 < p <= 1:
        raise ValueError(f"spectral gap must be in (0, 1], got {p}")
    return float(p)


def rate_dsgd(bounds: BoundInputs, p: float) -> RateEstimate:
    """Full-participation bound with gap p of the n-node graph.

    sqrt(L r0 s2 / (n T))
      + (L^2 r0^2 (p s2 + z2) (1 - p) / (T^2 p^2))^(1/3)
      + L r0 / (T p), constants 1.
    """
    p = _check_gap(p)
    T, s2, z2, L, r0, n = (
        bounds.T, bounds.sigma2, bounds.zeta2, bounds.L, bounds.r0, bounds.n,
    )
    t1 = np.sqrt(L * r0 * s2 / (n * T))
    t2 = (L * L * r0 * r0 * (p * s2 + z2) * (1 - p) / (T * T * p * p)) ** (1 / 3)
    t3 = L * r0 / (T * p)
    return RateEstimate(float(t1), float(t2), float(t3))


def rate_teleportation(bounds: BoundInputs, k: int, p: float) -> RateEstimate:
    """Subset-activation bound with k active nodes and gap p of their graph.

    sqrt(L r0 (s2 + (1 - (k-1)/(n-1)) z2) / (k T))
      + (L^2 r0^2 (s2 + z2) (1 - p) / (T^2 p))^(1/3)
      + L r0 / (T p), constants 1.  The heterogeneity factor vanishes at
    full participation (and for n = 1).
    """
    p = _check_gap(p)
    if not 1 <= k <= bounds.n:
        raise ValueError(f"k must be in 1..{bounds.n}, got {k}")
    T, s2, z2, L, r0, n = (
        bounds.T, bounds.sigma2, bounds.zeta2, bounds.L, bounds.r0, bounds.n,
    )
    partial = 0.0 if n == 1 else 1.0 - (k - 1) / (n - 1)
    t1 = np.sqrt(L * r0 * (s2 + partial * z2) / (k * T))
    t2 = (L * L * r0 * r0 * (s2 + z2) * (1 - p) / (T * T * p)) ** (1 / 3)
    t3 = L * r0 / (T * p)
    return RateEstimate(float(t1), float(t2), float(t3))
