"""Choosing how many nodes to activate.

Two routes to a good k: closed-form rules derived from the convergence
bounds (theoretical_k_ring / theoretical_k_exp), and an empirical
doubling search (search_k) that races every power-of-two branch plus the
full k = n run and keeps the best one.

The power-of-two candidates 1, 2, 4, ... sum to at most n nodes, so all
small branches together cost no more node activations per round than one
full-participation run: racing them for T iterations next to the k = n
run stays within a 2T iteration budget.  The candidate grid also covers
every k* < n within a factor of 4 from below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .algorithms import run_teleportation
from .problem import NoiseModel, QuadraticProblem
from .streams import StreamPlan
from .topology import build_topology
from .trace import RunTrace

CRITERIA = ("min-mean-grad-norm", "min-final-error")


@dataclass(frozen=True)
class BoundInputs:
    """Scalars feeding the convergence-rate expressions."""

    T: int
    sigma2: float
    zeta2: float
    L: float
    r0: float
    n: int

    def __post_init__(self) -> None:
        if self.T < 1:
            raise ValueError(f"T must be >= 1, got {self.T}")
        if self.sigma2 < 0 or self.zeta2 < 0:
            raise ValueError("sigma2 and zeta2 must be >= 0")
        if self.L <= 0:
            raise ValueError(f"L must be positive, got {self.L}")
        if self.r0 < 0:
            raise ValueError(f"r0 must be >= 0, got {self.r0}")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")


def candidate_ks(n: int) -> tuple[int, ...]:
    """Powers of two 1, 2, ..., 2^(floor(log2(n+1)) - 1), plus n itself."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    top = (n + 1).bit_length() - 1
    ks = [1 << j for j in range(top)]
    if ks[-1] != n:
        ks.append(n)
    return tuple(ks)


def _ratio(bounds: BoundInputs) -> float:
    spread = bounds.sigma2 + bounds.zeta2
    if bounds.r0 <= 0 or spread == 0:
        return 0.0
    return bounds.T * spread / (bounds.L * bounds.r0)


def _int_ceil_root(x: float, q: int) -> int:
    """Smallest integer m with m**q >= x; 0 when x <= 0.

    Float powers of near-perfect roots can land a hair above or below
    the integer, so the float estimate is corrected with exact integer
    arithmetic.
    """
    if x <= 0:
        return 0
    m = max(1, math.ceil(x ** (1.0 / q)))
    while m > 1 and (m - 1) ** q >= x:
        m -= 1
    while m**q < x:
        m += 1
    return m


def theoretical_k_ring(bounds: BoundInputs) -> int:
    """Rate-optimal active count for ring gossip.

    k = max(1, min(ceil(ratio^(1/7)), n)) with
    ratio = T (sigma2 + zeta2) / (L r0); ratio counts as 0 when r0 = 0
    or both spreads vanish.
    """
    return max(1, min(_int_ceil_root(_ratio(bounds), 7), bounds.n))


def theoretical_k_exp(bounds: BoundInputs) -> int:
    """Rate-optimal active count for exponential-graph gossip.

    k = max(1, min(ceil(ratio^(1/3)), ceil(ratio), n)).
    """
    r = _ratio(bounds)
    return max(1, min(_int_ceil_root(r, 3), math.ceil(r), bounds.n))


@dataclass(eq=False)
class SearchOutcome:
    candidates: list[int]
    traces: dict[int, RunTrace]
    scores: dict[int, float]
    selected_k: int
    criterion: str


def _score(trace: RunTrace, criterion: str) -> float:
    if trace.diverged:
        return math.inf
    if criterion == "min-mean-grad-norm":
        return trace.mean_grad_norm_sq()
    return trace.final_error


def search_k(
    problem: QuadraticProblem,
    noise: NoiseModel,
    family: str,
    eta: float,
    T: int,
    plan: StreamPlan,
    init: np.ndarray,
    *,
    criterion: str = "min-mean-grad-norm",
    chunk_size: int = 512,
) -> SearchOutcome:
    """Race all candidate active counts and keep the best.

    Every branch runs for the same T iterations with the same step size
    and the same StreamPlan.  "min-mean-grad-norm" scores a branch by the
    average squared global gradient norm over its whole trace,
    "min-final-error" by the last recorded error; diverged branches rank
    last and ties go to the smaller k.
    """
    if criterion not in CRITERIA:
        raise ValueError(f"criterion must be one of {CRITERIA}, got {criterion!r}")
    candidates = candidate_ks(problem.n)
    traces: dict[int, RunTrace] = {}
    scores: dict[int, float] = {}
    best_k = candidates[0]
    best_score = math.inf
    for k in candidates:
        mixing = build_topology(family, k)
        trace = run_teleportation(
            problem, noise, mixing, eta, T, plan, init, chunk_size=chunk_size
        )
        traces[k] = trace
        score = _score(trace, criterion)
        scores[k] = score
        if score < best_score:
            best_score = score
            best_k = k
    return SearchOutcome(
        candidates=candidates,
        traces=traces,
        scores=scores,
        selected_k=best_k,
        criterion=criterion,
    )
