"""Gossip topologies and their mixing matrices.

Each builder returns a doubly stochastic weight matrix over k nodes
together with its spectral gap p, the quantity that controls how fast
repeated averaging contracts disagreement: one gossip round shrinks the
squared distance to consensus by at least a factor (1 - p).

All families use uniform weights 1/(degree+1), counting the self loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_FAMILIES = ("ring", "complete", "exponential", "torus")


@dataclass(frozen=True, eq=False)
class MixingMatrix:
    """A doubly stochastic gossip matrix with its spectral gap."""

    k: int
    weights: np.ndarray
    p: float
    family: str


def _check_size(k: int) -> None:
    if not isinstance(k, (int, np.integer)) or isinstance(k, bool):
        raise ValueError(f"node count must be an integer, got {k!r}")
    if k < 1:
        raise ValueError(f"node count must be >= 1, got {k}")


def is_doubly_stochastic(weights: np.ndarray, tol: float = 1e-12) -> bool:
    """True if all entries are >= 0 and every row and column sums to 1."""
    w = np.asarray(weights)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        return False
    if np.any(w < -tol):
        return False
    ones = np.ones(w.shape[0])
    return bool(
        np.all(np.abs(w.sum(axis=1) - ones) <= tol)
        and np.all(np.abs(w.sum(axis=0) - ones) <= tol)
    )


def spectral_gap(weights: np.ndarray) -> float:
    """Spectral gap p = 1 - s^2 of a doubly stochastic matrix.

    s is the largest singular value of W - (1/k) 11^T, i.e. the operator
    norm of W restricted to the disagreement subspace.  The operator-norm
    definition covers non-symmetric matrices (the exponential family) as
    well.  Raises ValueError when W is not doubly stochastic or when the
    gap is not positive (averaging would not contract disagreement).
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError(f"mixing matrix must be square, got shape {w.shape}")
    if not is_doubly_stochastic(w):
        raise ValueError("mixing matrix is not doubly stochastic within 1e-12")
    k = w.shape[0]
    if k == 1:
        return 1.0
    s = float(np.linalg.svd(w - np.full((k, k), 1.0 / k), compute_uv=False)[0])
    p = 1.0 - s * s
    if p <= 0.0:
        raise ValueError(
            f"mixing matrix does not contract disagreement (gap {p:.3e} <= 0); "
            "the gossip graph is disconnected or periodic"
        )
    return p


def _circulant(k: int, offsets: list[int], weight: float) -> np.ndarray:
    w = np.zeros((k, k))
    for i in range(k):
        for off in offsets:
            w[i, (i + off) % k] += weight
    return w


def build_ring(k: int) -> MixingMatrix:
    """Ring of k nodes, weight 1/3 on self and both neighbours.

    For k = 2 the two neighbours coincide and the weights merge to 1/2;
    a single node averages with itself only.
    """
    _check_size(k)
    if k == 1:
        w = np.ones((1, 1))
    elif k == 2:
        w = np.full((2, 2), 0.5)
    else:
        w = _circulant(k, [-1, 0, 1], 1.0 / 3.0)
    return MixingMatrix(k=k, weights=w, p=spectral_gap(w), family="ring")


def build_complete(k: int) -> MixingMatrix:
    """Complete graph: every entry 1/k, gap exactly 1."""
    _check_size(k)
    w = np.full((k, k), 1.0 / k)
    return MixingMatrix(k=k, weights=w, p=spectral_gap(w), family="complete")


def exponential_offsets(k: int) -> list[int]:
    """Neighbour offsets {0} plus 2^j mod k for j < ceil(log2 k)."""
    hops = max(0, math.ceil(math.log2(k))) if k > 1 else 0
    return [0] + [pow(2, j, k) for j in range(hops)]


def build_exponential(k: int) -> MixingMatrix:
    """Directed exponential graph: node i sends to i + 2^j mod k.

    Circulant with uniform weight 1/(ceil(log2 k) + 1) over the self loop
    and the power-of-two offsets.  Not symmetric in general, but circulant
    matrices stay doubly stochastic.
    """
    _check_size(k)
    offs = exponential_offsets(k)
    w = _circulant(k, offs, 1.0 / len(offs))
    return MixingMatrix(k=k, weights=w, p=spectral_gap(w), family="exponential")


def build_torus(k: int) -> MixingMatrix:
    """sqrt(k) x sqrt(k) torus with the 5-point stencil, weight 1/5 each.

    k must be a perfect square.  On sides of length 1 or 2 the wrapped
    neighbours coincide and their weights merge.
    """
    _check_size(k)
    side = math.isqrt(k)
    if side * side != k:
        raise ValueError(f"torus needs a perfect square node count, got {k}")
    w = np.zeros((k, k))
    for r in range(side):
        for c in range(side):
            i = r * side + c
            for dr, dc in ((0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)):
                j = ((r + dr) % side) * side + (c + dc) % side
                w[i, j] += 0.2
    return MixingMatrix(k=k, weights=w, p=spectral_gap(w), family="torus")


_BUILDERS = {
    "ring": build_ring,
    "complete": build_complete,
    "exponential": build_exponential,
    "torus": build_torus,
}


def build_topology(family: str, k: int) -> MixingMatrix:
    """Build the k-node mixing matrix of the named family."""
    if family not in _BUILDERS:
        raise ValueError(
            f"unknown topology family {family!r}, expected one of {_FAMILIES}"
        )
    return _BUILDERS[family](k)


def ring_spectral_gap_exact(k: int) -> float:
    """Closed-form ring gap from the circulant eigenvalues.

    The eigenvalues are (1 + 2 cos(2 pi j / k)) / 3; for k >= 4 the
    largest modulus below 1 is attained at j = 1.
    """
    _check_size(k)
    if k <= 3:
        return 1.0
    lam = (1.0 + 2.0 * math.cos(2.0 * math.pi / k)) / 3.0
    return 1.0 - lam * lam
