"""Synthetic heterogeneous quadratic objective.

Node i (numbered 1..n) holds f_i(x) = 0.5 * ||(i / sqrt(n)) (x - b_i)||^2,
so its curvature grows with the node number and the smoothness constant of
the hardest node is L = n.  The shift vectors b_i are drawn with variance
zeta2 / i^2 per coordinate, which makes zeta2 the knob for how far the
local minimizers spread.  Stochastic gradients add isotropic noise with
total variance sigma2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class QuadraticProblem:
    n: int
    d: int
    b: np.ndarray  # shape (n, d), row i-1 is the shift of node i
    zeta2: float

    @property
    def smoothness(self) -> float:
        """Largest per-node smoothness constant, attained at node n."""
        return float(self.n)

    def curvature(self, node: int) -> float:
        """Scalar curvature i^2 / n of node i."""
        _check_node(self, node)
        return node * node / self.n


def _check_node(problem: QuadraticProblem, node: int) -> None:
    if not 1 <= node <= problem.n:
        raise ValueError(f"node must be in 1..{problem.n}, got {node}")


def _check_point(problem: QuadraticProblem, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (problem.d,):
        raise ValueError(f"point must have shape ({problem.d},), got {x.shape}")
    return x


def make_quadratic(
    n: int, d: int, zeta2: float, stream: np.random.Generator
) -> QuadraticProblem:
    """Draw a problem instance from the given stream.

    The shifts consume exactly n*d normal draws, in node order and then
    coordinate order, so the same stream state always reproduces the same
    instance.  zeta2 = 0 gives b_i = 0 for every node (draws are still
    consumed, keeping downstream stream state independent of zeta2).
    """
    if n < 1:
        raise ValueError(f"need at least one node, got n={n}")
    if d < 1:
        raise ValueError(f"need at least one dimension, got d={d}")
    if zeta2 < 0:
        raise ValueError(f"zeta2 must be >= 0, got {zeta2}")
    normals = stream.standard_normal((n, d))
    sd = np.sqrt(zeta2) / np.arange(1, n + 1, dtype=np.float64)
    b = normals * sd[:, None]
    return QuadraticProblem(n=n, d=d, b=b, zeta2=float(zeta2))


def local_loss(problem: QuadraticProblem, node: int, x: np.ndarray) -> float:
    """f_i(x) = (i^2 / 2n) ||x - b_i||^2."""
    x = _check_point(problem, x)
    diff = x - problem.b[node - 1]
    return 0.5 * problem.curvature(node) * float(diff @ diff)


def global_loss(problem: QuadraticProblem, x: np.ndarray) -> float:
    """Average of the local losses, f(x) = (1/n) sum_i f_i(x)."""
    x = _check_point(problem, x)
    diff = x[None, :] - problem.b
    sq = np.einsum("ij,ij->i", diff, diff)
    scales = np.arange(1, problem.n + 1, dtype=np.float64) ** 2 / problem.n
    return 0.5 * float(scales @ sq) / problem.n


def local_gradient(problem: QuadraticProblem, node: int, x: np.ndarray) -> np.ndarray:
    """Exact gradient (i^2 / n) (x - b_i) of node i at x."""
    x = _check_point(problem, x)
    return problem.curvature(node) * (x - problem.b[node - 1])


def global_gradient(problem: QuadraticProblem, x: np.ndarray) -> np.ndarray:
    """Gradient of the average objective; equals H (x - x*) with scalar H."""
    x = _check_point(problem, x)
    h = mean_curvature(problem)
    return h * (x - optimum(problem))


def mean_curvature(problem: QuadraticProblem) -> float:
    """Average curvature (1/n) sum_i i^2 / n = (n+1)(2n+1) / 6n."""
    n = problem.n
    return (n + 1) * (2 * n + 1) / (6.0 * n)


@dataclass(frozen=True)
class NoiseModel:
    """Isotropic gradient noise with E||eps||^2 = sigma2."""

    sigma2: float

    def __post_init__(self) -> None:
        if self.sigma2 < 0:
            raise ValueError(f"sigma2 must be >= 0, got {self.sigma2}")


def stochastic_gradient(
    problem: QuadraticProblem,
    noise: NoiseModel,
    node: int,
    x: np.ndarray,
    stream: np.random.Generator,
) -> np.ndarray:
    """Local gradient plus a fresh noise vector from the caller's stream.

    Every call consumes exactly d normal draws, also when sigma2 = 0,
    so stream positions never depend on the noise level.
    """
    grad = local_gradient(problem, node, x)
    eps = stream.standard_normal(problem.d)
    return grad + np.sqrt(noise.sigma2 / problem.d) * eps


def optimum(problem: QuadraticProblem) -> np.ndarray:
    """Minimizer of the average objective: sum_i i^2 b_i / sum_i i^2."""
    sq = np.arange(1, problem.n + 1, dtype=np.float64) ** 2
    return (sq @ problem.b) / sq.sum()


def heterogeneity_at(problem: QuadraticProblem, x: np.ndarray) -> float:
    """Exact gradient diversity (1/n) sum_i ||grad f_i(x) - grad f(x)||^2."""
    x = _check_point(problem, x)
    scales = np.arange(1, problem.n + 1, dtype=np.float64) ** 2 / problem.n
    grads = scales[:, None] * (x[None, :] - problem.b)
    mean = grads.mean(axis=0)
    diffs = grads - mean
    return float(np.einsum("ij,ij->", diffs, diffs)) / problem.n
