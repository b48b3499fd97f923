"""Deterministic simulator for decentralized SGD with subset activation.

Each round a small subset of nodes is active; active nodes take local
stochastic gradient steps and average over a compact gossip topology
whose size matches the subset, decoupling the mixing rate from the full
graph.  The package provides the algorithm engines, quadratic benchmark
problems, topology builders, theoretical rate evaluators, the doubling
search over active-node counts, and an experiment harness with a CLI.

Kernels run under numba when available; set TELEPORTSIM_BACKEND=numpy
to force the pure-numpy implementations (same results).
"""

from .algorithms import (
    ActiveAssignment,
    gossip_step,
    run_client_sampling,
    run_dsgd,
    run_teleportation,
    run_teleportation_overlap,
    sample_active_set,
)
from .harness import (
    ETA_GRID,
    ConfigError,
    ExperimentConfig,
    GridOutcome,
    grid_search_eta,
    run_experiment,
    run_k_search,
)
from .metrics import (
    RateEstimate,
    consensus_error,
    error_to_optimum,
    iterations_to_target,
    rate_dsgd,
    rate_teleportation,
)
from .problem import (
    NoiseModel,
    QuadraticProblem,
    global_gradient,
    global_loss,
    heterogeneity_at,
    local_gradient,
    local_loss,
    make_quadratic,
    mean_curvature,
    optimum,
    stochastic_gradient,
)
from .streams import StreamPlan
from .topology import (
    MixingMatrix,
    build_topology,
    is_doubly_stochastic,
    ring_spectral_gap_exact,
    spectral_gap,
)
from .trace import RunTrace
from .tuning import (
    BoundInputs,
    SearchOutcome,
    candidate_ks,
    search_k,
    theoretical_k_exp,
    theoretical_k_ring,
)

__version__ = "0.1.0"

__all__ = [
    "ActiveAssignment",
    "BoundInputs",
    "ConfigError",
    "ETA_GRID",
    "ExperimentConfig",
    "GridOutcome",
    "MixingMatrix",
    "NoiseModel",
    "QuadraticProblem",
    "RateEstimate",
    "RunTrace",
    "SearchOutcome",
    "StreamPlan",
    "build_topology",
    "candidate_ks",
    "consensus_error",
    "error_to_optimum",
    "global_gradient",
    "global_loss",
    "gossip_step",
    "grid_search_eta",
    "heterogeneity_at",
    "is_doubly_stochastic",
    "iterations_to_target",
    "local_gradient",
    "local_loss",
    "make_quadratic",
    "mean_curvature",
    "optimum",
    "rate_dsgd",
    "rate_teleportation",
    "ring_spectral_gap_exact",
    "run_client_sampling",
    "run_dsgd",
    "run_experiment",
    "run_k_search",
    "run_teleportation",
    "run_teleportation_overlap",
    "sample_active_set",
    "search_k",
    "spectral_gap",
    "stochastic_gradient",
    "theoretical_k_exp",
    "theoretical_k_ring",
]
