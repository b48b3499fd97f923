"""Simulation engines.

Four ways to run SGD over the synthetic quadratic:

* run_teleportation: each round activates k of n nodes, assigns them the
  k parameter tokens at random, takes local SGD steps and gossips on the
  small k-node topology.  Only the d x k token matrix is stored; a token
  keeps its column across rounds, which realizes the parameter handoff
  between consecutive hosts implicitly.
* run_teleportation_overlap: same algorithm, but the next round's active
  set is sampled before gossip and the mixed columns are delivered
  straight to their next hosts.  Produces the identical trace for the
  same StreamPlan.
* run_dsgd: classic decentralized SGD, all n nodes step and gossip.
* run_client_sampling: k sampled nodes step; an edge of the full graph
  mixes only when both endpoints were sampled, dropped weight moves to
  the self loop.

All engines record error to optimum, consensus error and the squared
global gradient norm at iteration 0 and after every update, stop early
on divergence (error above 1e12 or non-finite) and, when target_error
is given, on reaching the target.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .problem import NoiseModel, QuadraticProblem, mean_curvature, optimum
from .streams import StreamPlan
from .topology import MixingMatrix
from .trace import RunTrace

DIVERGENCE_THRESHOLD = 1e12
_EMPTY_NOISE = np.empty(0, np.float64)


@dataclass(frozen=True, eq=False)
class ActiveAssignment:
    """Who holds which token in one round.

    node_of_token[m] is the node (numbered 1..n) hosting token m; the
    dict token_of_node inverts it for the active nodes only.
    """

    round: int
    node_of_token: np.ndarray
    token_of_node: dict[int, int]


def sample_active_set(n: int, k: int, round: int, plan: StreamPlan) -> ActiveAssignment:
    """Sample round's active nodes and their token assignment.

    k distinct nodes are drawn uniformly without replacement by partial
    Fisher-Yates from the plan's selection stream, then shuffled into
    token order with the permutation stream.  Pure in (plan, n, k,
    round): the same arguments always give the same assignment, and it
    is exactly the assignment the engines use in that round.
    """
    if not 1 <= k <= n:
        raise ValueError(f"k must be in 1..{n}, got {k}")
    if round < 0:
        raise ValueError(f"round must be >= 0, got {round}")
    kern = _backend.kernels()
    u_sel = plan.selection_stream(k, round).random((1, k))
    u_perm = plan.permutation_stream(k, round).random((1, k))
    hosts = kern.assign_rounds(u_sel, u_perm, n)[0]
    nodes = hosts + 1
    return ActiveAssignment(
        round=round,
        node_of_token=nodes,
        token_of_node={int(v): m for m, v in enumerate(nodes)},
    )


def gossip_step(Z: np.ndarray, mixing: MixingMatrix) -> np.ndarray:
    """One averaging round: column m becomes sum_l W[m, l] Z[:, l].

    Preserves the column mean exactly up to rounding since W is doubly
    stochastic.
    """
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[1] != mixing.k:
        raise ValueError(
            f"parameter matrix must have {mixing.k} columns, got shape {Z.shape}"
        )
    return Z @ mixing.weights.T


def _check_point_vector(d: int, init: np.ndarray) -> np.ndarray:
    init = np.asarray(init, dtype=np.float64)
    if init.shape != (d,):
        raise ValueError(f"init must have shape ({d},), got {init.shape}")
    return init


def _check_run_params(eta: float, T: int, target_error) -> None:
    if not np.isfinite(eta) or eta < 0:
        raise ValueError(f"eta must be finite and >= 0, got {eta}")
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if target_error is not None and target_error <= 0:
        raise ValueError(f"target_error must be positive, got {target_error}")


class _RunState:
    """Shared per-run precomputation and trace assembly."""

    def __init__(self, problem, noise, width, eta, T, plan, init, target_error):
        _check_run_params(eta, T, target_error)
        self.problem = problem
        self.n = problem.n
        self.d = problem.d
        self.width = width
        self.eta = float(eta)
        self.T = int(T)
        self.plan = plan
        self.kern = _backend.kernels()
        self.curv = np.arange(1, self.n + 1, dtype=np.float64) ** 2 / self.n
        self.B = np.ascontiguousarray(problem.b.T)
        self.sd = float(np.sqrt(noise.sigma2 / self.d))
        self.x_star = optimum(problem)
        self.h_mean = mean_curvature(problem)
        self.target = -1.0 if target_error is None else float(target_error)
        init = _check_point_vector(self.d, init)
        self.Z = np.ascontiguousarray(np.repeat(init[:, None], width, axis=1))
        self.err = np.empty(self.T + 1)
        self.cons = np.empty(self.T + 1)
        self.gnorm = np.empty(self.T + 1)
        e, c, g = self.kern.column_metrics(self.Z, self.x_star, self.h_mean)
        self.err[0], self.cons[0], self.gnorm[0] = e, c, g
        self.initial_status = self.kern._check_row(e, c, g, self.target)

    def node_generators(self):
        if self.sd == 0.0:
            return None
        return [self.plan.noise_stream(i) for i in range(1, self.n + 1)]

    def pack_noise(self, gens, hosts):
        """Per-node noise for every activation in hosts, packed densely.

        Node i's draws sit in buf[cursor[i]:...] in round order, pulled
        from its own stream, so consumption never depends on chunking.
        """
        if gens is None:
            return _EMPTY_NOISE, np.zeros(self.n, np.int64)
        counts = np.bincount(hosts.ravel(), minlength=self.n)
        offsets = np.zeros(self.n + 1, np.int64)
        np.cumsum(counts * self.d, out=offsets[1:])
        buf = np.empty(offsets[-1], np.float64)
        for i in range(self.n):
            if counts[i]:
                gens[i].standard_normal(out=buf[offsets[i] : offsets[i + 1]])
        return buf, offsets[: self.n].copy()

    def finish(self, algorithm, topology_name, k, done, status, extras=None):
        m = done + 1
        return RunTrace(
            algorithm=algorithm,
            topology=topology_name,
            n=self.n,
            k=k,
            eta=self.eta,
            seed=self.plan.master_seed,
            iterations=np.arange(m, dtype=np.int64),
            error=self.err[:m].copy(),
            consensus_error=self.cons[:m].copy(),
            grad_norm_sq=self.gnorm[:m].copy(),
            final_params=self.Z.copy(),
            diverged=status == 2,
            extras=extras or {},
        )


def run_teleportation(
    problem: QuadraticProblem,
    noise: NoiseModel,
    mixing: MixingMatrix,
    eta: float,
    T: int,
    plan: StreamPlan,
    init: np.ndarray,
    *,
    target_error: float | None = None,
    chunk_size: int = 512,
) -> RunTrace:
    """Run k-of-n subset activation with token gossip for T iterations."""
    k = mixing.k
    if not 1 <= k <= problem.n:
        raise ValueError(
            f"mixing matrix size {k} must be in 1..{problem.n} (the node count)"
        )
    st = _RunState(problem, noise, k, eta, T, plan, init, target_error)
    WT = np.ascontiguousarray(mixing.weights.T)
    status, done = st.initial_status, 0
    if status == 0:
        sel = plan.selection_stream(k)
        perm = plan.permutation_stream(k)
        gens = st.node_generators()
        while done < st.T:
            C = min(chunk_size, st.T - done)
            u_sel = sel.random((C, k))
            u_perm = perm.random((C, k))
            hosts = st.kern.assign_rounds(u_sel, u_perm, problem.n)
            buf, cursor = st.pack_noise(gens, hosts)
            status, c_done = st.kern.teleport_rounds(
                st.Z, WT, st.curv, st.B, st.sd, buf, cursor, hosts,
                st.eta, st.x_star, st.h_mean,
                st.err, st.cons, st.gnorm, done + 1, st.target,
            )
            done += c_done
            if status != 0:
                break
    return st.finish("teleport", mixing.family, k, done, status)


def run_teleportation_overlap(
    problem: QuadraticProblem,
    noise: NoiseModel,
    mixing: MixingMatrix,
    eta: float,
    T: int,
    plan: StreamPlan,
    init: np.ndarray,
    *,
    target_error: float | None = None,
    chunk_size: int = 512,
) -> RunTrace:
    """Subset activation with the communication-overlap schedule.

    Round t samples the active set of round t + 1 before gossiping and
    delivers the mixed columns directly to those next hosts.  Bitwise
    the same trace as run_teleportation for equal arguments; one extra
    assignment (for the round after the last) is sampled and unused.
    """
    k = mixing.k
    if not 1 <= k <= problem.n:
        raise ValueError(
            f"mixing matrix size {k} must be in 1..{problem.n} (the node count)"
        )
    st = _RunState(problem, noise, k, eta, T, plan, init, target_error)
    WT = np.ascontiguousarray(mixing.weights.T)
    status, done = st.initial_status, 0
    if status == 0:
        sel = plan.selection_stream(k)
        perm = plan.permutation_stream(k)
        gens = st.node_generators()
        hosts_cur = st.kern.assign_rounds(
            sel.random((1, k)), perm.random((1, k)), problem.n
        )[0].copy()
        while done < st.T:
            C = min(chunk_size, st.T - done)
            u_sel = sel.random((C, k))
            u_perm = perm.random((C, k))
            next_hosts = st.kern.assign_rounds(u_sel, u_perm, problem.n)
            grad_hosts = np.vstack((hosts_cur[None, :], next_hosts[:-1]))
            buf, cursor = st.pack_noise(gens, grad_hosts)
            status, c_done = st.kern.teleport_overlap_rounds(
                st.Z, WT, st.curv, st.B, st.sd, buf, cursor, hosts_cur,
                next_hosts, st.eta, st.x_star, st.h_mean,
                st.err, st.cons, st.gnorm, done + 1, st.target,
            )
            done += c_done
            if status != 0:
                break
    return st.finish("teleport-overlap", mixing.family, k, done, status)


def run_dsgd(
    problem: QuadraticProblem,
    noise: NoiseModel,
    mixing: MixingMatrix,
    eta: float,
    T: int,
    plan: StreamPlan,
    init: np.ndarray,
    *,
    target_error: float | None = None,
    chunk_size: int = 512,
) -> RunTrace:
    """Full-participation decentralized SGD on the n-node graph."""
    n = problem.n
    if mixing.k != n:
        raise ValueError(
            f"mixing matrix covers {mixing.k} nodes but the problem has {n}"
        )
    st = _RunState(problem, noise, n, eta, T, plan, init, target_error)
    WT = np.ascontiguousarray(mixing.weights.T)
    status, done = st.initial_status, 0
    if status == 0:
        gens = st.node_generators()
        noise3 = (
            np.empty((n, min(chunk_size, st.T), st.d))
            if gens is not None
            else np.zeros((n, 1, st.d))
        )
        while done < st.T:
            C = min(chunk_size, st.T - done)
            if gens is not None:
                for i in range(n):
                    gens[i].standard_normal(out=noise3[i, :C].reshape(-1))
            status, c_done = st.kern.dsgd_rounds(
                st.Z, WT, st.curv, st.B, st.sd, noise3[:, :C, :],
                st.eta, st.x_star, st.h_mean,
                st.err, st.cons, st.gnorm, done + 1, st.target, C,
            )
            done += c_done
            if status != 0:
                break
    return st.finish("dsgd", mixing.family, n, done, status)


def run_client_sampling(
    problem: QuadraticProblem,
    noise: NoiseModel,
    mixing: MixingMatrix,
    k: int,
    eta: float,
    T: int,
    plan: StreamPlan,
    init: np.ndarray,
    *,
    target_error: float | None = None,
    chunk_size: int = 512,
) -> RunTrace:
    """Client-sampling baseline on the full n-node graph.

    Each round k nodes are sampled (same streams as the token engines);
    only they take SGD steps, and only edges with both endpoints sampled
    mix.  Requires a symmetric mixing matrix, otherwise moving dropped
    weight to the self loop would break column stochasticity.  With
    k = n every round keeps the whole matrix and the run equals run_dsgd
    bit for bit.
    """
    n = problem.n
    if mixing.k != n:
        raise ValueError(
            f"mixing matrix covers {mixing.k} nodes but the problem has {n}"
        )
    if not 1 <= k <= n:
        raise ValueError(f"k must be in 1..{n}, got {k}")
    if not np.array_equal(mixing.weights, mixing.weights.T):
        raise ValueError("client sampling needs a symmetric mixing matrix")
    st = _RunState(problem, noise, n, eta, T, plan, init, target_error)
    W = np.ascontiguousarray(mixing.weights)
    status, done = st.initial_status, 0
    if status == 0:
        sel = plan.selection_stream(k)
        perm = plan.permutation_stream(k)
        gens = st.node_generators()
        while done < st.T:
            C = min(chunk_size, st.T - done)
            u_sel = sel.random((C, k))
            u_perm = perm.random((C, k))
            hosts = st.kern.assign_rounds(u_sel, u_perm, n)
            buf, cursor = st.pack_noise(gens, hosts)
            status, c_done = st.kern.client_rounds(
                st.Z, W, st.curv, st.B, st.sd, buf, cursor, hosts,
                st.eta, st.x_star, st.h_mean,
                st.err, st.cons, st.gnorm, done + 1, st.target,
            )
            done += c_done
            if status != 0:
                break
    return st.finish("client-sampling", mixing.family, k, done, status)
