"""Acceptance gate: the nine headline guarantees, one pass/fail line each.

Criterion 1 re-runs the n=100 ring benchmark at desk scale and is the slow
part of the suite (a few minutes); everything else is seconds.  The
benchmark protocol is conservative: when the baseline never reaches the
target within its probe horizon, it is credited with exactly that horizon
(a proven lower bound on its true iteration count), and the subset engine
still has to win against it.
"""

import math
import time

import numpy as np
import pytest

from teleportsim._backend import kernels
from teleportsim.algorithms import (
    gossip_step,
    run_client_sampling,
    run_dsgd,
    run_teleportation,
    run_teleportation_overlap,
    sample_active_set,
)
from teleportsim.harness import ETA_GRID
from teleportsim.metrics import iterations_to_target
from teleportsim.problem import (
    NoiseModel,
    global_gradient,
    local_gradient,
    local_loss,
    make_quadratic,
    mean_curvature,
    optimum,
)
from teleportsim.streams import StreamPlan
from teleportsim.topology import build_topology
from teleportsim.tuning import BoundInputs, candidate_ks, search_k
from teleportsim.tuning import theoretical_k_exp, theoretical_k_ring

N, D = 100, 50
SEED = 0
TARGET = 1e-3
DSGD_HORIZON = 30_000
TELEPORT_HORIZON = 200_000
SELECT_HORIZON = 5_000
NOISE_LEVELS = (0.0, 10.0, 100.0)


def report(num, detail):
    print(f"[criterion {num}] PASS - {detail}")


def _fresh(zeta2):
    plan = StreamPlan(SEED)
    problem = make_quadratic(N, D, zeta2, plan.problem_stream())
    return plan, problem, np.ones(D)


def _dsgd_best(sigma2, zeta2, ring_n):
    """Exact best iterations-to-target over the step grid, or None.

    Runs are capped at the best count found so far: a run that cannot
    reach the target within the current best cannot improve it, so the
    minimum over the grid is computed exactly.
    """
    noise = NoiseModel(sigma2)
    best = None
    for eta in sorted(ETA_GRID, reverse=True):
        cap = DSGD_HORIZON if best is None else min(DSGD_HORIZON, best)
        plan, problem, init = _fresh(zeta2)
        res = run_dsgd(problem, noise, ring_n, eta, cap, plan, init,
                       target_error=TARGET)
        hit = iterations_to_target(res, TARGET)
        if hit is not None and (best is None or hit < best):
            best = hit
    return best


def _teleport_best(sigma2, zeta2):
    """Best (iterations, eta, selected k) with the width chosen per step
    size by the doubling search under the mean-gradient-norm criterion."""
    noise = NoiseModel(sigma2)
    best = None
    for eta in sorted(ETA_GRID):
        plan, problem, init = _fresh(zeta2)
        chosen = search_k(
            problem, noise, "ring", eta, SELECT_HORIZON, plan, init,
            criterion="min-mean-grad-norm",
        ).selected_k
        cap = TELEPORT_HORIZON if best is None else min(TELEPORT_HORIZON, best[0])
        plan, problem, init = _fresh(zeta2)
        res = run_teleportation(
            problem, noise, build_topology("ring", chosen), eta, cap, plan,
            init, target_error=TARGET,
        )
        hit = iterations_to_target(res, TARGET)
        if hit is not None and (best is None or hit < best[0]):
            best = (hit, eta, chosen)
    return best


@pytest.fixture(scope="module")
def ring_benchmark():
    ring_n = build_topology("ring", N)
    cells = {}
    for sigma2 in NOISE_LEVELS:
        for zeta2 in NOISE_LEVELS:
            cells[(sigma2, zeta2)] = {
                "dsgd": _dsgd_best(sigma2, zeta2, ring_n),
                "teleport": _teleport_best(sigma2, zeta2),
            }
    return cells


def test_criterion_1_subset_activation_beats_full_gossip(ring_benchmark):
    details = []
    for (sigma2, zeta2), res in sorted(ring_benchmark.items()):
        assert res["teleport"] is not None, (sigma2, zeta2)
        t_iters = res["teleport"][0]
        d_iters = res["dsgd"] if res["dsgd"] is not None else DSGD_HORIZON
        assert t_iters <= d_iters, (sigma2, zeta2, t_iters, d_iters)
        mark = "" if res["dsgd"] is not None else ">="
        details.append(f"({sigma2:g},{zeta2:g}): {t_iters} vs {mark}{d_iters}")
    hard = ring_benchmark[(100.0, 100.0)]
    hard_d = hard["dsgd"] if hard["dsgd"] is not None else DSGD_HORIZON
    assert 5 * hard["teleport"][0] <= hard_d
    report(1, "iterations to 1e-3, subset vs full-ring: " + "; ".join(details)
           + f"; hardest cell speedup >= {hard_d / hard['teleport'][0]:.1f}x")


def test_criterion_2_selected_widths_stay_small(ring_benchmark):
    noisy = ring_benchmark[(100.0, 0.0)]["teleport"][2]
    assert noisy in (4, 8, 16, 32), noisy
    for cell, res in ring_benchmark.items():
        assert res["teleport"][2] < N, (cell, res["teleport"])
    report(2, f"width at (sigma2=100, zeta2=0) is {noisy}; all cells < {N}")


def test_criterion_3_candidate_set_covers_every_width():
    start = time.perf_counter()
    for n in range(2, 10_001):
        ks = np.asarray(candidate_ks(n))
        assert ks[-1] == n
        assert int(ks[:-1].sum()) <= n  # the power-of-two prefix
        kstar = np.arange(1, n)
        idx = np.searchsorted(ks, kstar, side="right") - 1
        below = ks[idx]
        assert np.all(below <= kstar)
        assert np.all(4 * below > kstar)
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0, elapsed
    report(3, f"n = 2..10000 exhaustive, every k* < n within a 4x step "
              f"({elapsed:.2f}s)")


def test_criterion_4_gossip_contracts_at_the_stated_gap():
    start = time.perf_counter()
    rng = np.random.default_rng(77)
    checked = 0
    for family in ("ring", "complete", "exponential", "torus"):
        for k in range(1, 33):
            try:
                mix = build_topology(family, k)
            except ValueError:
                continue
            block = rng.standard_normal((100 * 5, k))
            mixed = gossip_step(block, mix)
            for mat, out in zip(block.reshape(100, 5, k),
                                mixed.reshape(100, 5, k)):
                before = mat - mat.mean(axis=1, keepdims=True)
                after = out - out.mean(axis=1, keepdims=True)
                lhs = float(np.sum(after * after))
                rhs = (1.0 - mix.p + 1e-9) * float(np.sum(before * before))
                assert lhs <= rhs, (family, k)
                checked += 1
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0, elapsed
    report(4, f"{checked} random matrices across all families, "
              f"disagreement shrank by at least (1 - p) ({elapsed:.2f}s)")


def test_criterion_5_lookahead_schedule_is_bit_identical():
    start = time.perf_counter()
    rng = np.random.default_rng(2026)
    families = ("ring", "complete", "exponential", "torus")
    for case in range(50):
        k = int(rng.integers(1, 9))
        valid = [f for f in families
                 if f != "torus" or math.isqrt(k) ** 2 == k]
        family = valid[int(rng.integers(len(valid)))]
        n = int(rng.integers(k, 21))
        sigma2 = float(rng.uniform(0.0, 10.0))
        zeta2 = float(rng.uniform(0.0, 10.0))
        eta = float(10.0 ** rng.uniform(-4.0, -2.0))
        seed = int(rng.integers(0, 2**32))
        mix = build_topology(family, k)
        runs = []
        for engine in (run_teleportation, run_teleportation_overlap):
            plan = StreamPlan(seed)
            problem = make_quadratic(n, 4, zeta2, plan.problem_stream())
            runs.append(engine(problem, NoiseModel(sigma2), mix, eta, 100,
                               plan, np.ones(4)))
        a, b = runs
        assert np.array_equal(a.final_params, b.final_params), case
        assert np.array_equal(a.error, b.error), case
        assert np.array_equal(a.consensus_error, b.consensus_error), case
        assert np.array_equal(a.grad_norm_sq, b.grad_norm_sq), case
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0, elapsed
    report(5, f"50 random configurations, plain and lookahead schedules "
              f"agree bit for bit ({elapsed:.2f}s)")


def test_criterion_6_single_token_and_full_participation_reductions():
    # single token: the engine must reproduce a hand-rolled random-walk
    # SGD loop exactly (same streams, same update, same 1x1 gossip)
    plan = StreamPlan(9)
    problem = make_quadratic(7, 5, 3.0, plan.problem_stream())
    noise = NoiseModel(2.0)
    sd = math.sqrt(noise.sigma2 / problem.d)
    gens = [plan.noise_stream(i) for i in range(1, problem.n + 1)]
    x = np.ones(problem.d)
    for t in range(300):
        host = int(sample_active_set(problem.n, 1, t, plan).node_of_token[0])
        g = local_gradient(problem, host, x)
        g = g + sd * gens[host - 1].standard_normal(problem.d)
        y = x - 0.01 * g
        x = np.dot(y[:, None], np.ones((1, 1)))[:, 0]
    run = run_teleportation(problem, noise, build_topology("ring", 1), 0.01,
                            300, plan, np.ones(problem.d))
    assert np.array_equal(run.final_params[:, 0], x)

    # full participation on the uniform matrix with no randomness left is
    # plain gradient descent on the average objective
    plan = StreamPlan(2)
    problem = make_quadratic(8, 5, 0.0, plan.problem_stream())
    h = mean_curvature(problem)
    eta, T = 0.05, 1000
    run = run_teleportation(problem, NoiseModel(0.0),
                            build_topology("complete", 8), eta, T, plan,
                            np.ones(5))
    steps = (1.0 - eta * h) ** np.arange(T + 1)
    np.testing.assert_allclose(run.final_params[:, 0], steps[-1], rtol=1e-10)
    np.testing.assert_allclose(run.error, problem.d * steps**2, rtol=1e-10)
    assert np.max(run.consensus_error) <= 1e-24
    report(6, "single-token run equals the random-walk oracle bitwise; "
              "full participation tracks closed-form descent at 1e-10")


def test_criterion_7_closed_form_width_rules():
    def bounds(T, sigma2, zeta2, n=1_000_000):
        return BoundInputs(T=T, sigma2=sigma2, zeta2=zeta2, L=1.0, r0=1.0, n=n)

    assert theoretical_k_ring(bounds(128, 1.0, 0.0)) == 2
    assert theoretical_k_exp(bounds(8, 1.0, 0.0)) == 2
    assert theoretical_k_ring(bounds(1000, 0.0, 0.0)) == 1
    assert theoretical_k_exp(bounds(1000, 0.0, 0.0)) == 1
    assert theoretical_k_ring(bounds(10**12, 100.0, 100.0, n=64)) == 64
    assert theoretical_k_exp(bounds(10**12, 100.0, 100.0, n=64)) == 64
    report(7, "ring(ratio=128)=2, exp(ratio=8)=2, zero spread gives 1, "
              "huge ratios clamp to n")


def test_criterion_8_optimum_and_gradient_oracles():
    rng = np.random.default_rng(31)
    worst_grad = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 61))
        d = int(rng.integers(1, 9))
        zeta2 = float(rng.uniform(0.0, 100.0))
        problem = make_quadratic(n, d, zeta2, StreamPlan(int(rng.integers(1000))).problem_stream())
        x_star = optimum(problem)
        worst_grad = max(worst_grad, float(np.linalg.norm(global_gradient(problem, x_star))))
        assert worst_grad <= 1e-10
        x = rng.standard_normal(d)
        node = int(rng.integers(1, n + 1))
        eps = 1e-6
        fd = np.empty(d)
        for j in range(d):
            e = np.zeros(d)
            e[j] = eps
            fd[j] = (local_loss(problem, node, x + e)
                     - local_loss(problem, node, x - e)) / (2 * eps)
        np.testing.assert_allclose(local_gradient(problem, node, x), fd,
                                   rtol=1e-6, atol=1e-8)
    report(8, f"20 instances: |grad at optimum| <= {worst_grad:.2e}, "
              "finite differences agree at 1e-6")


def test_criterion_9_client_sampling_statistics():
    n = 20
    plan = StreamPlan(4)
    problem = make_quadratic(n, 5, 2.0, plan.problem_stream())
    mix = build_topology("ring", n)
    full = run_client_sampling(problem, NoiseModel(1.0), mix, n, 0.01, 150,
                               StreamPlan(4), np.ones(5))
    base = run_dsgd(problem, NoiseModel(1.0), mix, 0.01, 150,
                    StreamPlan(4), np.ones(5))
    assert np.array_equal(full.final_params, base.final_params)
    assert np.array_equal(full.error, base.error)

    k, rounds = 6, 100_000
    plan = StreamPlan(11)
    sel = plan.selection_stream(1)
    perm = plan.permutation_stream(1)
    hosts = kernels().assign_rounds(
        sel.random((rounds, k)), perm.random((rounds, k)), n
    )
    active = np.zeros((rounds, n), dtype=bool)
    active[np.arange(rounds)[:, None], hosts] = True
    freq = float(np.mean(active[:, 0] & active[:, 1]))
    expected = k * (k - 1) / (n * (n - 1))
    se = math.sqrt(expected * (1.0 - expected) / rounds)
    assert abs(freq - expected) <= 3.0 * se, (freq, expected, se)
    report(9, f"full-participation run equals the dense baseline bitwise; "
              f"edge frequency {freq:.5f} vs {expected:.5f} "
              f"(|dev| = {abs(freq - expected) / se:.2f} SE)")
