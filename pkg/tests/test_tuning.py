"""Candidate enumeration, closed-form k rules, and the doubling search."""

import numpy as np
import pytest

from teleportsim.problem import NoiseModel, make_quadratic
from teleportsim.streams import StreamPlan
from teleportsim.tuning import (
    BoundInputs,
    candidate_ks,
    search_k,
    theoretical_k_exp,
    theoretical_k_ring,
)


def bounds(T=1, sigma2=0.0, zeta2=0.0, L=1.0, r0=1.0, n=100):
    return BoundInputs(T=T, sigma2=sigma2, zeta2=zeta2, L=L, r0=r0, n=n)


def test_candidate_examples():
    assert candidate_ks(100) == (1, 2, 4, 8, 16, 32, 100)
    assert candidate_ks(1) == (1,)
    assert candidate_ks(7) == (1, 2, 4, 7)
    assert candidate_ks(2) == (1, 2)
    with pytest.raises(ValueError):
        candidate_ks(0)


def test_candidate_powers_brute_force():
    import math

    for n in range(1, 300):
        got = candidate_ks(n)
        m = math.floor(math.log2(n + 1))
        want = sorted({2 ** j for j in range(m)} | {n})
        assert list(got) == want, n
        assert sum(2 ** j for j in range(m)) <= n


def test_cover_property_small_n_brute_force():
    for n in range(2, 200):
        cands = candidate_ks(n)
        for k_star in range(1, n):
            assert any(k_star / 4 < k <= k_star for k in cands), (n, k_star)


def test_ring_rule_examples():
    # ratio = T(sigma2+zeta2)/(L*r0)
    assert theoretical_k_ring(bounds()) == 1
    assert theoretical_k_ring(bounds(T=128, sigma2=1.0)) == 2  # 2^7 = 128
    assert theoretical_k_ring(bounds(T=129, sigma2=1.0)) == 3
    big = bounds(T=10 ** 14, sigma2=1.0, n=10)
    assert theoretical_k_ring(big) == 10
    assert theoretical_k_ring(bounds(r0=0.0, sigma2=5.0)) == 1


def test_exp_rule_examples():
    assert theoretical_k_exp(bounds()) == 1
    assert theoretical_k_exp(bounds(T=8, sigma2=1.0)) == 2
    assert theoretical_k_exp(bounds(T=1, sigma2=0.5)) == 1  # min(1, 1, 100)
    assert theoretical_k_exp(bounds(T=10 ** 14, sigma2=1.0, n=10)) == 10
    assert theoretical_k_exp(bounds(T=27, sigma2=1.0)) == 3


def test_rules_exact_at_perfect_powers():
    # float rounding must not push ceil(x^(1/q)) off exact integer roots
    for root in (2, 3, 5, 10, 17):
        assert theoretical_k_ring(bounds(T=root ** 7, sigma2=1.0, n=10 ** 9)) == root
        assert theoretical_k_exp(bounds(T=root ** 3, sigma2=1.0, n=10 ** 9)) == root


def test_rules_monotone_and_bounded():
    prev_ring = prev_exp = 0
    for T in (1, 10, 100, 1000, 10 ** 4, 10 ** 6, 10 ** 9):
        b = bounds(T=T, sigma2=2.0, zeta2=1.0, n=64)
        kr, ke = theoretical_k_ring(b), theoretical_k_exp(b)
        assert 1 <= kr <= 64 and 1 <= ke <= 64
        assert kr >= prev_ring and ke >= prev_exp
        prev_ring, prev_exp = kr, ke


def test_bound_inputs_validation():
    with pytest.raises(ValueError):
        BoundInputs(T=0, sigma2=0.0, zeta2=0.0, L=1.0, r0=1.0, n=4)
    with pytest.raises(ValueError):
        BoundInputs(T=1, sigma2=-1.0, zeta2=0.0, L=1.0, r0=1.0, n=4)
    with pytest.raises(ValueError):
        BoundInputs(T=1, sigma2=0.0, zeta2=0.0, L=0.0, r0=1.0, n=4)
    with pytest.raises(ValueError):
        BoundInputs(T=1, sigma2=0.0, zeta2=0.0, L=1.0, r0=-0.1, n=4)


def search_setup(n=16, zeta2=1.0, sigma2=1.0, seed=2):
    plan = StreamPlan(seed)
    problem = make_quadratic(n, 4, zeta2, plan.problem_stream())
    return problem, NoiseModel(sigma2), plan


def test_search_runs_every_candidate_and_is_deterministic():
    problem, noise, plan = search_setup()
    out1 = search_k(problem, noise, "ring", 0.01, 120, plan, np.ones(4))
    out2 = search_k(problem, noise, "ring", 0.01, 120, plan, np.ones(4))
    assert out1.candidates == candidate_ks(16)
    assert set(out1.traces) == set(out1.candidates)
    assert out1.selected_k == out2.selected_k
    assert out1.selected_k in out1.candidates
    for k in out1.candidates:
        assert out1.traces[k].k == k
        assert out1.traces[k].records == 121
        np.testing.assert_array_equal(out1.traces[k].error, out2.traces[k].error)
        assert out1.scores[k] == out2.scores[k]


def test_search_scores_match_trace_statistics():
    problem, noise, plan = search_setup(n=8)
    theory = search_k(problem, noise, "ring", 0.02, 80, plan, np.ones(4))
    for k, trace in theory.traces.items():
        assert theory.scores[k] == pytest.approx(float(trace.grad_norm_sq.mean()))
    final = search_k(
        problem, noise, "ring", 0.02, 80, plan, np.ones(4),
        criterion="min-final-error",
    )
    for k, trace in final.traces.items():
        assert final.scores[k] == pytest.approx(trace.final_error)


def test_search_tie_break_prefers_smallest_k():
    # a zero step size freezes every branch, making all scores equal
    problem, noise, plan = search_setup(n=8, sigma2=0.0, zeta2=0.0)
    out = search_k(problem, noise, "ring", 0.0, 30, plan, np.ones(4))
    scores = set(out.scores.values())
    assert len(scores) == 1
    assert out.selected_k == 1


def test_search_ranks_diverged_branches_last():
    # eta far beyond 2/L blows up every averaging branch; the k=1 walk
    # survives because node 2's step factor 1 - eta*i^2/n is exactly 0
    problem, noise, plan = search_setup(n=8, sigma2=0.0, zeta2=0.0)
    out = search_k(problem, noise, "ring", 2.0, 200, plan, np.ones(4))
    assert any(t.diverged for t in out.traces.values())
    assert not out.traces[out.selected_k].diverged


def test_search_rejects_unknown_criterion():
    problem, noise, plan = search_setup(n=4)
    with pytest.raises(ValueError):
        search_k(
            problem, noise, "ring", 0.01, 10, plan, np.ones(4), criterion="best"
        )
