"""JIT and pure-numpy kernels must drive identical simulations."""

import numpy as np
import pytest

from teleportsim._backend import active_backend, kernels, numba_available
from teleportsim.algorithms import (
    run_client_sampling,
    run_dsgd,
    run_teleportation,
    run_teleportation_overlap,
)
from teleportsim.problem import NoiseModel, make_quadratic
from teleportsim.streams import StreamPlan
from teleportsim.topology import build_topology

needs_numba = pytest.mark.skipif(
    not numba_available(), reason="numba not importable"
)


def run_all_engines(backend, monkeypatch):
    monkeypatch.setenv("TELEPORTSIM_BACKEND", backend)
    out = {}
    n, d, T = 12, 5, 120
    problem = make_quadratic(n, d, 4.0, StreamPlan(11).problem_stream())
    noise = NoiseModel(2.0)
    init = np.ones(d)

    W4 = build_topology("ring", 4)
    res = run_teleportation(problem, noise, W4, 0.01, T, StreamPlan(3), init)
    out["teleport"] = (res.final_params, res.error, res.grad_norm_sq)

    res = run_teleportation_overlap(
        problem, noise, W4, 0.01, T, StreamPlan(3), init
    )
    out["overlap"] = (res.final_params, res.error, res.grad_norm_sq)

    Wn = build_topology("ring", n)
    res = run_dsgd(problem, noise, Wn, 0.01, T, StreamPlan(3), init)
    out["dsgd"] = (res.final_params, res.error, res.grad_norm_sq)

    res = run_client_sampling(
        problem, noise, Wn, 5, 0.01, T, StreamPlan(3), init
    )
    out["client"] = (res.final_params, res.error, res.grad_norm_sq)
    return out


def test_backend_env_var_controls_selection(monkeypatch):
    monkeypatch.setenv("TELEPORTSIM_BACKEND", "numpy")
    assert active_backend() == "numpy"
    assert kernels().__name__.endswith("_kernels_numpy")
    monkeypatch.setenv("TELEPORTSIM_BACKEND", "auto")
    assert active_backend() in ("numba", "numpy")
    monkeypatch.delenv("TELEPORTSIM_BACKEND")
    assert active_backend() in ("numba", "numpy")
    monkeypatch.setenv("TELEPORTSIM_BACKEND", "fortran")
    with pytest.raises(ValueError):
        active_backend()


@needs_numba
def test_numba_is_the_default_here(monkeypatch):
    monkeypatch.delenv("TELEPORTSIM_BACKEND", raising=False)
    assert active_backend() == "numba"
    assert kernels().__name__.endswith("_kernels_numba")


@needs_numba
def test_all_engines_bitwise_equal_across_backends(monkeypatch):
    a = run_all_engines("numba", monkeypatch)
    b = run_all_engines("numpy", monkeypatch)
    assert a.keys() == b.keys()
    for name in a:
        params_a, err_a, g_a = a[name]
        params_b, err_b, g_b = b[name]
        assert np.array_equal(params_a, params_b), name
        # metric reductions may differ in the last float ulp
        np.testing.assert_allclose(err_a, err_b, rtol=1e-12, err_msg=name)
        np.testing.assert_allclose(g_a, g_b, rtol=1e-12, err_msg=name)


def test_numpy_backend_runs_standalone(monkeypatch):
    out = run_all_engines("numpy", monkeypatch)
    for name, (params, err, _) in out.items():
        assert np.all(np.isfinite(params)), name
        assert err[-1] < err[0], name


def test_kernel_modules_expose_same_surface():
    np_mod = kernels("numpy")
    names = {
        "assign_rounds", "teleport_rounds", "dsgd_rounds", "client_rounds",
    }
    assert names <= set(dir(np_mod))
    if numba_available():
        nb_mod = kernels("numba")
        assert names <= set(dir(nb_mod))
