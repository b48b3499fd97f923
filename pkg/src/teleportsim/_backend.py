"""Kernel backend selection.

The simulation loops exist twice: JIT-compiled (numba) and vectorized
numpy.  TELEPORTSIM_BACKEND picks one ("numba", "numpy", or "auto");
unset or "auto" means numba when importable, numpy otherwise.  The flag
is read on every kernel lookup so tests can flip it at runtime.
"""

from __future__ import annotations

import os

_ENV_VAR = "TELEPORTSIM_BACKEND"
_modules: dict[str, object] = {}
_numba_works: bool | None = None


def numba_available() -> bool:
    global _numba_works
    if _numba_works is None:
        try:
            import numba  # noqa: F401

            _numba_works = True
        except ImportError:
            _numba_works = False
    return _numba_works


def active_backend() -> str:
    """Name of the backend the next kernel call will use."""
    raw = os.environ.get(_ENV_VAR, "auto").strip().lower() or "auto"
    if raw == "auto":
        return "numba" if numba_available() else "numpy"
    if raw == "numpy":
        return "numpy"
    if raw == "numba":
        if not numba_available():
            raise RuntimeError(
                f"{_ENV_VAR}=numba requested but numba is not importable"
            )
        return "numba"
    raise ValueError(
        f"{_ENV_VAR} must be 'numba', 'numpy' or 'auto', got {raw!r}"
    )


def kernels(name: str | None = None):
    """Kernel module for the given backend (default: active one)."""
    name = name or active_backend()
    mod = _modules.get(name)
    if mod is None:
        if name == "numba":
            from . import _kernels_numba as mod
        elif name == "numpy":
            from . import _kernels_numpy as mod
        else:
            raise ValueError(f"unknown backend {name!r}")
        _modules[name] = mod
    return mod
