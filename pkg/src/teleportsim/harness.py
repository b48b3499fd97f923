"""Experiment harness: configuration, step-size grids, CSV artifacts.

Runs start from the all-ones initial point.  Artifacts per experiment:

* one trace CSV per (eta, k, seed) with columns
  iteration,error,consensus_error,grad_norm_sq
* one summary CSV with columns
  algorithm,topology,n,k,eta,seed,iters_to_target,final_error
  (k-search summaries carry an extra selected_k column).

A full run writes T + 1 trace rows; a diverged run is truncated at the
first bad iteration.  Grid runs additionally stop once the target error
is reached, since only the crossing iteration matters there.  Identical
configurations and seeds reproduce artifacts byte for byte (for a fixed
kernel backend).

Exit codes: 0 done, 1 bad configuration, 2 no feasible step size.
An unreachable target by itself is an empty summary cell, not an error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .algorithms import (
    run_client_sampling,
    run_dsgd,
    run_teleportation,
    run_teleportation_overlap,
)
from .metrics import iterations_to_target, rate_dsgd, rate_teleportation
from .problem import NoiseModel, global_loss, make_quadratic, optimum
from .streams import StreamPlan
from .topology import build_topology, ring_spectral_gap_exact, spectral_gap
from .trace import RunTrace
from .tuning import BoundInputs, candidate_ks, search_k

ETA_GRID = (
    0.1, 0.075, 0.05, 0.025, 0.01, 0.0075, 0.005, 0.0025,
    0.001, 0.00075, 0.0005, 0.00025, 0.0001,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NO_FEASIBLE_ETA = 2

ALGORITHMS = ("dsgd", "teleport", "teleport-overlap", "client-sampling", "search-k")
TOPOLOGIES = ("ring", "complete", "exponential", "torus")

TRACE_HEADER = "iteration,error,consensus_error,grad_norm_sq"
SUMMARY_HEADER = "algorithm,topology,n,k,eta,seed,iters_to_target,final_error"


class ConfigError(ValueError):
    """Invalid experiment configuration (maps to exit code 1)."""


@dataclass
class ExperimentConfig:
    algorithm: str = "teleport"
    n: int = 100
    d: int = 50
    k: int | None = None
    topology: str = "ring"
    sigma2: float = 0.0
    zeta2: float = 0.0
    eta: float | str = "grid"
    T: int = 1000
    seed: int = 0
    seeds: int = 1
    target_error: float | None = None
    criterion: str = "min-mean-grad-norm"
    out_dir: str = "."

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(
                f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}"
            )
        if self.topology not in TOPOLOGIES:
            raise ConfigError(
                f"topology must be one of {TOPOLOGIES}, got {self.topology!r}"
            )
        if self.n < 1 or self.d < 1:
            raise ConfigError(f"n and d must be >= 1, got n={self.n} d={self.d}")
        if self.T < 1:
            raise ConfigError(f"T must be >= 1, got {self.T}")
        if self.seed < 0 or self.seeds < 1:
            raise ConfigError(
                f"need seed >= 0 and seeds >= 1, got seed={self.seed} seeds={self.seeds}"
            )
        if self.sigma2 < 0 or self.zeta2 < 0:
            raise ConfigError("sigma2 and zeta2 must be >= 0")
        if self.algorithm in ("teleport", "teleport-overlap", "client-sampling"):
            if self.k is None:
                raise ConfigError(f"{self.algorithm} needs k (active nodes per round)")
            if not 1 <= self.k <= self.n:
                raise ConfigError(f"k must be in 1..{self.n}, got {self.k}")
        elif self.algorithm == "dsgd" and self.k is not None and self.k != self.n:
            raise ConfigError("dsgd runs all n nodes; drop k or set it to n")
        if self.criterion not in ("min-mean-grad-norm", "min-final-error"):
            raise ConfigError(
                "criterion must be min-mean-grad-norm or min-final-error, "
                f"got {self.criterion!r}"
            )
        if isinstance(self.eta, str):
            if self.eta != "grid":
                raise ConfigError(f"eta must be a number or 'grid', got {self.eta!r}")
        elif not (math.isfinite(self.eta) and self.eta > 0):
            raise ConfigError(f"eta must be positive and finite, got {self.eta}")
        if self.target_error is not None and self.target_error <= 0:
            raise ConfigError(
                f"target_error must be positive, got {self.target_error}"
            )

    def etas(self) -> tuple[float, ...]:
        return ETA_GRID if self.eta == "grid" else (float(self.eta),)


_INT_FIELDS = {"n", "d", "T", "seed", "seeds"}
_FLOAT_FIELDS = {"sigma2", "zeta2"}
_FIELD_NAMES = {f.name for f in fields(ExperimentConfig)}


def parse_config_file(path: str | Path) -> dict:
    """Flat key = value lines mirroring ExperimentConfig field names."""
    values: dict = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in _FIELD_NAMES:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _coerce_field(key, val)
    return values


def _coerce_field(key: str, val: str):
    try:
        if key in _INT_FIELDS:
            return int(val)
        if key in _FLOAT_FIELDS:
            return float(val)
        if key == "k":
            return None if val.lower() == "none" else int(val)
        if key == "target_error":
            return None if val.lower() == "none" else float(val)
        if key == "eta":
            return "grid" if val == "grid" else float(val)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {val!r}") from exc
    return val


def _fmt(x: float) -> str:
    return repr(float(x))


def write_trace_csv(path: Path, trace: RunTrace) -> None:
    lines = [TRACE_HEADER]
    it, err = trace.iterations, trace.error
    cons, gn = trace.consensus_error, trace.grad_norm_sq
    for i in range(trace.records):
        lines.append(
            f"{it[i]},{_fmt(err[i])},{_fmt(cons[i])},{_fmt(gn[i])}"
        )
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _summary_line(trace: RunTrace, iters: int | None, extra: str = "") -> str:
    cell = "" if iters is None else str(iters)
    line = (
        f"{trace.algorithm},{trace.topology},{trace.n},{trace.k},"
        f"{_fmt(trace.eta)},{trace.seed},{cell},{_fmt(trace.final_error)}"
    )
    return line + extra


def trace_filename(trace: RunTrace) -> str:
    return (
        f"trace_{trace.algorithm}_{trace.topology}_n{trace.n}_k{trace.k}"
        f"_eta{_fmt(trace.eta)}_seed{trace.seed}.csv"
    )


@dataclass
class GridCell:
    """Outcome of one step size in a grid search."""

    eta: float
    iters_to_target: int | None
    final_error: float
    diverged: bool
    records: int


@dataclass
class GridOutcome:
    cells: list[GridCell]
    best_eta: float | None
    feasible: bool


def _cell_rank(cell: GridCell) -> tuple:
    if cell.iters_to_target is not None:
        return (0, cell.iters_to_target, cell.eta)
    if not cell.diverged:
        return (1, cell.final_error, cell.eta)
    return (2, math.inf, cell.eta)


def grid_search_eta(
    config: ExperimentConfig,
    etas: Sequence[float] = ETA_GRID,
    on_trace: Callable[[RunTrace], None] | None = None,
) -> GridOutcome:
    """Run the config once per step size and rank the outcomes.

    Ranking: fewest iterations to target first, then non-diverged runs
    by final error, diverged runs last; ties go to the smaller eta.
    Runs stop early at the target since later iterations cannot change
    the crossing point.  Traces are handed to on_trace one at a time and
    then dropped, so grids over long horizons stay in bounded memory.
    The search is infeasible only when every step size diverged.
    """
    config.validate()
    cells = []
    for eta in etas:
        trace = _single_run(replace(config, eta=float(eta)), config.seed, stop_at_target=True)
        iters = (
            iterations_to_target(trace, config.target_error)
            if config.target_error is not None
            else None
        )
        cells.append(
            GridCell(
                eta=float(eta),
                iters_to_target=iters,
                final_error=trace.final_error,
                diverged=trace.diverged,
                records=trace.records,
            )
        )
        if on_trace is not None:
            on_trace(trace)
    best = min(cells, key=_cell_rank)
    feasible = _cell_rank(best)[0] < 2
    return GridOutcome(
        cells=cells, best_eta=best.eta if feasible else None, feasible=feasible
    )


def _single_run(
    config: ExperimentConfig, seed: int, stop_at_target: bool
) -> RunTrace:
    plan = StreamPlan(seed)
    problem = make_quadratic(config.n, config.d, config.zeta2, plan.problem_stream())
    noise = NoiseModel(config.sigma2)
    init = np.ones(config.d)
    eta = float(config.eta)
    target = config.target_error if stop_at_target else None
    if config.algorithm == "dsgd":
        mixing = build_topology(config.topology, config.n)
        return run_dsgd(
            problem, noise, mixing, eta, config.T, plan, init, target_error=target
        )
    if config.algorithm == "client-sampling":
        mixing = build_topology(config.topology, config.n)
        return run_client_sampling(
            problem, noise, mixing, config.k, eta, config.T, plan, init,
            target_error=target,
        )
    mixing = build_topology(config.topology, config.k)
    engine = (
        run_teleportation_overlap
        if config.algorithm == "teleport-overlap"
        else run_teleportation
    )
    return engine(
        problem, noise, mixing, eta, config.T, plan, init, target_error=target
    )


def run_experiment(config: ExperimentConfig) -> int:
    """Execute the config, write trace and summary CSVs, return exit code.

    A single step size runs the full horizon (the trace then has exactly
    T + 1 rows unless it diverged); eta = "grid" evaluates the whole
    step-size grid with early stopping at the target.  With seeds > 1
    the experiment repeats on consecutive seeds and the summary gains
    per-eta mean rows (seed column "mean").
    """
    config.validate()
    if config.algorithm == "search-k":
        return run_k_search(config)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid_mode = config.eta == "grid"
    summary_rows: list[str] = []
    by_eta: dict[float, list[tuple[int | None, float]]] = {}
    any_feasible = False
    best_lines = []
    for seed in range(config.seed, config.seed + config.seeds):
        seed_cfg = replace(config, seed=seed)
        if grid_mode:
            def _writer(trace: RunTrace) -> None:
                write_trace_csv(out / trace_filename(trace), trace)
                iters = (
                    iterations_to_target(trace, config.target_error)
                    if config.target_error is not None
                    else None
                )
                summary_rows.append(_summary_line(trace, iters))
                by_eta.setdefault(trace.eta, []).append((iters, trace.final_error))

            outcome = grid_search_eta(seed_cfg, ETA_GRID, on_trace=_writer)
            if outcome.feasible:
                any_feasible = True
                best_lines.append(f"seed {seed}: best eta {_fmt(outcome.best_eta)}")
        else:
            trace = _single_run(seed_cfg, seed, stop_at_target=False)
            write_trace_csv(out / trace_filename(trace), trace)
            iters = (
                iterations_to_target(trace, config.target_error)
                if config.target_error is not None
                else None
            )
            summary_rows.append(_summary_line(trace, iters))
            by_eta.setdefault(trace.eta, []).append((iters, trace.final_error))
            if not trace.diverged:
                any_feasible = True
    if config.seeds > 1:
        for eta in config.etas():
            entries = by_eta.get(float(eta), [])
            if not entries:
                continue
            reached = [it for it, _ in entries if it is not None]
            mean_iters = (
                "" if not reached else _fmt(sum(reached) / len(reached))
            )
            mean_final = _fmt(sum(fe for _, fe in entries) / len(entries))
            k = config.k if config.algorithm != "dsgd" else config.n
            summary_rows.append(
                f"{config.algorithm},{config.topology},{config.n},{k},"
                f"{_fmt(eta)},mean,{mean_iters},{mean_final}"
            )
    with open(out / "summary.csv", "w", newline="\n") as fh:
        fh.write(SUMMARY_HEADER + "\n")
        fh.write("\n".join(summary_rows) + ("\n" if summary_rows else ""))
    for line in best_lines:
        print(line)
    return EXIT_OK if any_feasible else EXIT_NO_FEASIBLE_ETA


def run_k_search(config: ExperimentConfig) -> int:
    """Race candidate active-node counts (doubling search) and summarize.

    For each step size (single or grid) every candidate k runs the full
    horizon; the summary gets one row per candidate with the selected k
    in the trailing column.  The selected branch's trace CSV is written
    per step size.  Exit code 2 when every branch of every step size
    diverged.
    """
    replace(config, algorithm="teleport", k=config.k or 1).validate()
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary_rows: list[str] = []
    any_converged = False
    for seed in range(config.seed, config.seed + config.seeds):
        plan = StreamPlan(seed)
        problem = make_quadratic(
            config.n, config.d, config.zeta2, plan.problem_stream()
        )
        noise = NoiseModel(config.sigma2)
        init = np.ones(config.d)
        for eta in config.etas():
            outcome = search_k(
                problem, noise, config.topology, float(eta), config.T, plan, init,
                criterion=config.criterion,
            )
            selected = outcome.selected_k
            for k in outcome.candidates:
                trace = outcome.traces[k]
                iters = (
                    iterations_to_target(trace, config.target_error)
                    if config.target_error is not None
                    else None
                )
                summary_rows.append(
                    _summary_line(trace, iters, extra=f",{selected}")
                )
                if not trace.diverged:
                    any_converged = True
            write_trace_csv(
                out / trace_filename(outcome.traces[selected]),
                outcome.traces[selected],
            )
            print(f"seed {seed} eta {_fmt(eta)}: selected k = {selected}")
    with open(out / "summary.csv", "w", newline="\n") as fh:
        fh.write(SUMMARY_HEADER + ",selected_k\n")
        fh.write("\n".join(summary_rows) + ("\n" if summary_rows else ""))
    return EXIT_OK if any_converged else EXIT_NO_FEASIBLE_ETA


def rates_table(
    mode: str,
    families: Sequence[str],
    sizes: Sequence[int],
    T: int,
    sigma2: float,
    zeta2: float,
    r0: float,
) -> list[dict]:
    """Evaluate the convergence bounds over graph sizes or active counts.

    mode "dsgd": one row per (family, n) with the full-participation
    bound at gap p_n.  mode "teleport": sizes holds a single n; one row
    per (family, candidate k) at gap p_k.  The ring gap uses the exact
    circulant eigenvalue; other families are computed numerically.
    Sizes a family cannot realize (torus off perfect squares) are
    skipped.
    """
    if mode not in ("dsgd", "teleport"):
        raise ConfigError(f"rates mode must be dsgd or teleport, got {mode!r}")
    rows: list[dict] = []
    if mode == "dsgd":
        pairs = [(n, n) for n in sizes]
    else:
        if len(sizes) != 1:
            raise ConfigError("teleport mode takes exactly one n")
        pairs = [(sizes[0], k) for k in candidate_ks(sizes[0])]
    for n, width in pairs:
        bounds = BoundInputs(T=T, sigma2=sigma2, zeta2=zeta2, L=float(n), r0=r0, n=n)
        for family in families:
            try:
                p = (
                    ring_spectral_gap_exact(width)
                    if family == "ring"
                    else spectral_gap(build_topology(family, width).weights)
                )
            except ValueError:
                continue
            est = (
                rate_dsgd(bounds, p)
                if mode == "dsgd"
                else rate_teleportation(bounds, width, p)
            )
            rows.append(
                {
                    "mode": mode,
                    "family": family,
                    "n": n,
                    "k": width,
                    "p": p,
                    "stochastic_term": est.stochastic_term,
                    "drift_term": est.drift_term,
                    "optimization_term": est.optimization_term,
                    "total": est.total,
                }
            )
    return rows


def write_rates_csv(path: Path, rows: list[dict]) -> None:
    header = (
        "mode,family,n,k,p,stochastic_term,drift_term,optimization_term,total"
    )
    lines = [header]
    for r in rows:
        lines.append(
            f"{r['mode']},{r['family']},{r['n']},{r['k']},{_fmt(r['p'])},"
            f"{_fmt(r['stochastic_term'])},{_fmt(r['drift_term'])},"
            f"{_fmt(r['optimization_term'])},{_fmt(r['total'])}"
        )
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
