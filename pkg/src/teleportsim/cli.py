"""Command line interface.

Subcommands:

* run       -- one algorithm at a fixed step size, full-horizon trace
* grid      -- same experiment across the built-in step-size grid
* search-k  -- doubling search over active-node counts (teleportation)
* rates     -- emit the theoretical bound curves as CSV

Options may come from a flat ``key = value`` config file (--config);
explicit flags override file entries.  Exit codes: 0 done, 1 bad
configuration or usage, 2 no feasible step size.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .harness import (
    EXIT_CONFIG,
    ConfigError,
    ExperimentConfig,
    parse_config_file,
    rates_table,
    run_experiment,
    run_k_search,
    write_rates_csv,
)


def _add_common(sub: argparse.ArgumentParser, with_eta: bool) -> None:
    sub.add_argument("--config", help="flat key = value config file")
    sub.add_argument("--n", type=int, help="number of nodes")
    sub.add_argument("--d", type=int, help="parameter dimension")
    sub.add_argument("--topology", help="ring, complete, exponential or torus")
    sub.add_argument("--sigma2", type=float, help="gradient noise variance")
    sub.add_argument("--zeta2", type=float, help="heterogeneity scale")
    sub.add_argument("--T", type=int, help="iteration budget")
    sub.add_argument("--seed", type=int, help="base seed")
    sub.add_argument("--seeds", type=int, help="number of consecutive seeds")
    sub.add_argument("--target-error", type=float, help="early-reporting error target")
    sub.add_argument("--out-dir", help="artifact directory")
    if with_eta:
        sub.add_argument("--eta", help="step size (number, or 'grid' for search-k)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="teleportsim",
        description="Deterministic decentralized SGD simulator",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    run = subs.add_parser("run", help="single run at a fixed step size")
    _add_common(run, with_eta=True)
    run.add_argument("--algorithm", help="dsgd, teleport, teleport-overlap or client-sampling")
    run.add_argument("--k", type=int, help="active nodes per round")

    grid = subs.add_parser("grid", help="sweep the built-in step-size grid")
    _add_common(grid, with_eta=False)
    grid.add_argument("--algorithm", help="dsgd, teleport, teleport-overlap or client-sampling")
    grid.add_argument("--k", type=int, help="active nodes per round")

    search = subs.add_parser("search-k", help="doubling search over active-node counts")
    _add_common(search, with_eta=True)
    search.add_argument(
        "--criterion", help="branch score: min-mean-grad-norm or min-final-error"
    )

    rates = subs.add_parser("rates", help="emit theoretical bound curves")
    rates.add_argument("--mode", default="teleport", help="dsgd or teleport")
    rates.add_argument(
        "--families", default="ring,exponential", help="comma-separated topology families"
    )
    rates.add_argument(
        "--sizes",
        default="100",
        help="comma-separated graph sizes (teleport mode takes one n)",
    )
    rates.add_argument("--T", type=int, default=10000)
    rates.add_argument("--sigma2", type=float, default=0.0)
    rates.add_argument("--zeta2", type=float, default=0.0)
    rates.add_argument("--r0", type=float, default=1.0)
    rates.add_argument("--out-dir", default=".")
    return parser


_FLAG_FIELDS = (
    "algorithm", "n", "d", "k", "topology", "sigma2", "zeta2",
    "T", "seed", "seeds", "target_error", "criterion", "out_dir",
)


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values = parse_config_file(args.config) if args.config else {}
    config = replace(ExperimentConfig(), **values)
    for name in _FLAG_FIELDS:
        flag = getattr(args, name, None)
        if flag is not None:
            config = replace(config, **{name: flag})
    eta = getattr(args, "eta", None)
    if eta is not None:
        if eta == "grid":
            config = replace(config, eta="grid")
        else:
            try:
                config = replace(config, eta=float(eta))
            except ValueError:
                raise ConfigError(f"eta must be a number or 'grid', got {eta!r}")
    return config


def _run_rates(args: argparse.Namespace) -> int:
    families = [f.strip() for f in args.families.split(",") if f.strip()]
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"--sizes must be comma-separated integers, got {args.sizes!r}")
    if not families or not sizes:
        raise ConfigError("rates needs at least one family and one size")
    rows = rates_table(
        args.mode, families, sizes, args.T, args.sigma2, args.zeta2, args.r0
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_rates_csv(out / "rates.csv", rows)
    print(f"wrote {len(rows)} bound rows to {out / 'rates.csv'}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else EXIT_CONFIG
    try:
        if args.command == "rates":
            return _run_rates(args)
        config = config_from_args(args)
        if args.command == "run":
            if config.eta == "grid":
                raise ConfigError("run needs a numeric --eta; use the grid subcommand")
            return run_experiment(config)
        if args.command == "grid":
            return run_experiment(replace(config, eta="grid"))
        return run_k_search(config)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
