from __future__ import annotations

import argparse
import logging
import math
import sys
from collections.abc import Callable
from dataclasses import replace
from typing import Any

from rich.console import Console
from rich.table import Table

from folio.config import RUN_CONFIG_KEYS
from folio.config import Configuration
from folio.engine import Algorithm
from folio.engine import RunConfig
from folio.engine import regret_bound
from folio.engine import run_replications
from folio.errors import ConfigError
from folio.errors import FolioError
from folio.errors import InputError
from folio.errors import ParameterRegimeError
from folio.errors import UnsupportedKindError
from folio.estimators import NoiseModel
from folio.estimators import sample_count
from folio.formatting import render_summary
from folio.market import MarketGenConfig
from folio.market import MarketKind
from folio.market import PriceRelativeSeries
from folio.market import generate_market
from folio.market import load_csv
from folio.market import relatives_from_prices
from folio.offline import naive_bound_crossover
from folio.offline import naive_regret_bound
from folio.reporting import REPORT_FORMATS
from folio.reporting import summarize_replications
from folio.reporting import write_report
from folio.updates import inner_product_tolerance
from folio.updates import learning_rate
from folio.updates import norm_tolerance

EXIT_REGIME = 2
EXIT_INPUT = 3

DEFAULTS: dict[str, str | None] = {
    "algorithm": "eg",
    "market": None,
    "n": None,
    "T": None,
    "r_min": None,
    "r_min_policy": "reject",
    "delta": "0.05",
    "cost": "0",
    "eta": None,
    "s": None,
    "noise": "exact",
    "seed": "0",
    "replications": "1",
    "out": None,
    "format": "json",
    "verbose": "false",
}

_TRUE = {"1", "true", "yes", "on"}

console = Console()


def _configure_logging(config: Configuration, verbose: bool = False) -> None:
    level = logging.DEBUG if config.verbose_log or verbose else getattr(logging, config.log_level, logging.INFO)
    logging.basicConfig(
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        level=level,
    )


def merge_options(args: argparse.Namespace) -> dict[str, str | None]:
    """Defaults, then the config file, then explicit flags."""
    options = dict(DEFAULTS)
    config_path = getattr(args, "config", None)
    if config_path:
        options.update(Configuration.load_config(config_path))
    for key in RUN_CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            options[key] = str(value)
    return options


def _number(options: dict[str, str | None], key: str, kind: Callable[[str], Any]) -> Any:
    raw = options.get(key)
    if raw is None or raw == "":
        return None
    try:
        return kind(raw)
    except ValueError as e:
        raise ConfigError(f"{key} must be {kind.__name__}, got {raw!r}") from e


def _flag(options: dict[str, str | None], key: str) -> bool:
    return str(options.get(key) or "").strip().lower() in _TRUE


def market_factory(options: dict[str, str | None]) -> Callable[[int], PriceRelativeSeries]:
    """Map a seed to the market of that replication.

    ``gen:<kind>`` markets are regenerated per seed; a CSV market is loaded
    once and shared by every replication.
    """
    source = options.get("market")
    if not source:
        raise InputError("a market is required: a CSV path or gen:<kind>")
    r_min = _number(options, "r_min", float)
    if source.startswith("gen:"):
        n = _number(options, "n", int)
        horizon = _number(options, "T", int)
        if n is None or horizon is None or r_min is None:
            raise InputError("generated markets need --n, --T and --r-min")
        name = source.removeprefix("gen:")
        try:
            kind = MarketKind(name)
        except ValueError as e:
            raise UnsupportedKindError(f"unknown market kind: {name!r}") from e
        template = MarketGenConfig(kind, n, horizon, r_min)
        return lambda seed: generate_market(replace(template, seed=seed))
    rel = relatives_from_prices(load_csv(source), options.get("r_min_policy") or "reject", r_min)
    return lambda seed: rel


def run_config(options: dict[str, str | None], config: Configuration) -> RunConfig:
    noise = options.get("noise") or "exact"
    return RunConfig(
        algorithm=Algorithm.parse(options.get("algorithm") or "eg"),
        n=_number(options, "n", int),
        horizon=_number(options, "T", int),
        r_min=_number(options, "r_min", float),
        delta=_number(options, "delta", float),
        cost_per_trade=_number(options, "cost", float),
        eta_override=_number(options, "eta", float),
        s_override=_number(options, "s", int),
        noise=NoiseModel.parse(noise),
        seed=_number(options, "seed", int),
        offline_tol=config.offline_tol,
        offline_max_iter=config.offline_max_iter,
    )


def cmd_run(args: argparse.Namespace) -> None:
    """Run one algorithm, possibly over several seeds, and report or print the outcome."""
    try:
        config = Configuration()
        options = merge_options(args)
        cfg = run_config(options, config)
        factory = market_factory(options)
        replications = _number(options, "replications", int)
        if replications < 1:
            raise InputError(f"replications must be >= 1, got {replications}")
        fmt = options.get("format") or "json"
        if fmt not in REPORT_FORMATS:
            raise InputError(f"unknown format {fmt!r}, expected one of {REPORT_FORMATS}")
        reports = run_replications(factory, cfg, range(cfg.seed, cfg.seed + replications))
        out = options.get("out")
        if out:
            write_report(reports, out, fmt, _flag(options, "verbose"))
            print(f"Wrote {len(reports)} report(s) to {out}")
        elif len(reports) == 1:
            console.print(render_summary(reports[0]))
        else:
            console.print(render_summary(summarize_replications(reports)))
    except ParameterRegimeError as e:
        print(f"Refused: {e}")
        sys.exit(EXIT_REGIME)
    except (FolioError, OSError) as e:
        print(f"Error: {e}")
        sys.exit(EXIT_INPUT)


def cmd_bounds(args: argparse.Namespace) -> None:
    """Show the tuned parameters and every algorithm's regret bound for n, T and r_min."""
    try:
        eta = learning_rate(args.n, args.T, args.r_min)
        s = sample_count(args.T, args.r_min, args.delta)
    except InputError as e:
        print(f"Error: {e}")
        sys.exit(EXIT_INPUT)
    table = Table(title=f"n={args.n}, T={args.T}, r_min={args.r_min}, delta={args.delta}")
    table.add_column("Quantity", style="bold")
    table.add_column("Value", justify="right")
    table.add_row("eta", f"{eta:.6f}")
    table.add_row("eps_I", f"{inner_product_tolerance(eta, args.r_min):.6f}")
    table.add_row("eps_Z", f"{norm_tolerance(eta, args.r_min):.6f}")
    table.add_row("s", str(s))
    for algorithm in Algorithm:
        table.add_row(f"bound {algorithm.value}", f"{regret_bound(algorithm, args.n, args.T, args.r_min):.6f}")
    table.add_row("naive bound ln(1/r_min)", f"{naive_regret_bound(args.r_min):.6f}")
    crossover = naive_bound_crossover(args.n, args.r_min)
    table.add_row("EG beats naive for T >", "never" if math.isinf(crossover) else f"{crossover:.1f}")
    console.print(table)


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value file with the same keys as the flags")
    parser.add_argument("--algorithm", help="eg, sampled, approx or quantum")
    parser.add_argument("--market", help="CSV of closing prices, or gen:<kind>")
    parser.add_argument("--n", type=int, help="number of assets (generated markets, or a check on CSV input)")
    parser.add_argument("--T", type=int, help="number of trading days")
    parser.add_argument("--r-min", type=float, dest="r_min", help="lower bound on every price relative")
    parser.add_argument("--r-min-policy", dest="r_min_policy", choices=["reject", "clamp"])
    parser.add_argument("--delta", type=float, help="failure probability, 0 < delta < 1/3")
    parser.add_argument("--cost", type=float, help="transaction cost per asset traded per day")
    parser.add_argument("--eta", type=float, help="override the tuned learning rate")
    parser.add_argument("--s", type=int, help="override the number of sampled assets per day")
    parser.add_argument("--noise", choices=["exact", "worst+", "worst-", "random"])
    parser.add_argument("--seed", type=int)
    parser.add_argument("--replications", type=int, help="run seeds seed .. seed+k-1")
    parser.add_argument("--out", help="write the report here instead of printing a summary")
    parser.add_argument("--format", choices=list(REPORT_FORMATS))
    parser.add_argument("--verbose", action="store_true", default=None, help="include per-step records")


def run():
    parser = argparse.ArgumentParser(description="Online portfolio selection experiments")
    subparsers = parser.add_subparsers(dest="command")

    run_parser = subparsers.add_parser("run", help="Run an algorithm on a market")
    _add_run_flags(run_parser)

    bounds_parser = subparsers.add_parser("bounds", help="Show tuned parameters and regret bounds")
    bounds_parser.add_argument("--n", type=int, required=True)
    bounds_parser.add_argument("--T", type=int, required=True)
    bounds_parser.add_argument("--r-min", type=float, dest="r_min", required=True)
    bounds_parser.add_argument("--delta", type=float, default=0.05)

    args = parser.parse_args()

    if args.command == "run":
        _configure_logging(Configuration(), bool(args.verbose))
        cmd_run(args)
    elif args.command == "bounds":
        cmd_bounds(args)
    else:
        parser.print_help()
