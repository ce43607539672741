"""Command-line front end.

Every subcommand prints a provenance line first. It lists the fully
resolved settings as ``key=value`` pairs, so it can be pasted into a
config file (``--config``) to reproduce the run. Settings resolve in the
order flag, then config file, then built-in default.

Exit codes: 0 success, 1 invalid input or parameters, 2 I/O or network
failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import re
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .backtest import full_range_baseline, run_backtest, sweep_grid
from .engine import StrategyParams, simulate_batch
from .errors import FetchError, InvalidData, InvalidParameter, LpconcError
from .market_data import (
    ENDPOINT_ENV,
    bundled_dataset_path,
    fee_rate_series,
    fetch_pool_history,
    load_pool_csv,
    median_fee_rate,
)
from .minlp import export_minlp
from .optimizer import SaaConfig, optimize_alpha_repeated
from .stochastic import GbmParams, estimate_sigma, sample_gbm_paths

log = logging.getLogger("lpconc")

DEFAULTS: dict[str, Any] = {
    "alpha": 2.0,
    "gamma": 0.0,
    "gas": 109.8,
    "trade_fee": 0.0005,
    "wealth": 100_000.0,
    "sigma": 0.006,
    "price0": 1350.0,
    "horizon": 10,
    "num_paths": 30,
    "seed": 0,
    "repeats": 1,
    "alpha_low": 1.01,
    "alpha_high": 4.0,
    "grid_step": 0.01,
    "refine_tolerance": 1e-4,
    "conversion_price": "end",
    "alphas": "1.0001:4:0.01",
    "gammas": "-6,0,6",
    "page_size": 1000,
    "x_is_token0": False,
    "out_dir": ".",
}


class UsageError(LpconcError):
    """Bad command-line usage (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


def _sig(x: float) -> str:
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.4g}"


###############################################################################
# Argument parsing


def _build_parser() -> _Parser:
    parser = _Parser(prog="lpconc", description="Concentrated-liquidity LP strategy toolkit.")
    parser.add_argument("--version", action="version", version=f"lpconc {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    common = _Parser(add_help=False)
    common.add_argument("--config", help="key = value settings file")
    common.add_argument("--out-dir", dest="out_dir", help="directory for result files (default: current)")
    common.add_argument("--out", help="result file path (overrides the default name in --out-dir)")
    common.add_argument("-v", "--verbose", action="store_true", default=None)

    strategy = _Parser(add_help=False)
    strategy.add_argument("--gas", type=float, help="gas cost per reallocation, in y units")
    strategy.add_argument("--trade-fee", dest="trade_fee", type=float, help="proportional trading fee")
    strategy.add_argument("--wealth", type=float, help="initial wealth, in y units")

    market = _Parser(add_help=False)
    market.add_argument("--sigma", type=float, help="per-step log-return volatility")
    market.add_argument("--price0", type=float, help="initial marginal price")
    market.add_argument("--fee-rate", dest="fee_rate", type=float, help="fee income per unit liquidity per step")
    market.add_argument("--csv", help="pool CSV supplying the median fee rate (and sigma, price0 if not set)")
    market.add_argument("--T", "--horizon", dest="horizon", type=int, help="steps per path")
    market.add_argument("--S", "--num-paths", dest="num_paths", type=int, help="number of sampled paths")
    market.add_argument("--seed", type=int)

    data = _Parser(add_help=False)
    data.add_argument("--csv", help="pool CSV (default: bundled synthetic dataset)")
    data.add_argument("--conversion-price", dest="conversion_price", choices=("end", "start"))

    p = sub.add_parser("fetch", parents=[common], help="download hourly pool snapshots to CSV")
    p.add_argument("--endpoint", help=f"indexer URL (default: ${ENDPOINT_ENV})")
    p.add_argument("--pool", help="pool id")
    p.add_argument("--start", help="UNIX seconds or ISO date (UTC)")
    p.add_argument("--end", help="UNIX seconds or ISO date (UTC)")
    p.add_argument("--x-is-token0", dest="x_is_token0", action="store_true", default=None)
    p.add_argument("--page-size", dest="page_size", type=int)

    sub.add_parser("estimate", parents=[common, data], help="volatility and median fee rate of a pool CSV")

    p = sub.add_parser("simulate", parents=[common, strategy, market], help="run one strategy on GBM paths")
    p.add_argument("--alpha", type=float)

    p = sub.add_parser("optimize", parents=[common, strategy, market], help="SAA optimization of alpha")
    p.add_argument("--repeats", type=int, help="independent repetitions with seeds seed, seed+1, ...")
    p.add_argument("--alpha-low", dest="alpha_low", type=float)
    p.add_argument("--alpha-high", dest="alpha_high", type=float)
    p.add_argument("--grid-step", dest="grid_step", type=float)
    p.add_argument("--refine-tolerance", dest="refine_tolerance", type=float)

    p = sub.add_parser("backtest", parents=[common, strategy, data], help="replay one strategy on a pool CSV")
    p.add_argument("--alpha", type=float)

    p = sub.add_parser("sweep", parents=[common, strategy, data], help="backtest an (alpha, gamma) grid")
    p.add_argument("--alpha", dest="alphas", help="start:stop:step (inclusive) or comma list")
    p.add_argument("--gamma", dest="gammas", help="comma list")

    p = sub.add_parser("export-model", parents=[common, strategy, market], help="write the Big-M model file")
    p.add_argument("--alpha-low", dest="alpha_low", type=float)
    p.add_argument("--alpha-high", dest="alpha_high", type=float)
    p.add_argument("--big-m", dest="big_m", type=float, help="Big-M constant (default: 4x the required value)")

    for name in ("simulate", "optimize", "backtest", "export-model"):
        sub.choices[name].add_argument("--gamma", type=float, help="trigger threshold offset in sqrt-price units")
    return parser


def _option_aliases(parser: argparse.ArgumentParser) -> dict[str, str]:
    """Map every long option name (and dest) of ``parser`` to its dest."""
    out = {}
    for action in parser._actions:
        out[action.dest] = action.dest
        for opt in action.option_strings:
            if opt.startswith("--"):
                out[opt[2:].replace("-", "_").lower()] = action.dest
    return out


def read_config(path: str | os.PathLike) -> dict[str, str]:
    """Parse a ``key = value`` file; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise UsageError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            out[key.strip().replace("-", "_").lower()] = value.strip()
    return out


def _resolve(args: argparse.Namespace, sub: argparse.ArgumentParser) -> dict[str, Any]:
    """Merge flags over the config file over defaults, with type conversion."""
    aliases = _option_aliases(sub)
    types = {a.dest: a.type for a in sub._actions}
    config = read_config(args.config) if args.config else {}
    settings = {k: v for k, v in DEFAULTS.items() if k in aliases.values()}
    explicit = set()
    for key, value in config.items():
        if key == "fee_source":
            # informational; echoed back so a pasted provenance line reproduces itself
            settings[key] = value
            continue
        if key not in aliases:
            raise UsageError(f"{args.config}: unknown setting {key!r} for '{args.command}'")
        dest = aliases[key]
        explicit.add(dest)
        conv = types.get(dest)
        if isinstance(DEFAULTS.get(dest), bool) or dest in ("x_is_token0", "verbose"):
            settings[dest] = value.lower() in ("1", "true", "yes", "on")
            continue
        try:
            settings[dest] = conv(value) if conv else value
        except ValueError:
            raise UsageError(f"{args.config}: setting {key} = {value!r} is not a valid {conv.__name__}") from None
    for dest, value in vars(args).items():
        if value is not None and dest not in ("config", "command"):
            settings[dest] = value
            explicit.add(dest)
    settings["_explicit"] = explicit
    return settings


def _provenance(command: str, settings: dict[str, Any]) -> str:
    keys = sorted(k for k, v in settings.items() if v is not None and k not in ("out", "verbose"))
    body = " ".join(f"{k}={settings[k]!r}" if isinstance(settings[k], float) else f"{k}={settings[k]}" for k in keys)
    return f"# lpconc {__version__} {command} {body}"


###############################################################################
# Helpers shared by the subcommands


def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` (stop included when hit) or a comma list."""
    text = str(text).strip()
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) != 3:
                raise ValueError
            start, stop, step = parts
            if not step > 0.0 or stop < start:
                raise UsageError(f"range {text!r} needs step > 0 and stop >= start")
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            return [float(v) for v in np.round(start + step * np.arange(n), 10)]
        values = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise UsageError(f"cannot parse grid {text!r}; use start:stop:step or a comma list") from None
    if not values:
        raise UsageError("empty grid")
    return values


def _parse_time(text: str | None, name: str) -> int:
    if text is None:
        raise UsageError(f"--{name} is required")
    try:
        return int(text)
    except ValueError:
        pass
    try:
        moment = datetime.fromisoformat(text)
    except ValueError:
        raise UsageError(f"--{name} {text!r} is neither UNIX seconds nor an ISO date") from None
    if moment.tzinfo is None:
        moment = moment.replace(tzinfo=timezone.utc)
    return int(moment.timestamp())


def _output_path(settings: dict[str, Any], default_name: str) -> Path:
    if settings.get("out"):
        path = Path(settings["out"])
    else:
        path = Path(settings.get("out_dir") or ".") / default_name
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path: Path, provenance: str, payload: dict[str, Any]) -> None:
    doc = {"provenance": provenance, **payload}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=False, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _finite(x: float) -> float | None:
    return x if math.isfinite(x) else None


def _dataset(settings: dict[str, Any]):
    path = settings.get("csv") or bundled_dataset_path()
    settings["csv"] = str(path)
    return load_pool_csv(path)


def _market_inputs(settings: dict[str, Any]) -> tuple[GbmParams, float]:
    """Volatility, initial price and fee rate from flags, a CSV or the bundled data."""
    if settings.get("csv") and settings.get("fee_rate") is not None:
        raise UsageError("conflicting sources: give either --fee-rate or --csv, not both")
    if settings.get("fee_rate") is None:
        source = settings.get("csv") or bundled_dataset_path()
        dataset = load_pool_csv(source)
        settings["fee_rate"] = median_fee_rate(fee_rate_series(dataset))
        if settings.get("csv"):
            if "sigma" not in settings.get("_explicit", ()):
                settings["sigma"] = estimate_sigma(dataset.prices)
            if "price0" not in settings.get("_explicit", ()):
                settings["price0"] = float(dataset.prices[0])
        settings["fee_source"] = str(source)
    return GbmParams(settings["sigma"], settings["price0"]), float(settings["fee_rate"])


def _strategy(settings: dict[str, Any], alpha: float) -> StrategyParams:
    return StrategyParams(
        alpha=alpha, gamma=settings["gamma"], gas_cost=settings["gas"], trade_fee=settings["trade_fee"]
    )


###############################################################################
# Subcommands


def cmd_fetch(settings: dict[str, Any], echo) -> int:
    if not settings.get("pool"):
        raise UsageError("--pool is required")
    start = _parse_time(settings.get("start"), "start")
    end = _parse_time(settings.get("end"), "end")
    if end < start:
        raise UsageError("--end must not precede --start")
    endpoint = settings.get("endpoint") or os.environ.get(ENDPOINT_ENV)
    if not endpoint:
        raise UsageError(f"no indexer endpoint: pass --endpoint or set {ENDPOINT_ENV}")
    path = _output_path(settings, "pool.csv")
    echo()
    dataset = fetch_pool_history(
        endpoint,
        settings["pool"],
        start,
        end,
        x_is_token0=bool(settings["x_is_token0"]),
        page_size=settings["page_size"],
        out_path=path,
    )
    print(f"rows {len(dataset)}  gaps {len(dataset.gaps)}  written {path}")
    return 0


def cmd_estimate(settings: dict[str, Any], echo) -> int:
    dataset = _dataset(settings)
    rates = fee_rate_series(dataset, settings["conversion_price"])
    sigma = estimate_sigma(dataset.prices)
    med = median_fee_rate(rates)
    path = _output_path(settings, "estimate.json")
    prov = echo()
    _write_json(
        path,
        prov,
        {
            "rows": len(dataset),
            "gaps": [list(g) for g in dataset.gaps],
            "sigma": sigma,
            "median_fee_rate": med,
            "mean_fee_rate": float(np.mean(rates)),
            "initial_price": float(dataset.prices[0]),
        },
    )
    print(f"rows {len(dataset)}  gaps {len(dataset.gaps)}")
    print(f"sigma {_sig(sigma)}  median fee rate {_sig(med)}  initial price {_sig(dataset.prices[0])}")
    print(f"written {path}")
    return 0


def cmd_simulate(settings: dict[str, Any], echo) -> int:
    gbm, fee = _market_inputs(settings)
    params = _strategy(settings, settings["alpha"])
    wealth = settings["wealth"]
    paths = sample_gbm_paths(gbm, settings["num_paths"], settings["horizon"], settings["seed"])
    batch = simulate_batch([params.alpha], paths, fee, params, wealth)
    path = _output_path(settings, "simulate.csv")
    prov = echo()
    terminal = batch.terminal_wealth[0]
    with path.open("w") as fh:
        fh.write(prov + "\n")
        fh.write("path,terminal_wealth,profit_pct,reallocations,total_fees,ruin_step\n")
        for s in range(terminal.size):
            ruin = int(batch.ruin_step[0, s])
            tw = float(terminal[s])
            fh.write(
                f"{s},{tw!r},{100.0 * (tw / wealth - 1.0)!r},{int(batch.reallocations[0, s])},"
                f"{float(batch.total_fees[0, s])!r},{ruin if ruin >= 0 else ''}\n"
            )
    print(f"paths {terminal.size}  horizon {paths.shape[1] - 1}  alpha {_sig(params.alpha)}  fee rate {_sig(fee)}")
    print(f"mean terminal wealth {_sig(terminal.mean())}  mean profit {_sig(100 * (terminal.mean() / wealth - 1))}%")
    print(f"mean reallocations {_sig(batch.reallocations[0].mean())}  ruined {int(batch.ruined[0].sum())}")
    print(f"written {path}")
    return 0


def cmd_optimize(settings: dict[str, Any], echo) -> int:
    gbm, fee = _market_inputs(settings)
    config = SaaConfig(
        num_paths=settings["num_paths"],
        horizon=settings["horizon"],
        seed=settings["seed"],
        alpha_low=settings["alpha_low"],
        alpha_high=settings["alpha_high"],
        grid_step=settings["grid_step"],
        refine_tolerance=settings["refine_tolerance"],
    )
    if settings["repeats"] < 1:
        raise UsageError("--repeats must be at least 1")
    prov = echo()
    summary = optimize_alpha_repeated(
        config,
        gbm,
        fee,
        settings["repeats"],
        gas_cost=settings["gas"],
        trade_fee=settings["trade_fee"],
        gamma=settings["gamma"],
        initial_wealth=settings["wealth"],
    )
    path = _output_path(settings, "optimize.json")
    _write_json(
        path,
        prov,
        {
            "results": [
                {
                    "seed": r.seed,
                    "alpha_star": r.alpha_star,
                    "objective_value": r.objective_value,
                    "evaluations": r.evaluations,
                    "wall_time": r.wall_time,
                }
                for r in summary.results
            ],
            "alpha_stats": summary.alpha_stats(),
            "runtime_stats": summary.runtime_stats(),
        },
    )
    print("seed  alpha*  objective  seconds")
    for r in summary.results:
        print(f"{r.seed:4d}  {_sig(r.alpha_star)}  {_sig(r.objective_value)}  {_sig(r.wall_time)}")
    for label, stats in (("alpha*", summary.alpha_stats()), ("runtime", summary.runtime_stats())):
        print(f"{label:8s}" + "  ".join(f"{k} {_sig(v)}" for k, v in stats.items()))
    print(f"written {path}")
    return 0


def cmd_backtest(settings: dict[str, Any], echo) -> int:
    dataset = _dataset(settings)
    rates = fee_rate_series(dataset, settings["conversion_price"])
    params = _strategy(settings, settings["alpha"])
    report = run_backtest(dataset, params, settings["wealth"], rates)
    full = full_range_baseline(dataset, settings["wealth"], rates)
    path = _output_path(settings, "backtest.json")
    prov = echo()
    _write_json(path, prov, {"strategy": report.to_dict(), "full_range": full.to_dict()})
    print(f"steps {report.steps}  alpha {_sig(report.alpha)}  gamma {_sig(report.gamma)}")
    print(
        f"profit {_sig(report.terminal_profit_pct)}%  fees/step {_sig(report.fees_per_step_pct)}%  "
        f"reallocations {report.reallocation_count}"
        + (f"  ruined at step {report.ruin_step}" if report.ruin_step is not None else "")
    )
    print(f"full range {_sig(full.terminal_profit_pct)}%  hold {_sig(report.hold_profit_pct)}%")
    print(f"written {path}")
    return 0


def cmd_sweep(settings: dict[str, Any], echo) -> int:
    dataset = _dataset(settings)
    rates = fee_rate_series(dataset, settings["conversion_price"])
    alphas = parse_grid(settings["alphas"])
    gammas = parse_grid(settings["gammas"])
    params = _strategy({**settings, "gamma": 0.0}, max(alphas))
    result = sweep_grid(dataset, alphas, gammas, params, settings["wealth"], rates)
    path = _output_path(settings, "sweep.csv")
    prov = echo()
    result.to_csv(path)
    a, g, best = result.best()
    print(f"cells {len(alphas) * len(gammas)}  steps {len(dataset) - 1}")
    print(
        f"best alpha {a!r}  gamma {g!r}  profit {_sig(best.terminal_profit_pct)}%  "
        f"reallocations {best.reallocation_count}"
    )
    print(f"written {path}")
    return 0


def cmd_export_model(settings: dict[str, Any], echo) -> int:
    gbm, fee = _market_inputs(settings)
    params = _strategy(settings, settings["alpha_high"])
    paths = sample_gbm_paths(gbm, settings["num_paths"], settings["horizon"], settings["seed"])
    doc = export_minlp(
        paths,
        fee,
        (settings["alpha_low"], settings["alpha_high"]),
        params,
        settings["wealth"],
        settings.get("big_m"),
        seed=settings["seed"],
    )
    path = _output_path(settings, "model.txt")
    echo()
    path.write_text(doc.to_text())
    print(
        f"variables {len(doc.variables) + len(doc.binaries)}  binaries {len(doc.binaries)}  "
        f"constraints {len(doc.constraints)}  big_m {_sig(float(doc.params['big_m']))}"
    )
    print(f"written {path}")
    return 0


COMMANDS = {
    "fetch": cmd_fetch,
    "estimate": cmd_estimate,
    "simulate": cmd_simulate,
    "optimize": cmd_optimize,
    "backtest": cmd_backtest,
    "sweep": cmd_sweep,
    "export-model": cmd_export_model,
}


def _attach_negative_values(argv: Sequence[str]) -> list[str]:
    """Join ``--opt -6,0,6`` into ``--opt=-6,0,6``; argparse would read a flag."""
    out: list[str] = []
    for tok in argv:
        if out and re.match(r"^-[\d.]", tok) and out[-1].startswith("--") and "=" not in out[-1]:
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    argv = _attach_negative_values(sys.argv[1:] if argv is None else list(argv))
    try:
        args = parser.parse_args(argv)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        settings = _resolve(args, sub)
        logging.basicConfig(level=logging.INFO if settings.get("verbose") else logging.WARNING, format="%(message)s")

        def echo() -> str:
            line = _provenance(args.command, {k: v for k, v in settings.items() if not k.startswith("_")})
            print(line)
            return line

        return COMMANDS[args.command](settings, echo)
    except (UsageError, InvalidParameter, InvalidData) as exc:
        # malformed CSV content lands here as well: it is a data problem, not I/O
        print(f"lpconc: error: {exc}", file=sys.stderr)
        return 1
    except (FetchError, OSError) as exc:
        print(f"lpconc: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
