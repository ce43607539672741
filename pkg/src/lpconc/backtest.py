"""Historical replay of the strategy, parameter sweeps and baselines."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .amm import Reserves, hold_value
from .engine import StrategyParams, StrategyRun, run_strategy, simulate_batch
from .errors import InvalidParameter
from .market_data import PoolDataset, fee_rate_series

SWEEP_COLUMNS = ("alpha", "gamma", "profit_pct", "fees_per_step", "reallocs_per_step", "realloc_count")


@dataclass
class BacktestReport:
    """Outcome of one replay; percentages are relative to the initial wealth.

    Per-step averages divide by the number of steps, or by the steps until
    ruin when the LP ran out of wealth.
    """

    alpha: float
    gamma: float
    initial_wealth: float
    terminal_wealth: float
    terminal_profit_pct: float
    total_fees: float
    fees_per_step_pct: float
    reallocation_count: int
    reallocations_per_step: float
    steps: int
    ruin_step: int | None
    hold_profit_pct: float
    final_liquidity: float = math.nan
    final_interval: tuple[float, float] | None = None

    def to_dict(self) -> dict:
        """Plain dict; non-finite floats become ``None`` so the JSON stays standard."""
        out = asdict(self)
        for key, val in out.items():
            if isinstance(val, float) and not math.isfinite(val):
                out[key] = None
            elif isinstance(val, tuple):
                out[key] = [v if math.isfinite(v) else None for v in val]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _hold_profit_pct(sqrt_prices: np.ndarray, initial_wealth: float) -> float:
    p0 = float(sqrt_prices[0])
    start = Reserves(0.5 * initial_wealth / (p0 * p0), 0.5 * initial_wealth)
    return 100.0 * (hold_value(start, float(sqrt_prices[-1])) / initial_wealth - 1.0)


def _make_report(
    alpha: float,
    gamma: float,
    initial_wealth: float,
    terminal: float,
    fees: float,
    reallocs: int,
    horizon: int,
    ruin_step: int | None,
    hold_pct: float,
    final_liquidity: float = math.nan,
    final_interval: tuple[float, float] | None = None,
) -> BacktestReport:
    denom = ruin_step if ruin_step is not None else horizon
    return BacktestReport(
        alpha=alpha,
        gamma=gamma,
        initial_wealth=initial_wealth,
        terminal_wealth=terminal,
        terminal_profit_pct=100.0 * (terminal - initial_wealth) / initial_wealth,
        total_fees=fees,
        fees_per_step_pct=100.0 * fees / initial_wealth / denom,
        reallocation_count=int(reallocs),
        reallocations_per_step=reallocs / denom,
        steps=horizon,
        ruin_step=ruin_step,
        hold_profit_pct=hold_pct,
        final_liquidity=final_liquidity,
        final_interval=final_interval,
    )


def report_from_run(run: StrategyRun, sqrt_prices, params: StrategyParams, initial_wealth: float) -> BacktestReport:
    prices = np.asarray(sqrt_prices, dtype=float)
    last = run.trajectory[-1][0] if run.trajectory else run.initial_state
    return _make_report(
        params.alpha,
        params.gamma,
        initial_wealth,
        run.terminal_wealth,
        run.total_fees,
        run.reallocation_count,
        prices.size - 1,
        run.ruin_step,
        _hold_profit_pct(prices, initial_wealth),
        last.position.liquidity,
        (last.position.interval.lower, last.position.interval.upper),
    )


def run_backtest(
    dataset: PoolDataset,
    params: StrategyParams,
    initial_wealth: float = 100_000.0,
    fee_rates: np.ndarray | None = None,
) -> BacktestReport:
    """Replay the strategy over ``dataset`` with its realized fee rates."""
    if not initial_wealth > 0.0:
        raise InvalidParameter("initial wealth must be positive")
    if len(dataset) < 2:
        raise InvalidParameter("need at least two snapshots to backtest")
    rates = fee_rate_series(dataset) if fee_rates is None else np.asarray(fee_rates, dtype=float)
    path = dataset.sqrt_prices
    run = run_strategy(path, rates, params, initial_wealth)
    return report_from_run(run, path, params, initial_wealth)


@dataclass
class SweepResult:
    """Reports for the cross product ``alphas x gammas`` in grid order.

    Cells where a negative ``gamma`` makes the trigger bounds cross are
    ``None`` and written to CSV as ``nan``.
    """

    alphas: list[float]
    gammas: list[float]
    cells: dict[tuple[float, float], BacktestReport | None] = field(default_factory=dict)

    def rows(self) -> list[tuple]:
        out = []
        for g in self.gammas:
            for a in self.alphas:
                rep = self.cells[(a, g)]
                if rep is None:
                    out.append((a, g, math.nan, math.nan, math.nan, math.nan))
                else:
                    out.append(
                        (a, g, rep.terminal_profit_pct, rep.fees_per_step_pct, rep.reallocations_per_step,
                         rep.reallocation_count)
                    )
        return out

    def to_csv(self, path: str | os.PathLike | None = None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for row in self.rows():
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def best(self) -> tuple[float, float, BacktestReport]:
        """Cell with the highest terminal profit (first in grid order on ties)."""
        best = None
        for g in self.gammas:
            for a in self.alphas:
                rep = self.cells[(a, g)]
                if rep is not None and (best is None or rep.terminal_profit_pct > best[2].terminal_profit_pct):
                    best = (a, g, rep)
        if best is None:
            raise InvalidParameter("sweep has no valid cells")
        return best


def sweep_grid(
    dataset: PoolDataset,
    alpha_grid: Sequence[float],
    gamma_set: Sequence[float],
    params: StrategyParams,
    initial_wealth: float = 100_000.0,
    fee_rates: np.ndarray | None = None,
) -> SweepResult:
    """Backtest every ``(alpha, gamma)`` combination.

    ``params`` supplies the costs; its ``alpha`` and ``gamma`` are
    overridden by the grid. Each gamma is evaluated for all alphas at once
    with the array kernel, which reproduces :func:`run_backtest` exactly.
    """
    alphas = [float(a) for a in alpha_grid]
    gammas = [float(g) for g in gamma_set]
    if not alphas or not gammas:
        raise InvalidParameter("alpha and gamma grids must be nonempty")
    rates = fee_rate_series(dataset) if fee_rates is None else np.asarray(fee_rates, dtype=float)
    path = dataset.sqrt_prices
    horizon = path.size - 1
    hold_pct = _hold_profit_pct(path, initial_wealth)
    result = SweepResult(alphas, gammas)
    for g in gammas:
        cost = StrategyParams(alpha=alphas[0], gamma=g, gas_cost=params.gas_cost, trade_fee=params.trade_fee)
        batch = simulate_batch(np.array(alphas), path[None, :], rates, cost, initial_wealth, on_cross="mask")
        for i, a in enumerate(alphas):
            if batch.invalid[i, 0]:
                result.cells[(a, g)] = None
                continue
            ruin = int(batch.ruin_step[i, 0])
            result.cells[(a, g)] = _make_report(
                a,
                g,
                initial_wealth,
                float(batch.terminal_wealth[i, 0]),
                float(batch.total_fees[i, 0]),
                int(batch.reallocations[i, 0]),
                horizon,
                ruin if ruin >= 0 else None,
                hold_pct,
            )
    return result


def full_range_baseline(
    dataset: PoolDataset, initial_wealth: float = 100_000.0, fee_rates: np.ndarray | None = None
) -> BacktestReport:
    """Unbounded position ``L = W / (2 pi_0)`` that never reallocates.

    Its reserves are ``x = L / pi``, ``y = L pi``, so its value is
    ``2 L pi``; fees accrue every step at ``cbar_t * L``.
    """
    rates = fee_rate_series(dataset) if fee_rates is None else np.asarray(fee_rates, dtype=float)
    path = dataset.sqrt_prices
    liq = initial_wealth / (2.0 * float(path[0]))
    fees = float(np.sum(rates)) * liq
    terminal = 2.0 * liq * float(path[-1]) + fees
    return _make_report(
        math.inf, 0.0, initial_wealth, terminal, fees, 0, path.size - 1, None,
        _hold_profit_pct(path, initial_wealth), liq, (0.0, math.inf),
    )
