"""
Backtesting on pool data and sweeping the strategy parameters
=============================================================

Replays the strategy over hourly pool snapshots with the realized fee
rates, compares it with an unbounded (full-range) position and with holding,
and sweeps ``alpha`` against the trigger offset ``gamma``. A positive
``gamma`` waits for the price to move further beyond the interval before
reallocating.

The bundled dataset is synthetic. Pass a CSV written by ``lpconc fetch`` as
the first argument to use real data.
"""

import sys

import numpy as np

from lpconc import StrategyParams
from lpconc.backtest import full_range_baseline, run_backtest, sweep_grid
from lpconc.market_data import load_bundled_dataset, load_pool_csv

ds = load_pool_csv(sys.argv[1]) if len(sys.argv) > 1 else load_bundled_dataset()
W = 100_000.0
print(f"{len(ds)} hourly snapshots, ETH {ds.prices[0]:.2f} -> {ds.prices[-1]:.2f}")

###############################################################################
# Single strategies against the baselines

for alpha in (1.01, 1.1, 1.5, 4.0):
    rep = run_backtest(ds, StrategyParams(alpha=alpha), W)
    print(f"alpha {alpha:5.2f}: profit {rep.terminal_profit_pct:7.2f}%  reallocations {rep.reallocation_count}")
full = full_range_baseline(ds, W)
print(f"full range: {full.terminal_profit_pct:.2f}%   hold: {full.hold_profit_pct:.2f}%")

###############################################################################
# alpha x gamma sweep

alphas = np.round(np.arange(1.0001, 1.2, 0.02), 4)
sweep = sweep_grid(ds, alphas, [-0.5, 0.0, 0.5], StrategyParams(alpha=2.0), W)
print("\n alpha  " + "  ".join(f"gamma={g:+.1f} (profit, reallocs)" for g in sweep.gammas))
for a in sweep.alphas:
    cells = []
    for g in sweep.gammas:
        rep = sweep.cells[(a, g)]
        cells.append("        crossing bounds       " if rep is None
                     else f"{rep.terminal_profit_pct:13.2f}% {rep.reallocation_count:12d}  ")
    print(f"{a:6.4f} " + "".join(cells))
a, g, best = sweep.best()
print(f"best: alpha {a}, gamma {g}, profit {best.terminal_profit_pct:.2f}%")
