"""
The reallocation strategy on simulated prices
=============================================

The LP keeps a symmetric interval ``[pi / alpha, alpha pi]``. Whenever the
price leaves it, the position is closed, fees are claimed, holdings are
rebalanced to a 50/50 split (paying a proportional trading fee and a fixed
gas cost) and a new interval is opened around the current price.

We follow one GBM path step by step, then compare interval widths over many
paths with the vectorized kernel.
"""

import numpy as np

from lpconc import GbmParams, StrategyParams, run_strategy, sample_gbm_paths, simulate_batch

W = 100_000.0
FEE = 2.2e-4  # fee income per unit liquidity per hour, always-active position
gbm = GbmParams(sigma=0.006, initial_price=1350.0)

###############################################################################
# One path, one strategy

path = sample_gbm_paths(gbm, 1, 96, seed=1)[0]
run = run_strategy(path, FEE, StrategyParams(alpha=1.005), W)
for t, (state, ev) in enumerate(run.trajectory, start=1):
    if ev.reallocated:
        print(f"t={t:2d}  ETH {path[t] ** 2:8.2f}  exit {ev.side.value:5s}  wealth {state.wealth():10.2f}")
print(f"terminal wealth {run.terminal_wealth:.2f} after {run.reallocation_count} reallocations")

###############################################################################
# Many paths, many widths

paths = sample_gbm_paths(gbm, 500, 48, seed=2)
alphas = np.array([1.005, 1.01, 1.02, 1.05, 1.1, 1.5, 2.0, 4.0])
batch = simulate_batch(alphas, paths, FEE, StrategyParams(alpha=2.0), W)
print("\n alpha   mean profit   reallocations   ruined")
for i, a in enumerate(alphas):
    profit = 100 * (batch.terminal_wealth[i].mean() / W - 1)
    print(f"{a:6.3f} {profit:12.3f}% {batch.reallocations[i].mean():14.2f} {batch.ruined[i].sum():8d}")
