"""
Build the bundled synthetic USDC/ETH-style pool dataset
========================================================

The package ships a small *synthetic* hourly dataset so that every workflow
(estimation, optimization, backtests, sweeps) runs offline. It mimics the
layout of the Uniswap v3 0.05% USDC/WETH pool: token0 is USDC (6 decimals,
the numeraire ``y``), token1 is WETH (18 decimals, the volatile ``x``), and
the fee growth counters are raw X128 integers per unit of on-chain
liquidity.

Prices follow a driftless GBM with hourly volatility 0.006 starting at
1350 USDC/ETH. Hourly fee income for a full-range position is lognormal
with occasional bursts on large moves, scaled so the median fee rate per
unit of liquidity is around 2.2e-4 USDC per hour.

Run from the repository root::

    python demos/make_synthetic_pool.py
"""

from pathlib import Path

import numpy as np

from lpconc.market_data import Q128, PoolDataset, PoolMetadata, PoolRow, write_pool_csv

HOURS = 2160
START = 1673395200  # 2023-01-11T00:00:00Z
SIGMA = 0.006
DECIMALS_X, DECIMALS_Y = 18, 6

rng = np.random.default_rng(20230111)

###############################################################################
# Marginal price path and per-step fee yield of a full-range position

returns = -0.5 * SIGMA**2 + SIGMA * rng.standard_normal(HOURS - 1)
price = 1350.0 * np.exp(np.concatenate([[0.0], np.cumsum(returns)]))
yield_full_range = 2.2e-6 * np.exp(0.8 * rng.standard_normal(HOURS - 1))
yield_full_range *= 1.0 + 0.5 * (returns / SIGMA) ** 2

# A full-range position of value W holds L = W / (2 sqrt(P)), so its fee
# income per unit of liquidity is 2 sqrt(P) * yield. Half of it is paid in
# each token.
fee_rate = 2.0 * np.sqrt(price[1:]) * yield_full_range
fee_y = 0.5 * fee_rate
fee_x = 0.5 * fee_rate / price[1:]

###############################################################################
# Encode as raw X128 counters (per unit of raw liquidity, smallest units)

liquidity_scale = 10 ** ((DECIMALS_X + DECIMALS_Y) // 2)


def to_raw(per_liquidity, decimals):
    return [int(round(v * 10**decimals / liquidity_scale * Q128)) for v in per_liquidity]


growth_usdc = np.cumsum([3_140_000_000_000_000_000_000_000_000_000] + to_raw(fee_y, DECIMALS_Y), dtype=object)
growth_weth = np.cumsum([1_720_000_000_000_000_000_000_000_000_000_000] + to_raw(fee_x, DECIMALS_X), dtype=object)

rows = [
    PoolRow(START + 3600 * i, float(price[i]), int(growth_usdc[i]), int(growth_weth[i]))
    for i in range(HOURS)
]
meta = PoolMetadata(decimals_x=DECIMALS_X, decimals_y=DECIMALS_Y, x_counter=1, fee_tier=0.0005)
dataset = PoolDataset(rows, meta)

target = Path(__file__).resolve().parents[1] / "src" / "lpconc" / "data" / "synthetic_usdc_eth_hourly.csv"
write_pool_csv(dataset, target)
print(f"wrote {len(rows)} rows to {target}")
