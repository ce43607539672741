import numpy as np
import pytest

from lpconc.market_data import PoolDataset, PoolMetadata, PoolRow, Q128


def make_dataset(prices, fee_rates=None, start=1_700_000_000, step=3600):
    """Pool dataset with zero-decimal tokens whose decoded fee rates equal ``fee_rates``.

    Fees are paid entirely in y, so each step's raw counter delta is
    ``rate * 2**128``; rates are rounded to that resolution.
    """
    prices = [float(p) for p in prices]
    rates = np.zeros(len(prices) - 1) if fee_rates is None else np.broadcast_to(fee_rates, (len(prices) - 1,))
    growth = [0]
    for r in rates:
        growth.append(growth[-1] + int(round(float(r) * Q128)))
    rows = [PoolRow(start + step * i, p, 0, g) for i, (p, g) in enumerate(zip(prices, growth))]
    return PoolDataset(rows, PoolMetadata(x_counter=0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
