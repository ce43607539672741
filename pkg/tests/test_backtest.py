import json
import math

import numpy as np
import pytest

from lpconc import InvalidParameter
from lpconc.backtest import SWEEP_COLUMNS, full_range_baseline, run_backtest, sweep_grid
from lpconc.engine import StrategyParams
from lpconc.market_data import fee_rate_series, load_bundled_dataset

from conftest import make_dataset

W = 100_000.0


def test_constant_price_two_steps():
    f = 0.25
    ds = make_dataset([1350.0] * 3, f)
    rep = run_backtest(ds, StrategyParams(alpha=2.0), W)
    L0 = 2.0 * (W / 2) / math.sqrt(1350.0)
    assert rep.terminal_profit_pct == pytest.approx(100 * 2 * f * L0 / W, rel=1e-12)
    assert rep.reallocation_count == 0 and rep.ruin_step is None
    assert rep.hold_profit_pct == 0.0


def test_wide_interval_no_reallocations():
    ds = load_bundled_dataset()
    p = ds.prices
    alpha = math.sqrt(max(p.max() / p[0], p[0] / p.min())) * 1.001
    for a in (alpha, 4.0):
        rep = run_backtest(ds, StrategyParams(alpha=a), W)
        assert rep.reallocation_count == 0
    # without reallocations gas does not matter
    cheap = run_backtest(ds, StrategyParams(alpha=4.0, gas_cost=0.0), W)
    assert cheap.terminal_wealth == run_backtest(ds, StrategyParams(alpha=4.0, gas_cost=1e4), W).terminal_wealth


def _volatile():
    prices = [1350.0 * (1.3 if i % 2 else 1.0) for i in range(40)]
    return make_dataset(prices, 0.01)


def test_ruin_accounting():
    ds = _volatile()
    rep = run_backtest(ds, StrategyParams(alpha=1.0001, gas_cost=20_000.0), W)
    assert rep.terminal_profit_pct == -100.0
    assert rep.ruin_step is not None and rep.ruin_step < 39
    assert rep.reallocations_per_step == pytest.approx(rep.reallocation_count / rep.ruin_step)
    assert rep.fees_per_step_pct == pytest.approx(100 * rep.total_fees / W / rep.ruin_step)


def test_report_json_is_standard():
    rep = run_backtest(_volatile(), StrategyParams(alpha=1.0001, gas_cost=20_000.0), W)
    doc = json.loads(rep.to_json())
    assert doc["terminal_profit_pct"] == -100.0
    full = json.loads(full_range_baseline(_volatile(), W).to_json())
    assert full["alpha"] is None and full["final_interval"] == [0.0, None]


def test_hold_profit_independent_of_strategy():
    ds = load_bundled_dataset()
    a = run_backtest(ds, StrategyParams(alpha=1.05), W)
    b = run_backtest(ds, StrategyParams(alpha=3.0, gamma=2.0), W)
    assert a.hold_profit_pct == b.hold_profit_pct


def test_full_range_cases():
    flat = full_range_baseline(make_dataset([1350.0] * 5), W)
    assert flat.terminal_profit_pct == 0.0
    doubled = full_range_baseline(make_dataset([1000.0, 2000.0]), W)
    assert doubled.hold_profit_pct == pytest.approx(50.0, rel=1e-14)
    # value relative to hold: 2 sqrt(2) / 3
    ratio = (1 + doubled.terminal_profit_pct / 100) / (1 + doubled.hold_profit_pct / 100)
    assert ratio == pytest.approx(2 * math.sqrt(2) / 3, rel=1e-14)
    assert ratio - 1 == pytest.approx(-0.0572, abs=5e-5)
    # brute-force valuation: an extremely wide interval converges to full range
    wide = run_backtest(make_dataset([1000.0, 2000.0]), StrategyParams(alpha=1e7), W)
    assert wide.terminal_wealth == pytest.approx(doubled.terminal_wealth, rel=1e-6)


def test_full_range_fees():
    ds = make_dataset([1350.0, 1400.0, 1300.0], [0.5, 0.25])
    rep = full_range_baseline(ds, W)
    L = W / (2 * math.sqrt(1350.0))
    assert rep.total_fees == pytest.approx(0.75 * L, rel=1e-12)
    assert rep.terminal_wealth == pytest.approx(2 * L * math.sqrt(1300.0) + 0.75 * L, rel=1e-12)


def test_single_cell_sweep_matches_backtest():
    ds = load_bundled_dataset()
    params = StrategyParams(alpha=1.07, gamma=0.0)
    rep = run_backtest(ds, params, W)
    cell = sweep_grid(ds, [1.07], [0.0], params, W).cells[(1.07, 0.0)]
    for key in ("terminal_wealth", "total_fees", "reallocation_count", "terminal_profit_pct", "fees_per_step_pct",
                "reallocations_per_step", "ruin_step", "hold_profit_pct"):
        assert getattr(cell, key) == getattr(rep, key), key


def test_sweep_matches_backtests_everywhere():
    ds = load_bundled_dataset()
    rates = fee_rate_series(ds)
    alphas, gammas = [1.0001, 1.01, 1.05, 1.2, 2.0], [-0.05, 0.0, 0.3]
    result = sweep_grid(ds, alphas, gammas, StrategyParams(alpha=2.0), W, rates)
    for (a, g), cell in result.cells.items():
        if cell is None:
            with pytest.raises(InvalidParameter):
                run_backtest(ds, StrategyParams(alpha=a, gamma=g), W, rates)
            continue
        rep = run_backtest(ds, StrategyParams(alpha=a, gamma=g), W, rates)
        assert cell.terminal_wealth == rep.terminal_wealth
        assert cell.reallocation_count == rep.reallocation_count


def test_sweep_csv_and_best(tmp_path):
    ds = load_bundled_dataset()
    result = sweep_grid(ds, [1.0001, 1.5, 4.0], [-6.0, 0.0, 6.0], StrategyParams(alpha=2.0), W)
    text = result.to_csv(tmp_path / "s.csv")
    lines = text.splitlines()
    assert lines[0] == ",".join(SWEEP_COLUMNS)
    assert len(lines) == 10
    # gamma = -6 makes the narrowest interval cross its trigger bounds
    assert lines[1] == "1.0001,-6.0,nan,nan,nan,nan"
    assert "nan" not in lines[2] and "nan" not in lines[3]
    assert (tmp_path / "s.csv").read_text() == text
    assert sweep_grid(ds, [1.0001, 1.5, 4.0], [-6.0, 0.0, 6.0], StrategyParams(alpha=2.0), W).to_csv() == text
    a, g, rep = result.best()
    assert rep.terminal_profit_pct == max(
        c.terminal_profit_pct for c in result.cells.values() if c is not None
    )


def test_positive_gamma_delays_reallocation():
    ds = load_bundled_dataset()
    res = sweep_grid(ds, [1.001, 1.01], [0.0, 0.5], StrategyParams(alpha=2.0), W)
    for a in (1.001, 1.01):
        assert res.cells[(a, 0.5)].reallocation_count < res.cells[(a, 0.0)].reallocation_count


def test_input_validation():
    ds = make_dataset([1.0, 1.0])
    with pytest.raises(InvalidParameter):
        run_backtest(ds, StrategyParams(alpha=2.0), 0.0)
    with pytest.raises(InvalidParameter):
        run_backtest(make_dataset([1.0]), StrategyParams(alpha=2.0), 1.0)
    with pytest.raises(InvalidParameter):
        sweep_grid(ds, [], [0.0], StrategyParams(alpha=2.0))
    only_bad = sweep_grid(make_dataset([4.0, 4.0]), [1.01], [-1.0], StrategyParams(alpha=2.0))
    with pytest.raises(InvalidParameter):
        only_bad.best()
