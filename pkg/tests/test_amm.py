import math
from fractions import Fraction

import numpy as np
import pytest

from lpconc import InvalidParameter
from lpconc.amm import (
    Position,
    PriceInterval,
    Reserves,
    active_fraction,
    hold_value,
    liquidity_for_symmetric,
    position_value,
    reserves_for,
)

POS = Position(6.0, PriceInterval(1.0, 3.0))


@pytest.mark.parametrize(
    "price, expected",
    [(2.0, (1.0, 6.0)), (0.5, (4.0, 0.0)), (5.0, (0.0, 12.0)), (1.0, (4.0, 0.0)), (3.0, (0.0, 12.0))],
)
def test_reserves_cases(price, expected):
    assert reserves_for(POS, price) == pytest.approx(expected, abs=1e-15)


def test_reserves_match_exact_rational_oracle(rng):
    for _ in range(200):
        lo = Fraction(int(rng.integers(1, 100)), 7)
        hi = lo + Fraction(int(rng.integers(1, 100)), 11)
        liq = Fraction(int(rng.integers(1, 10_000)), 3)
        p = Fraction(int(rng.integers(1, 400)), 13)
        clamped = min(max(p, lo), hi)
        want_x = liq * (1 / clamped - 1 / hi)
        want_y = liq * (clamped - lo)
        got = reserves_for(Position(float(liq), PriceInterval(float(lo), float(hi))), float(p))
        assert got.x == pytest.approx(float(want_x), rel=1e-13, abs=1e-12)
        assert got.y == pytest.approx(float(want_y), rel=1e-13, abs=1e-12)


def test_reserves_monotone_in_price():
    prices = np.linspace(0.2, 6.0, 500)
    res = np.array([reserves_for(POS, p) for p in prices])
    assert np.all(np.diff(res[:, 0]) <= 0.0)
    assert np.all(np.diff(res[:, 1]) >= 0.0)


def test_interval_validation():
    with pytest.raises(InvalidParameter):
        PriceInterval(2.0, 2.0)
    with pytest.raises(InvalidParameter):
        PriceInterval(-1.0, 2.0)
    with pytest.raises(InvalidParameter):
        PriceInterval.symmetric(2.0, 1.0)
    with pytest.raises(InvalidParameter):
        Position(-1.0, PriceInterval(1.0, 2.0))


def test_symmetric_deposit_example():
    pos, res = liquidity_for_symmetric(12.0, 2.0, 2.0)
    assert (pos.interval.lower, pos.interval.upper) == (1.0, 4.0)
    assert pos.liquidity == 6.0
    assert res == (1.5, 6.0)


def test_symmetric_deposit_limits():
    pos, _ = liquidity_for_symmetric(1000.0, 3.0, 1e9)
    assert pos.liquidity == pytest.approx(1000.0 / 6.0, rel=1e-8)
    pos, res = liquidity_for_symmetric(0.0, 3.0, 2.0)
    assert pos.liquidity == 0.0
    assert res == (0.0, 0.0)
    with pytest.raises(InvalidParameter):
        liquidity_for_symmetric(-1.0, 3.0, 2.0)


def test_deposit_reserves_are_backed_by_position(rng):
    for _ in range(100):
        p, a, w = rng.uniform(0.1, 100), rng.uniform(1.001, 10), rng.uniform(1, 1e6)
        pos, res = liquidity_for_symmetric(w, p, a)
        back = reserves_for(pos, p)
        assert back.x == pytest.approx(res.x, rel=1e-12)
        assert back.y == pytest.approx(res.y, rel=1e-12)
        assert res.value(p) == pytest.approx(w, rel=1e-14)


@pytest.mark.parametrize(
    "p0sq, p1sq, lo_sq, hi_sq, expected",
    [
        (4.0, 6.0, 1.0, 5.0, 0.5),  # exit above
        (4.0, 2.0, 3.0, 10.0, 0.5),  # exit below
        (4.0, 4.5, 1.0, 5.0, 1.0),  # stays inside
        (6.0, 7.0, 1.0, 5.0, 0.0),  # stays above
        (6.0, 4.0, 1.0, 5.0, 0.5),  # re-enters from above
        (5.0, 5.0, 1.0, 5.0, 1.0),  # flat on the boundary
        (6.0, 6.0, 1.0, 5.0, 0.0),  # flat outside
        (0.5, 6.0, 1.0, 5.0, 4.0 / 5.5),  # crosses the whole interval
    ],
)
def test_active_fraction(p0sq, p1sq, lo_sq, hi_sq, expected):
    interval = PriceInterval(math.sqrt(lo_sq), math.sqrt(hi_sq))
    got = active_fraction(math.sqrt(p0sq), math.sqrt(p1sq), interval)
    assert got == pytest.approx(expected, rel=1e-12, abs=1e-15)


def test_active_fraction_matches_exit_interpolation(rng):
    # prev inside: the overlap form equals the two-sided exit interpolation
    for _ in range(500):
        lo, hi = sorted(rng.uniform(0.5, 5.0, 2))
        if hi - lo < 1e-3:
            continue
        interval = PriceInterval(lo, hi)
        prev = rng.uniform(lo, hi)
        cur = rng.uniform(0.1, 6.0)
        P, Pp = cur * cur, prev * prev
        if cur < lo:
            want = (Pp - lo * lo) / (Pp - P)
        elif cur > hi:
            want = (hi * hi - Pp) / (P - Pp)
        else:
            want = 1.0
        assert active_fraction(prev, cur, interval) == pytest.approx(want, rel=1e-9, abs=1e-12)


def test_position_value_cases():
    assert position_value(POS, 2.0) == 10.0
    assert position_value(Position(0.0, POS.interval), 1.7, 7.0) == 7.0
    assert position_value(POS, 5.0, 1.0) == 13.0


def test_hold_value():
    assert hold_value(Reserves(1.0, 1350.0), math.sqrt(1350.0)) == pytest.approx(2700.0, rel=1e-15)
    assert hold_value(Reserves(0.0, 5.0), 123.0) == 5.0
    res = Reserves(2.0, 8.0)
    assert hold_value(res, 2.0) == res.value(2.0) == 16.0
