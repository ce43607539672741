"""Constant-product concentrated-liquidity math.

Prices are square roots of the marginal exchange rate ``y / x`` (token ``y``
is the numeraire). All values returned in "y-units" are denominated in the
numeraire token.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .errors import InvalidParameter


def _check_price(price: float, name: str = "price") -> float:
    price = float(price)
    if not (price > 0.0 and math.isfinite(price)):
        raise InvalidParameter(f"{name} must be a positive finite sqrt price, got {price!r}")
    return price


@dataclass(frozen=True)
class PriceInterval:
    """Closed sqrt-price interval ``[lower, upper]`` of a position."""

    lower: float
    upper: float

    def __post_init__(self) -> None:
        _check_price(self.lower, "lower")
        _check_price(self.upper, "upper")
        if not self.lower < self.upper:
            raise InvalidParameter(f"interval bounds must satisfy lower < upper, got [{self.lower}, {self.upper}]")

    @classmethod
    def symmetric(cls, price: float, alpha: float) -> PriceInterval:
        """Interval ``[price / alpha, alpha * price]``."""
        if not alpha > 1.0:
            raise InvalidParameter(f"alpha must exceed 1, got {alpha!r}")
        return cls(price / alpha, price * alpha)

    def contains(self, price: float) -> bool:
        return self.lower <= price <= self.upper


class Reserves(NamedTuple):
    """Token amounts ``(x, y)``."""

    x: float
    y: float

    def value(self, price: float) -> float:
        """Value in y-units at sqrt price ``price``."""
        return price * price * self.x + self.y


@dataclass(frozen=True)
class Position:
    """A liquidity position: liquidity ``L`` over a sqrt-price interval."""

    liquidity: float
    interval: PriceInterval

    def __post_init__(self) -> None:
        if not self.liquidity >= 0.0:
            raise InvalidParameter(f"liquidity must be nonnegative, got {self.liquidity!r}")


def reserves_for(position: Position, price: float) -> Reserves:
    """Real token reserves backing ``position`` at sqrt price ``price``.

    Below the interval the position holds only ``x``, above it only ``y``.
    The middle formula is used on the closed interval; both boundary
    formulas coincide, so the mapping is continuous.
    """
    liq = position.liquidity
    lo, hi = position.interval.lower, position.interval.upper
    if price < lo:
        return Reserves(liq * (1.0 / lo - 1.0 / hi), 0.0)
    if price > hi:
        return Reserves(0.0, liq * (hi - lo))
    return Reserves(liq * (1.0 / price - 1.0 / hi), liq * (price - lo))


def symmetric_liquidity_multiplier(alpha: float) -> float:
    """``alpha / (alpha - 1)``: liquidity per unit of ``y / price`` for a symmetric interval."""
    return alpha / (alpha - 1.0)


def liquidity_for_symmetric(holdings_value: float, price: float, alpha: float) -> tuple[Position, Reserves]:
    """Deposit ``holdings_value`` (balanced 50/50) into ``[price / alpha, alpha * price]``.

    Returns the opened position and the deposited reserves. The reserves
    satisfy ``y = price**2 * x``, which is exactly the ratio the symmetric
    interval requires.
    """
    price = _check_price(price)
    if not alpha > 1.0:
        raise InvalidParameter(f"alpha must exceed 1, got {alpha!r}")
    if holdings_value < 0.0:
        raise InvalidParameter(f"holdings_value must be nonnegative, got {holdings_value!r}")
    y = 0.5 * holdings_value
    x = y / (price * price)
    liquidity = symmetric_liquidity_multiplier(alpha) * y / price
    return Position(liquidity, PriceInterval.symmetric(price, alpha)), Reserves(x, y)


def active_fraction(prev_price: float, price: float, interval: PriceInterval) -> float:
    """Fraction of the step ``prev_price -> price`` spent inside ``interval``.

    The marginal price (squared sqrt price) is assumed to move linearly over
    the step. When ``prev_price`` lies inside the interval this is exactly
    the exit interpolation ``(P_prev - P_l) / (P_prev - P)`` resp.
    ``(P_u - P_prev) / (P - P_prev)``. A step that starts outside and
    re-enters is credited with the re-entered share; a step that stays
    outside (including a flat step) earns nothing.
    """
    p0 = prev_price * prev_price
    p1 = price * price
    lo = interval.lower * interval.lower
    hi = interval.upper * interval.upper
    if p0 == p1:
        return 1.0 if lo <= p1 <= hi else 0.0
    a, b = (p0, p1) if p0 < p1 else (p1, p0)
    overlap = min(b, hi) - max(a, lo)
    if overlap <= 0.0:
        return 0.0
    return min(1.0, max(0.0, overlap / (b - a)))


def position_value(position: Position, price: float, unclaimed_fees: float = 0.0) -> float:
    """Mark-to-market value in y-units, including unclaimed fees."""
    return reserves_for(position, price).value(price) + unclaimed_fees


def hold_value(initial: Reserves, price: float) -> float:
    """Value of simply holding ``initial`` at sqrt price ``price``."""
    return price * price * initial.x + initial.y
