"""Discrete-time reallocation strategy for a single LP.

At every step the LP accrues fees on the liquidity it held over the step,
then checks whether the price left its interval (shifted outward by
``gamma``). On a trigger the position is closed, unclaimed fees are
claimed, holdings are rebalanced to the 50/50 ratio (paying the trading fee
on the swapped volume and a lump gas cost) and a new symmetric interval is
opened around the current price.

Two implementations of the dynamics live here: :func:`step` /
:func:`run_strategy` operate on explicit state objects and record a full
trajectory; :func:`simulate_batch` is an array kernel evaluating many
``(alpha, path)`` pairs at once for Monte Carlo objectives. The test suite
keeps them in agreement.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .amm import (
    Position,
    PriceInterval,
    Reserves,
    active_fraction,
    liquidity_for_symmetric,
    reserves_for,
    symmetric_liquidity_multiplier,
)
from .errors import InvalidParameter, LpconcError


class Side(enum.Enum):
    BELOW = "below"
    INSIDE = "inside"
    ABOVE = "above"


class WealthExhausted(LpconcError):
    """Reallocation costs consumed all remaining wealth."""


@dataclass(frozen=True)
class StrategyParams:
    """Parameters of one strategy run.

    ``fee_rate`` is the per-step fee income per unit of liquidity for an
    always-active position; runs over historical data pass a per-step
    series to :func:`run_strategy` instead.
    """

    alpha: float
    gamma: float = 0.0
    gas_cost: float = 109.8
    trade_fee: float = 0.0005
    fee_rate: float = 0.0

    def __post_init__(self) -> None:
        if not self.alpha > 1.0 or not math.isfinite(self.alpha):
            raise InvalidParameter(f"alpha must be a finite number > 1, got {self.alpha!r}")
        if not 0.0 <= self.trade_fee < 1.0:
            raise InvalidParameter(f"trade_fee must lie in [0, 1), got {self.trade_fee!r}")
        if not self.gas_cost >= 0.0:
            raise InvalidParameter(f"gas_cost must be nonnegative, got {self.gas_cost!r}")
        if not self.fee_rate >= 0.0:
            raise InvalidParameter(f"fee_rate must be nonnegative, got {self.fee_rate!r}")
        if not math.isfinite(self.gamma):
            raise InvalidParameter(f"gamma must be finite, got {self.gamma!r}")

    def with_alpha(self, alpha: float) -> StrategyParams:
        return replace(self, alpha=alpha)


@dataclass(frozen=True)
class LpState:
    """LP state after the accounting of one step.

    ``unclaimed_fees`` follows the accumulation rule literally: on a
    reallocation step it still shows the amount that was just claimed into
    ``holdings``, and the next step starts accumulating from zero.
    """

    position: Position
    holdings: Reserves
    unclaimed_fees: float
    price: float
    reallocated_last_step: bool = False
    ruined: bool = False

    def wealth(self) -> float:
        if self.ruined:
            return 0.0
        value = self.holdings.value(self.price)
        if not self.reallocated_last_step:
            value += self.unclaimed_fees
        return value


@dataclass(frozen=True)
class StepEvents:
    side: Side
    reallocated: bool
    active_fraction: float
    fee_rate_earned: float
    fees_accrued: float
    withdrawn: Reserves
    trade_volume: float = 0.0
    trade_cost_paid: float = 0.0
    gas_paid: float = 0.0
    ruined: bool = False


@dataclass
class StrategyRun:
    """Result of :func:`run_strategy`.

    ``trajectory[k]`` holds the state and events of step ``t = k + 1``.
    When the run is ruined the trajectory ends at the ruin step.
    """

    initial_state: LpState
    trajectory: list[tuple[LpState, StepEvents]] = field(default_factory=list)
    terminal_wealth: float = 0.0
    ruin_step: int | None = None

    @property
    def reallocation_count(self) -> int:
        return sum(ev.reallocated for _, ev in self.trajectory)

    @property
    def total_fees(self) -> float:
        return sum(ev.fees_accrued for _, ev in self.trajectory)

    @property
    def steps_completed(self) -> int:
        return len(self.trajectory)


def should_reallocate(price: float, interval: PriceInterval, gamma: float = 0.0) -> Side | None:
    """Trigger side for the price ``price`` against the previous interval.

    Fires ``BELOW`` when ``price <= lower - gamma`` and ``ABOVE`` when
    ``price >= upper + gamma``; ``gamma > 0`` delays and ``gamma < 0``
    advances reallocation.
    """
    lo = interval.lower - gamma
    hi = interval.upper + gamma
    if lo >= hi:
        raise InvalidParameter(
            f"gamma={gamma} makes the trigger bounds cross for interval [{interval.lower}, {interval.upper}]"
        )
    if price <= lo:
        return Side.BELOW
    if price >= hi:
        return Side.ABOVE
    return None


def rebalance_holdings(
    withdrawn: Reserves,
    unclaimed_fees: float,
    price: float,
    trade_fee: float,
    gas_cost: float,
) -> Reserves:
    """Balanced holdings ``y = price**2 * x`` after claiming fees and paying costs.

    Solves ``2 y = V - trade_fee * |y - y_withdrawn|`` with
    ``V = price**2 * x_withdrawn + y_withdrawn + fees - gas``. The left side
    minus the right side is strictly increasing in ``y``, so the solution is
    unique; the branch is chosen by comparing ``V`` with ``2 * y_withdrawn``.
    """
    p2 = price * price
    budget = p2 * withdrawn.x + withdrawn.y + unclaimed_fees - gas_cost
    if budget <= 0.0:
        raise WealthExhausted(f"wealth after costs is {budget:.6g}")
    yw = withdrawn.y
    if budget > 2.0 * yw:
        y = (budget + trade_fee * yw) / (2.0 + trade_fee)
    else:
        y = (budget - trade_fee * yw) / (2.0 - trade_fee)
    if y <= 0.0:
        raise WealthExhausted(f"trading cost exceeds remaining wealth {budget:.6g}")
    return Reserves(y / p2, y)


def open_position(initial_wealth: float, price: float, params: StrategyParams) -> LpState:
    """Initial state: the full wealth deposited, balanced, free of charge."""
    position, reserves = liquidity_for_symmetric(initial_wealth, price, params.alpha)
    return LpState(position, reserves, 0.0, price)


def _ruined_state(state: LpState, price: float) -> LpState:
    return LpState(Position(0.0, state.position.interval), Reserves(0.0, 0.0), 0.0, price, False, True)


def step(
    state: LpState,
    prev_price: float,
    price: float,
    fee_rate_step: float,
    params: StrategyParams,
    *,
    allow_reallocation: bool = True,
) -> tuple[LpState, StepEvents]:
    """Advance the LP by one step from ``prev_price`` to ``price``.

    With ``allow_reallocation=False`` (the horizon step) the trigger side is
    still evaluated for fee interpolation but the position is only marked
    to market.
    """
    if state.ruined:
        raise InvalidParameter("cannot step a ruined state")
    interval = state.position.interval
    liq = state.position.liquidity

    frac = active_fraction(prev_price, price, interval)
    earned = frac * fee_rate_step
    accrued = earned * liq
    carried = 0.0 if state.reallocated_last_step else state.unclaimed_fees
    fees = carried + accrued

    trigger = should_reallocate(price, interval, params.gamma)
    side = trigger or Side.INSIDE
    withdrawn = reserves_for(state.position, price)

    if trigger is None or not allow_reallocation:
        new_state = LpState(state.position, withdrawn, fees, price)
        return new_state, StepEvents(side, False, frac, earned, accrued, withdrawn)

    try:
        holdings = rebalance_holdings(withdrawn, fees, price, params.trade_fee, params.gas_cost)
    except WealthExhausted:
        events = StepEvents(side, False, frac, earned, accrued, withdrawn, gas_paid=params.gas_cost, ruined=True)
        return _ruined_state(state, price), events

    volume = abs(holdings.y - withdrawn.y)
    new_liq = symmetric_liquidity_multiplier(params.alpha) * holdings.y / price
    position = Position(new_liq, PriceInterval.symmetric(price, params.alpha))
    new_state = LpState(position, holdings, fees, price, reallocated_last_step=True)
    events = StepEvents(
        side,
        True,
        frac,
        earned,
        accrued,
        withdrawn,
        trade_volume=volume,
        trade_cost_paid=params.trade_fee * volume,
        gas_paid=params.gas_cost,
    )
    return new_state, events


def _fee_schedule(fee_rates: float | Sequence[float] | np.ndarray | None, horizon: int, default: float) -> np.ndarray:
    if fee_rates is None:
        return np.full(horizon, float(default))
    arr = np.asarray(fee_rates, dtype=float)
    if arr.ndim == 0:
        return np.full(horizon, float(arr))
    if arr.shape != (horizon,):
        raise InvalidParameter(f"fee rate series must have {horizon} entries, got shape {arr.shape}")
    if np.any(arr < 0.0):
        raise InvalidParameter("fee rates must be nonnegative")
    return arr


def run_strategy(
    path: Sequence[float] | np.ndarray,
    fee_rates: float | Sequence[float] | np.ndarray | None,
    params: StrategyParams,
    initial_wealth: float,
) -> StrategyRun:
    """Run the strategy over sqrt prices ``path[0..T]``.

    ``fee_rates`` gives the always-active fee income per unit liquidity for
    steps ``1..T`` (scalar, length-``T`` series, or ``None`` for
    ``params.fee_rate``). The terminal wealth is the mark-to-market value at
    ``path[T]`` including unclaimed fees; no reallocation is made at ``T``.
    """
    prices = np.asarray(path, dtype=float)
    if prices.ndim != 1 or prices.size < 2:
        raise InvalidParameter("path must contain at least two prices")
    if not np.all(prices > 0.0):
        raise InvalidParameter("path prices must be positive")
    if not initial_wealth > 0.0:
        raise InvalidParameter(f"initial wealth must be positive, got {initial_wealth!r}")
    horizon = prices.size - 1
    rates = _fee_schedule(fee_rates, horizon, params.fee_rate)

    state = open_position(initial_wealth, float(prices[0]), params)
    run = StrategyRun(initial_state=state)
    for t in range(1, horizon + 1):
        state, events = step(
            state,
            float(prices[t - 1]),
            float(prices[t]),
            float(rates[t - 1]),
            params,
            allow_reallocation=t < horizon,
        )
        run.trajectory.append((state, events))
        if state.ruined:
            run.ruin_step = t
            run.terminal_wealth = 0.0
            return run
    run.terminal_wealth = state.wealth()
    return run


@dataclass
class BatchResult:
    """Per-cell outcomes, each of shape ``(n_alpha, n_paths)``.

    ``ruin_step`` is ``-1`` for runs that were not ruined. ``invalid`` marks
    cells whose trigger bounds crossed (only with ``on_cross="mask"``); their
    other entries are meaningless.
    """

    terminal_wealth: np.ndarray
    reallocations: np.ndarray
    ruined: np.ndarray
    total_fees: np.ndarray
    ruin_step: np.ndarray
    invalid: np.ndarray


def simulate_batch(
    alphas: Sequence[float] | np.ndarray,
    sqrt_paths: np.ndarray,
    fee_rates: float | np.ndarray,
    params: StrategyParams,
    initial_wealth: float,
    *,
    on_cross: str = "raise",
) -> BatchResult:
    """Vectorized :func:`run_strategy` over every ``(alpha, path)`` pair.

    ``sqrt_paths`` has shape ``(S, T + 1)``; ``fee_rates`` is a scalar or
    a length-``T`` series shared by all paths. ``params.alpha`` is ignored
    in favour of ``alphas``. With a negative ``gamma`` the trigger bounds of
    a narrow interval can cross; ``on_cross="raise"`` mirrors
    :func:`should_reallocate`, ``"mask"`` flags those cells instead.
    """
    alpha = np.atleast_1d(np.asarray(alphas, dtype=float))[:, None]
    if np.any(alpha <= 1.0):
        raise InvalidParameter("all alphas must exceed 1")
    pi = np.atleast_2d(np.asarray(sqrt_paths, dtype=float))
    n_paths, n_points = pi.shape
    horizon = n_points - 1
    if horizon < 1:
        raise InvalidParameter("paths must contain at least two prices")
    rates = _fee_schedule(fee_rates, horizon, params.fee_rate)
    gamma, c_tr, c_g = params.gamma, params.trade_fee, params.gas_cost

    shape = (alpha.shape[0], n_paths)
    mult = alpha / (alpha - 1.0)
    p0 = pi[:, 0][None, :]
    liq = np.broadcast_to(mult * 0.5 * initial_wealth / p0, shape).copy()
    lo = np.broadcast_to(p0 / alpha, shape).copy()
    hi = np.broadcast_to(p0 * alpha, shape).copy()
    fees = np.zeros(shape)
    claimed = np.zeros(shape, dtype=bool)
    alive = np.ones(shape, dtype=bool)
    count = np.zeros(shape, dtype=np.int64)
    wealth = np.zeros(shape)
    earned = np.zeros(shape)
    ruin_step = np.full(shape, -1, dtype=np.int64)
    invalid = np.zeros(shape, dtype=bool)

    for t in range(1, horizon + 1):
        prev = pi[:, t - 1][None, :]
        cur = pi[:, t][None, :]
        p_prev, p_cur = prev * prev, cur * cur
        lo2, hi2 = lo * lo, hi * hi
        a = np.minimum(p_prev, p_cur)
        b = np.maximum(p_prev, p_cur)
        overlap = np.minimum(b, hi2) - np.maximum(a, lo2)
        span = b - a
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(
                span > 0.0,
                np.clip(np.where(overlap > 0.0, overlap, 0.0) / span, 0.0, 1.0),
                ((p_cur >= lo2) & (p_cur <= hi2)).astype(float),
            )
        accrued = frac * rates[t - 1] * liq
        fees = np.where(claimed, 0.0, fees) + accrued
        earned += np.where(alive, accrued, 0.0)

        trig_lo = lo - gamma
        trig_hi = hi + gamma
        if gamma < 0.0:
            crossed = alive & (trig_lo >= trig_hi)
            if np.any(crossed):
                if on_cross == "raise":
                    raise InvalidParameter(f"gamma={gamma} makes the trigger bounds cross for some interval")
                invalid |= crossed
                alive &= ~crossed

        clipped = np.clip(cur, lo, hi)
        xw = liq * (1.0 / clipped - 1.0 / hi)
        yw = liq * (clipped - lo)
        if t == horizon:
            wealth = p_cur * xw + yw + fees
            break

        fired = alive & ((cur <= trig_lo) | (cur >= trig_hi))

        budget = p_cur * xw + yw + fees - c_g
        y_up = (budget + c_tr * yw) / (2.0 + c_tr)
        y_new = np.where(budget > 2.0 * yw, y_up, (budget - c_tr * yw) / (2.0 - c_tr))
        ruin_now = fired & ((budget <= 0.0) | (y_new <= 0.0))
        ok = fired & ~ruin_now

        liq = np.where(ok, mult * y_new / cur, liq)
        lo = np.where(ok, cur / alpha, lo)
        hi = np.where(ok, cur * alpha, hi)
        claimed = ok
        count += ok
        ruin_step[ruin_now] = t
        alive &= ~ruin_now

    terminal = np.where(alive, wealth, 0.0)
    return BatchResult(terminal, count, ruin_step >= 0, earned, ruin_step, invalid)
