"""Sample average approximation of the interval-width problem.

For a fixed ``alpha`` and a fixed price path the reallocation decisions
are fully determined, so the SAA objective (mean terminal wealth over the
sampled paths) is evaluated exactly by forward simulation. The objective
is piecewise smooth in ``alpha`` with jumps wherever the number of
reallocations changes, hence the global grid followed by a local
golden-section refinement.
"""

from __future__ import annotations

import math
import statistics
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .amm import active_fraction, reserves_for
from .engine import Side, StrategyParams, StrategyRun, simulate_batch
from .errors import InvalidParameter
from .stochastic import GbmParams, sample_gbm_paths

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class SaaConfig:
    num_paths: int
    horizon: int
    seed: int = 0
    alpha_low: float = 1.01
    alpha_high: float = 4.0
    grid_step: float = 0.01
    refine_tolerance: float = 1e-4

    def __post_init__(self) -> None:
        if self.num_paths < 1 or self.horizon < 1:
            raise InvalidParameter("num_paths and horizon must be at least 1")
        if not 1.0 < self.alpha_low < self.alpha_high:
            raise InvalidParameter(f"need 1 < alpha_low < alpha_high, got ({self.alpha_low}, {self.alpha_high})")
        if not self.grid_step > 0.0 or not self.refine_tolerance > 0.0:
            raise InvalidParameter("grid_step and refine_tolerance must be positive")

    def grid(self) -> np.ndarray:
        n = int(round((self.alpha_high - self.alpha_low) / self.grid_step)) + 1
        return np.linspace(self.alpha_low, self.alpha_high, max(n, 2))


@dataclass
class OptimizationResult:
    alpha_star: float
    objective_value: float
    seed: int
    evaluations: int
    wall_time: float
    grid: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))
    grid_values: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))


@dataclass
class OptimizationSummary:
    """Repeated optimizations over consecutive seeds."""

    results: list[OptimizationResult]

    @property
    def alphas(self) -> list[float]:
        return [r.alpha_star for r in self.results]

    @property
    def runtimes(self) -> list[float]:
        return [r.wall_time for r in self.results]

    @staticmethod
    def _describe(values: list[float]) -> dict[str, float]:
        return {
            "mean": statistics.fmean(values),
            "median": statistics.median(values),
            "min": min(values),
            "max": max(values),
            "std": statistics.stdev(values) if len(values) > 1 else 0.0,
        }

    def alpha_stats(self) -> dict[str, float]:
        return self._describe(self.alphas)

    def runtime_stats(self) -> dict[str, float]:
        return self._describe(self.runtimes)


def saa_objective(
    alpha: float | np.ndarray,
    paths: np.ndarray,
    fee_rate: float | np.ndarray,
    params: StrategyParams,
    initial_wealth: float,
) -> float | np.ndarray:
    """Mean terminal wealth over ``paths`` for one or many ``alpha`` values."""
    paths = np.atleast_2d(paths)
    if paths.shape[0] == 0:
        raise InvalidParameter("need at least one path")
    scalar = np.ndim(alpha) == 0
    batch = simulate_batch(np.atleast_1d(alpha), paths, fee_rate, params, initial_wealth)
    means = batch.terminal_wealth.mean(axis=1)
    return float(means[0]) if scalar else means


def golden_section_max(
    f: Callable[[float], float], lo: float, hi: float, tol: float, max_iter: int = 200
) -> tuple[float, float, int]:
    """Maximize ``f`` on ``[lo, hi]``; returns ``(x, f(x), evaluations)``."""
    x1 = hi - GOLDEN * (hi - lo)
    x2 = lo + GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    evals = 2
    while hi - lo > tol and evals < max_iter:
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - GOLDEN * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + GOLDEN * (hi - lo)
            f2 = f(x2)
        evals += 1
    return (x1, f1, evals) if f1 >= f2 else (x2, f2, evals)


def _first_best(values: np.ndarray) -> int:
    top = float(np.max(values))
    tied = np.flatnonzero(values >= top - TIE_RTOL * max(1.0, abs(top)))
    return int(tied[0])


def optimize_alpha(
    config: SaaConfig,
    gbm: GbmParams,
    fee_rate: float | np.ndarray,
    *,
    gas_cost: float = 109.8,
    trade_fee: float = 0.0005,
    gamma: float = 0.0,
    initial_wealth: float = 100_000.0,
    paths: np.ndarray | None = None,
) -> OptimizationResult:
    """Maximize the SAA objective over ``alpha`` in the configured bounds.

    Paths are sampled once from ``gbm`` with ``config.seed`` unless given.
    Ties (within a relative ``1e-12``) resolve to the smallest ``alpha``.
    """
    start = time.perf_counter()
    if paths is None:
        paths = sample_gbm_paths(gbm, config.num_paths, config.horizon, config.seed)
    params = StrategyParams(alpha=config.alpha_high, gamma=gamma, gas_cost=gas_cost, trade_fee=trade_fee)

    grid = config.grid()
    values = saa_objective(grid, paths, fee_rate, params, initial_wealth)
    i = _first_best(values)
    best_alpha, best_value = float(grid[i]), float(values[i])
    evaluations = grid.size

    lo = float(grid[max(i - 1, 0)])
    hi = float(grid[min(i + 1, grid.size - 1)])
    if hi - lo > config.refine_tolerance:
        x, fx, n = golden_section_max(
            lambda a: saa_objective(a, paths, fee_rate, params, initial_wealth), lo, hi, config.refine_tolerance
        )
        evaluations += n
        if fx > best_value + TIE_RTOL * max(1.0, abs(best_value)):
            best_alpha, best_value = x, fx

    return OptimizationResult(
        alpha_star=best_alpha,
        objective_value=best_value,
        seed=config.seed,
        evaluations=evaluations,
        wall_time=time.perf_counter() - start,
        grid=grid,
        grid_values=values,
    )


def optimize_alpha_repeated(config: SaaConfig, gbm: GbmParams, fee_rate, repeats: int, **kwargs) -> OptimizationSummary:
    """Run :func:`optimize_alpha` for seeds ``config.seed + r``, ``r < repeats``."""
    results = []
    for r in range(repeats):
        cfg = SaaConfig(**{**config.__dict__, "seed": config.seed + r})
        results.append(optimize_alpha(cfg, gbm, fee_rate, **kwargs))
    return OptimizationSummary(results)


@dataclass(frozen=True)
class FeasibilityReport:
    ok: bool
    constraint: str | None = None
    t: int | None = None
    residual: float = 0.0

    def __bool__(self) -> bool:
        return self.ok


def _close(a: float, b: float, tol: float) -> float:
    """Relative residual, or 0 when within tolerance."""
    r = abs(a - b) / max(1.0, abs(a), abs(b))
    return 0.0 if r <= tol else r


def check_feasibility(
    run: StrategyRun,
    path,
    params: StrategyParams,
    tolerance: float = 1e-9,
    fee_rates=None,
) -> FeasibilityReport:
    """Verify a trajectory against the constraint families of the mixed-integer model.

    Checks, at every step, the trigger binaries, the interval update,
    withdrawn reserves, rebalance value and balance, holdings carry-over,
    the liquidity update, the interpolated fee rate, fee accumulation and
    sign constraints. Returns the first violation found, scanning steps in
    order and constraints in that order within a step.
    """
    prices = np.asarray(path, dtype=float)
    horizon = prices.size - 1
    rates = np.full(horizon, params.fee_rate) if fee_rates is None else np.broadcast_to(
        np.asarray(fee_rates, dtype=float), (horizon,)
    )
    alpha, gamma = params.alpha, params.gamma
    mult = alpha / (alpha - 1.0)
    tol = tolerance

    def fail(name: str, t: int, res: float) -> FeasibilityReport:
        return FeasibilityReport(False, name, t, res)

    if not alpha > 1.0:
        return fail("alpha_bound", 0, 1.0 - alpha)
    init = run.initial_state
    p0 = prices[0]
    for name, got, want in (
        ("initial_interval_lower", init.position.interval.lower, p0 / alpha),
        ("initial_interval_upper", init.position.interval.upper, p0 * alpha),
        ("initial_balance", init.holdings.y, p0 * p0 * init.holdings.x),
        ("initial_liquidity", init.position.liquidity, mult * init.holdings.y / p0),
    ):
        if r := _close(got, want, tol):
            return fail(name, 0, r)

    prev = init
    prev_realloc = False
    for t, (st, ev) in enumerate(run.trajectory, start=1):
        pt, pp = prices[t], prices[t - 1]
        Pt, Pp = pt * pt, pp * pp
        lo, hi = prev.position.interval.lower, prev.position.interval.upper
        L0 = prev.position.liquidity
        zl = ev.side is Side.BELOW
        zu = ev.side is Side.ABOVE
        zm = ev.side is Side.INSIDE
        final = t == horizon
        z = ev.reallocated

        # trigger logic, with a tolerance band around the thresholds
        band = tol * max(1.0, pt)
        if (pt < lo - gamma - band and not zl) or (pt > lo - gamma + band and zl):
            return fail("trigger_lower", t, abs(pt - (lo - gamma)))
        if (pt > hi + gamma + band and not zu) or (pt < hi + gamma - band and zu):
            return fail("trigger_upper", t, abs(pt - (hi + gamma)))
        if int(zl) + int(zm) + int(zu) != 1:
            return fail("trigger_mid", t, 1.0)
        if not final and not ev.ruined and z != (zl or zu):
            return fail("trigger_any", t, 1.0)
        if final and z:
            return fail("trigger_any", t, 1.0)

        # withdrawn reserves of the previous position at the current price
        if gamma == 0.0:
            xw = (L0 * (1.0 / lo - 1.0 / hi) if zl else 0.0) + (L0 * (1.0 / pt - 1.0 / hi) if zm else 0.0)
            yw = (L0 * (pt - lo) if zm else 0.0) + (L0 * (hi - lo) if zu else 0.0)
        else:
            xw, yw = reserves_for(prev.position, pt)
        if r := _close(ev.withdrawn.x, xw, tol):
            return fail("withdraw_x", t, r)
        if r := _close(ev.withdrawn.y, yw, tol):
            return fail("withdraw_y", t, r)

        # fee rate earned over the step
        cbar = rates[t - 1]
        if gamma == 0.0:
            cf = cbar if zm else 0.0
            if zl:
                cf = (Pp - lo * lo) / (Pp - Pt) * cbar
            elif zu:
                cf = (hi * hi - Pp) / (Pt - Pp) * cbar
        else:
            cf = active_fraction(pp, pt, prev.position.interval) * cbar
        if r := _close(ev.fee_rate_earned, cf, tol):
            return fail("fee_rate", t, r)
        carried = 0.0 if prev_realloc else prev.unclaimed_fees
        if r := _close(st.unclaimed_fees, carried + ev.fee_rate_earned * L0, tol) if not ev.ruined else 0.0:
            return fail("fee_accumulation", t, r)
        if r := _close(ev.fees_accrued, ev.fee_rate_earned * L0, tol):
            return fail("fee_accumulation", t, r)

        if ev.ruined:
            break

        # interval update
        want_lo = pt / alpha if z else lo
        want_hi = pt * alpha if z else hi
        if r := _close(st.position.interval.lower, want_lo, tol):
            return fail("interval_lower", t, r)
        if r := _close(st.position.interval.upper, want_hi, tol):
            return fail("interval_upper", t, r)

        x, y = st.holdings
        if z:
            lhs = Pt * x + y
            rhs = Pt * ev.withdrawn.x + ev.withdrawn.y - params.trade_fee * abs(y - ev.withdrawn.y)
            rhs += -params.gas_cost + st.unclaimed_fees
            if r := _close(lhs, rhs, tol):
                return fail("rebalance_value", t, r)
            if r := _close(y, Pt * x, tol):
                return fail("rebalance_balance", t, r)
            want_l = mult * y / pt
        else:
            if r := _close(x, ev.withdrawn.x, tol):
                return fail("carry_x", t, r)
            if r := _close(y, ev.withdrawn.y, tol):
                return fail("carry_y", t, r)
            want_l = L0
        if r := _close(st.position.liquidity, want_l, tol):
            return fail("liquidity", t, r)

        for name, val in (
            ("sign_interval", st.position.interval.lower),
            ("sign_withdrawn", min(ev.withdrawn.x, ev.withdrawn.y)),
            ("sign_holdings", min(x, y)),
            ("sign_liquidity", st.position.liquidity),
            ("sign_fee_rate", ev.fee_rate_earned),
            ("sign_fees", st.unclaimed_fees),
        ):
            if val < -tol:
                return fail(name, t, -val)

        prev, prev_realloc = st, z
    return FeasibilityReport(True)
