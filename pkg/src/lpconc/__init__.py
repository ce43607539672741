"""Simulation, backtesting and optimization of concentrated-liquidity provision."""

from .amm import (
    Position,
    PriceInterval,
    Reserves,
    active_fraction,
    hold_value,
    liquidity_for_symmetric,
    position_value,
    reserves_for,
)
from .engine import (
    LpState,
    Side,
    StepEvents,
    StrategyParams,
    StrategyRun,
    rebalance_holdings,
    run_strategy,
    should_reallocate,
    simulate_batch,
    step,
)
from .errors import FetchError, IngestionError, InvalidData, InvalidParameter, LpconcError
from .stochastic import GbmParams, estimate_sigma, sample_gbm_paths

__version__ = "0.1.0"

__all__ = [
    "FetchError",
    "GbmParams",
    "IngestionError",
    "InvalidData",
    "InvalidParameter",
    "LpState",
    "LpconcError",
    "Position",
    "PriceInterval",
    "Reserves",
    "Side",
    "StepEvents",
    "StrategyParams",
    "StrategyRun",
    "active_fraction",
    "estimate_sigma",
    "hold_value",
    "liquidity_for_symmetric",
    "position_value",
    "rebalance_holdings",
    "reserves_for",
    "run_strategy",
    "sample_gbm_paths",
    "should_reallocate",
    "simulate_batch",
    "step",
]
