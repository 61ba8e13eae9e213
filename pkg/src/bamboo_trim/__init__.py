"""Exact simulation and verification of bamboo trimming strategies."""

from .constructions import Construction, parse_construction, rf1_fast_slow, rf_x_counter, two_bamboo, uniform
from .engine import (
    BacklogReport,
    GardenState,
    RateVector,
    StepRecord,
    Trace,
    Variant,
    backlog,
    new_game,
    run,
    step,
)
from .strategies import DEADLINE_DRIVEN, REDUCE_MAX, StrategyRef, parse_strategy, reduce_fastest

__version__ = "0.1.0"
