"""Cutting strategies.

Each strategy exists twice: as a plain function over Fraction heights (the
readable definition) and as a bound integer kernel used by the engine's run
loop.  Both break ties toward the lowest index; since rates are stored in
non-increasing order, that is also the fastest of the tied bamboo.

Thresholds ("height at least x", "height at least 1") are tested on the
intermediate heights, i.e. after growth and before the cut of the same step.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .engine import RateVector, as_rational

TWO = Fraction(2)


class Kind(enum.Enum):
    REDUCE_MAX = "reduce-max"
    REDUCE_FASTEST = "reduce-fastest"
    DEADLINE_DRIVEN = "deadline-driven"


def reduce_max_choose(heights: Sequence[Fraction]) -> int:
    if not heights:
        raise ValueError("empty garden")
    best = 0
    for k in range(1, len(heights)):
        if heights[k] > heights[best]:
            best = k
    return best


def reduce_fastest_choose(x: Fraction, heights: Sequence[Fraction], rates: Optional[RateVector] = None) -> Optional[int]:
    """Fastest bamboo of height at least ``x``, or None.

    ``rates`` only documents the sorted-order assumption; with rates sorted
    the fastest qualifying bamboo is the first one.
    """
    if x <= 0:
        raise ValueError("threshold must be positive")
    for k, h in enumerate(heights):
        if h >= x:
            return k
    return None


def dds_deadline(height: Fraction, rate: Fraction, now: int) -> int:
    """Step at which a requested cup left alone first reaches height 2.

    The unique integer ``t`` with ``height + (t - now) * rate`` in ``[2, 2 + rate)``.
    For a cup already past ``2 + rate`` this lies before ``now``.
    """
    if height < 1:
        raise ValueError(f"height {height} < 1: only requested cups have deadlines")
    return now + math.ceil((TWO - height) / rate)


def deadline_driven_choose(heights: Sequence[Fraction], rates: Sequence[Fraction], now: int = 0) -> Optional[int]:
    best = None
    best_deadline = None
    for k, h in enumerate(heights):
        if h < 1:
            continue
        dl = dds_deadline(h, rates[k], now)
        if best is None or dl < best_deadline:
            best, best_deadline = k, dl
    return best


@dataclass(frozen=True)
class StrategyRef:
    kind: Kind
    threshold: Optional[Fraction] = None

    def __post_init__(self):
        if self.kind is Kind.REDUCE_FASTEST:
            if self.threshold is None or self.threshold <= 0:
                raise ValueError("reduce-fastest needs a threshold x > 0")
        elif self.threshold is not None:
            raise ValueError(f"{self.kind.value} takes no threshold")

    def __str__(self) -> str:
        if self.kind is Kind.REDUCE_FASTEST:
            return f"{self.kind.value}:{self.threshold.numerator}/{self.threshold.denominator}"
        return self.kind.value

    def choose(self, heights: Sequence[Fraction], rates: RateVector, now: int = 0) -> Optional[int]:
        if self.kind is Kind.REDUCE_MAX:
            return reduce_max_choose(heights)
        if self.kind is Kind.REDUCE_FASTEST:
            return reduce_fastest_choose(self.threshold, heights, rates)
        return deadline_driven_choose(heights, rates, now)

    def bind(self, rates: RateVector, dtype=np.int64):
        """Integer kernel over heights in units of ``1 / rates.scale``."""
        d = rates.scale
        if self.kind is Kind.REDUCE_MAX:
            def choose(h, now):
                return int(np.argmax(h))
            return choose

        if self.kind is Kind.REDUCE_FASTEST:
            # h / d >= x  <=>  h >= ceil(x * d)
            cutoff = math.ceil(self.threshold * d)

            def choose(h, now):
                hit = h >= cutoff
                k = int(np.argmax(hit))
                return k if hit[k] else None
            return choose

        a = np.array(rates.units, dtype=dtype)
        two = 2 * d
        never = np.iinfo(np.int64).max if dtype is np.int64 else math.inf

        def choose(h, now):
            requested = h >= d
            if not requested.any():
                return None
            # steps until reaching 2: ceil((2d - h) / a), exact for any sign
            wait = (two - h + a - 1) // a
            wait = np.where(requested, wait, never)
            return int(np.argmin(wait))
        return choose


REDUCE_MAX = StrategyRef(Kind.REDUCE_MAX)
DEADLINE_DRIVEN = StrategyRef(Kind.DEADLINE_DRIVEN)


def reduce_fastest(x) -> StrategyRef:
    return StrategyRef(Kind.REDUCE_FASTEST, as_rational(x))


def parse_strategy(text: str) -> StrategyRef:
    """Parse ``reduce-max``, ``reduce-fastest:<p>/<q>`` or ``deadline-driven``."""
    name, _, arg = text.strip().partition(":")
    try:
        kind = Kind(name)
    except ValueError:
        raise ValueError(f"unknown strategy {text!r}") from None
    if kind is Kind.REDUCE_FASTEST:
        if not arg:
            raise ValueError("reduce-fastest needs a threshold, e.g. reduce-fastest:2/1")
        try:
            x = Fraction(arg)
        except ValueError:
            raise ValueError(f"bad threshold {arg!r}") from None
        return StrategyRef(kind, x)
    if arg:
        raise ValueError(f"{name} takes no argument")
    return StrategyRef(kind)
