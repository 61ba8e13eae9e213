"""Discrete-time game engine for bamboo trimming and the fixed-rate cup game.

All game quantities are exact.  Public values are :class:`fractions.Fraction`;
internally a run works on integers measured in units of ``1 / scale`` where
``scale`` is the common denominator of the rates.  Every height the game can
produce (sums of rates, resets to zero, subtraction of one whole unit) is an
integer multiple of that unit, so nothing is lost by the change of units.

Time convention: heights are all zero at ``t = 0``.  Step ``t`` (starting at 1)
first grows every bamboo by its rate, producing the *intermediate* heights,
then applies at most one cut.  The post-cut heights of step ``t`` are the
heights at time ``t``.  Strategies decide on the intermediate heights.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import IO, Iterable, Iterator, Optional, Sequence

import numpy as np

Rational = Fraction

IDLE = -1

# Dense height matrices are kept in memory below this many entries; larger
# traces are replayed from their cut sequence on demand.
KEEP_HEIGHTS_LIMIT = 4_000_000


def as_rational(value) -> Fraction:
    """Coerce ints, Fractions and ``"p/q"`` strings to a Fraction.

    Floats are refused: a float has already lost the exact value.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool) or isinstance(value, float):
        raise TypeError(f"refusing inexact value {value!r}; pass a Fraction or 'p/q' string")
    if isinstance(value, (int, str)):
        return Fraction(value)
    raise TypeError(f"cannot interpret {value!r} as a rational")


def format_rational(value: Fraction) -> str:
    """Wire format for rationals: always ``"p/q"``."""
    return f"{value.numerator}/{value.denominator}"


class Variant(enum.Enum):
    FLUSH = "flush"              # a cut resets the bamboo to zero
    UNIT_REMOVE = "unit"         # the emptier removes up to one unit of water

    @classmethod
    def parse(cls, text: str) -> "Variant":
        try:
            return cls(text.lower())
        except ValueError:
            raise ValueError(f"unknown variant {text!r}; expected 'flush' or 'unit'") from None


@dataclass(frozen=True)
class RateVector:
    """Growth rates in non-increasing order.

    ``permutation[k]`` is the caller's original index of the bamboo stored at
    sorted position ``k``.  Build instances with :meth:`of`, which sorts.
    """

    rates: tuple
    budget: Fraction = Fraction(1)
    permutation: tuple = ()

    def __post_init__(self):
        if not self.rates:
            raise ValueError("a garden needs at least one bamboo")
        if not self.permutation:
            object.__setattr__(self, "permutation", tuple(range(len(self.rates))))
        if sorted(self.permutation) != list(range(len(self.rates))):
            raise ValueError("permutation does not match the number of rates")
        for r in self.rates:
            if not isinstance(r, Fraction):
                raise TypeError("rates must be Fractions; use RateVector.of")
            if r <= 0:
                raise ValueError(f"rate {r} is not strictly positive")
        if any(a < b for a, b in zip(self.rates, self.rates[1:])):
            raise ValueError("rates must be sorted in non-increasing order; use RateVector.of")
        if self.total > self.budget:
            raise ValueError(f"rate sum {self.total} exceeds budget {self.budget}")

    @classmethod
    def of(cls, rates: Iterable, budget=1) -> "RateVector":
        values = [as_rational(r) for r in rates]
        order = sorted(range(len(values)), key=lambda k: -values[k])
        return cls(tuple(values[k] for k in order), as_rational(budget), tuple(order))

    def __len__(self) -> int:
        return len(self.rates)

    def __getitem__(self, k: int) -> Fraction:
        return self.rates[k]

    def __iter__(self):
        return iter(self.rates)

    @cached_property
    def total(self) -> Fraction:
        return sum(self.rates, Fraction(0))

    @cached_property
    def scale(self) -> int:
        """Common denominator of all rates (and of every reachable height)."""
        return math.lcm(*(r.denominator for r in self.rates))

    @cached_property
    def units(self) -> tuple:
        """Rates as integers in units of ``1 / scale``."""
        d = self.scale
        return tuple(r.numerator * (d // r.denominator) for r in self.rates)

    def user_index(self, k: int) -> int:
        return self.permutation[k]


def int_dtype(scale: int, horizon: int = 0):
    """int64 when every product the engine and checkers form fits, else object ints."""
    bound = max(8 * scale * scale, 8 * scale * (horizon + 2))
    return np.int64 if bound < 2**62 else object


@dataclass(frozen=True)
class GardenState:
    time: int
    heights: tuple
    variant: Variant
    rates: RateVector

    def __post_init__(self):
        if len(self.heights) != len(self.rates):
            raise ValueError("heights and rates differ in length")
        if any(h < 0 for h in self.heights):
            raise ValueError("heights must be non-negative")


@dataclass(frozen=True)
class StepRecord:
    step: int
    intermediate_heights: tuple
    cut_index: Optional[int]
    post_heights: tuple

    def to_json(self) -> dict:
        return {
            "step": self.step,
            "intermediate": [format_rational(h) for h in self.intermediate_heights],
            "cut": self.cut_index,
            "post": [format_rational(h) for h in self.post_heights],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "StepRecord":
        return cls(
            int(obj["step"]),
            tuple(Fraction(h) for h in obj["intermediate"]),
            obj["cut"],
            tuple(Fraction(h) for h in obj["post"]),
        )


def new_game(rates: RateVector, variant: Variant = Variant.FLUSH) -> GardenState:
    return GardenState(0, (Fraction(0),) * len(rates), variant, rates)


def apply_cut(height: Fraction, variant: Variant) -> Fraction:
    if variant is Variant.FLUSH:
        return Fraction(0)
    return max(Fraction(0), height - 1)


def step(state: GardenState, choice: Optional[int] = None) -> tuple[GardenState, StepRecord]:
    """Grow every bamboo, then cut ``choice`` (or idle when it is None)."""
    n = len(state.heights)
    if choice is not None and not 0 <= choice < n:
        raise IndexError(f"cut index {choice} out of range for {n} bamboo")
    intermediate = tuple(h + r for h, r in zip(state.heights, state.rates))
    post = list(intermediate)
    if choice is not None:
        post[choice] = apply_cut(intermediate[choice], state.variant)
    t = state.time + 1
    record = StepRecord(t, intermediate, choice, tuple(post))
    return GardenState(t, tuple(post), state.variant, state.rates), record


@dataclass
class Trace:
    """Complete history of one run.

    The cut sequence is authoritative; heights are either kept as a dense
    integer matrix (``intermediate_units``, in units of ``rates.scale``) or
    replayed from the cuts when a block is requested.
    """

    rates: RateVector
    variant: Variant
    choices: np.ndarray                     # cut index per step, IDLE for none
    strategy: str = ""
    intermediate_units: Optional[np.ndarray] = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.choices)

    @property
    def horizon(self) -> int:
        return len(self.choices)

    def cut_at(self, t: int) -> Optional[int]:
        c = int(self.choices[t - 1])
        return None if c == IDLE else c

    def blocks(self, rows: Optional[int] = None) -> Iterator[tuple[int, np.ndarray, np.ndarray, np.ndarray]]:
        """Yield ``(first_step, intermediate, post, choices)`` in chunks of steps.

        Heights are integer matrices in units of ``1 / rates.scale``; row ``k``
        belongs to step ``first_step + k``.
        """
        n = len(self.rates)
        if rows is None:
            rows = max(1, min(self.horizon, KEEP_HEIGHTS_LIMIT // n))
        if self.intermediate_units is not None:
            for start in range(0, self.horizon, rows):
                inter = self.intermediate_units[start:start + rows]
                cuts = self.choices[start:start + rows]
                yield start + 1, inter, post_from_intermediate(inter, cuts, self.variant, self.rates.scale), cuts
            return
        d = self.rates.scale
        dtype = int_dtype(d, self.horizon)
        a = np.array(self.rates.units, dtype=dtype)
        h = np.zeros(n, dtype=dtype)
        unit = self.variant is Variant.UNIT_REMOVE
        for start in range(0, self.horizon, rows):
            cuts = self.choices[start:start + rows]
            inter = np.empty((len(cuts), n), dtype=dtype)
            for k, c in enumerate(cuts):
                h += a
                inter[k] = h
                if c != IDLE:
                    h[c] = max(0, h[c] - d) if unit else 0
            yield start + 1, inter, post_from_intermediate(inter, cuts, self.variant, d), cuts

    def records(self) -> Iterator[StepRecord]:
        d = self.rates.scale
        for first, inter, post, cuts in self.blocks():
            for k in range(len(cuts)):
                c = int(cuts[k])
                yield StepRecord(
                    first + k,
                    tuple(Fraction(int(v), d) for v in inter[k]),
                    None if c == IDLE else c,
                    tuple(Fraction(int(v), d) for v in post[k]),
                )

    def write_jsonl(self, fh: IO[str]) -> None:
        for rec in self.records():
            fh.write(json.dumps(rec.to_json()) + "\n")


def post_from_intermediate(inter: np.ndarray, cuts: np.ndarray, variant: Variant, scale: int) -> np.ndarray:
    post = inter.copy()
    rows = np.nonzero(cuts != IDLE)[0]
    cols = cuts[rows].astype(np.int64)
    if variant is Variant.FLUSH:
        post[rows, cols] = 0
    else:
        post[rows, cols] = np.maximum(inter[rows, cols] - scale, 0)
    return post


def read_jsonl(fh: IO[str]) -> list[StepRecord]:
    return [StepRecord.from_json(json.loads(line)) for line in fh if line.strip()]


def run(
    rates: RateVector,
    variant: Variant,
    strategy,
    horizon: int,
    keep_heights: Optional[bool] = None,
) -> Trace:
    """Play ``horizon`` steps, asking ``strategy`` for a cut on each intermediate state.

    ``strategy`` is anything with a ``bind(rates, dtype)`` method returning a
    ``choose(heights_units, now) -> index | None`` callable (see
    :mod:`bamboo_trim.strategies`).
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    n = len(rates)
    d = rates.scale
    dtype = int_dtype(d, horizon)
    if keep_heights is None:
        keep_heights = n * horizon <= KEEP_HEIGHTS_LIMIT
    choose = strategy.bind(rates, dtype)
    a = np.array(rates.units, dtype=dtype)
    h = np.zeros(n, dtype=dtype)
    choices = np.full(horizon, IDLE, dtype=np.int64)
    inter = np.empty((horizon, n), dtype=dtype) if keep_heights else None
    unit = variant is Variant.UNIT_REMOVE
    for t in range(1, horizon + 1):
        h += a
        if inter is not None:
            inter[t - 1] = h
        c = choose(h, t)
        if c is not None:
            if not 0 <= c < n:
                raise IndexError(f"strategy chose index {c} out of range at step {t}")
            choices[t - 1] = c
            h[c] = max(0, h[c] - d) if unit else 0
    return Trace(rates, variant, choices, str(strategy), inter)


@dataclass(frozen=True)
class BacklogReport:
    max_intermediate: Fraction
    max_post_cut: Fraction
    argmax_step: int
    argmax_index: int
    per_bamboo_max: tuple
    argmax_user_index: int = 0

    def to_json(self) -> dict:
        return {
            "max_intermediate": format_rational(self.max_intermediate),
            "max_intermediate_approx": float(self.max_intermediate),
            "max_post_cut": format_rational(self.max_post_cut),
            "argmax_step": self.argmax_step,
            "argmax_index": self.argmax_index,
            "argmax_user_index": self.argmax_user_index,
            "per_bamboo_max": [format_rational(h) for h in self.per_bamboo_max],
        }


def backlog(trace: Trace) -> BacklogReport:
    """Exact maxima over the whole trace; the backlog is the largest intermediate height."""
    if trace.horizon == 0:
        raise ValueError("empty trace has no backlog")
    d = trace.rates.scale
    best = None
    best_at = (0, 0)
    best_post = None
    per = None
    for first, inter, post, _ in trace.blocks():
        row_max = inter.max(axis=1)
        k = int(np.argmax(row_max))
        if best is None or row_max[k] > best:
            best = row_max[k]
            best_at = (first + k, int(np.argmax(inter[k])))
        pm = post.max()
        best_post = pm if best_post is None else max(best_post, pm)
        col = inter.max(axis=0)
        per = col if per is None else np.maximum(per, col)
    return BacklogReport(
        Fraction(int(best), d),
        Fraction(int(best_post), d),
        best_at[0],
        best_at[1],
        tuple(Fraction(int(v), d) for v in per),
        trace.rates.user_index(best_at[1]),
    )


def replay(rates: RateVector, variant: Variant, cuts: Sequence[Optional[int]]) -> list[StepRecord]:
    """Re-run a cut sequence through :func:`step`, one Fraction at a time."""
    state = new_game(rates, variant)
    out = []
    for c in cuts:
        state, rec = step(state, c)
        out.append(rec)
    return out
