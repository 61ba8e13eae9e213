"""p-processor cup flushing game and its reduction to the single-processor game.

One p-processor step is simulated as ``p`` consecutive single-processor
steps with every rate divided by ``p``.  The cuts made in a chunk of ``p``
single steps become the set of cups flushed at the end of the
corresponding p-processor step.  Flushing a cup twice is the same as once,
so repeated choices inside a chunk collapse and the spare processors idle.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional

import numpy as np

from .engine import IDLE, RateVector, Trace, Variant, as_rational, backlog, format_rational, run


@dataclass(frozen=True)
class MultiprocConfig:
    p: int
    rates: tuple

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("need at least one processor")
        rates = tuple(as_rational(r) for r in self.rates)
        object.__setattr__(self, "rates", rates)
        if not rates:
            raise ValueError("need at least one cup")
        for r in rates:
            if not 0 < r <= 1:
                raise ValueError(f"rate {r} outside (0, 1]")
        if sum(rates) > self.p:
            raise ValueError(f"rate sum {sum(rates)} exceeds {self.p} processors")


@dataclass(frozen=True)
class MultiprocState:
    time: int
    heights: tuple
    config: MultiprocConfig


@dataclass(frozen=True)
class MultiprocRecord:
    step: int
    intermediate_heights: tuple
    cuts: tuple
    post_heights: tuple

    def to_json(self) -> dict:
        return {
            "step": self.step,
            "intermediate": [format_rational(h) for h in self.intermediate_heights],
            "cuts": list(self.cuts),
            "post": [format_rational(h) for h in self.post_heights],
        }


def new_multiproc_game(config: MultiprocConfig) -> MultiprocState:
    return MultiprocState(0, (Fraction(0),) * len(config.rates), config)


def multiproc_step(state: MultiprocState, choices: Iterable[int]) -> tuple[MultiprocState, MultiprocRecord]:
    choices = list(choices)
    n = len(state.heights)
    if len(set(choices)) != len(choices):
        raise ValueError(f"duplicate cup in {choices}")
    if len(choices) > state.config.p:
        raise ValueError(f"{len(choices)} cuts but only {state.config.p} processors")
    for c in choices:
        if not 0 <= c < n:
            raise IndexError(f"cut index {c} out of range for {n} cups")
    inter = tuple(h + r for h, r in zip(state.heights, state.config.rates))
    post = list(inter)
    for c in choices:
        post[c] = Fraction(0)
    t = state.time + 1
    return MultiprocState(t, tuple(post), state.config), MultiprocRecord(t, inter, tuple(sorted(choices)), tuple(post))


def reduce_to_single(config: MultiprocConfig) -> RateVector:
    """Rates divided by ``p``, sorted; ``permutation`` maps back to config order."""
    return RateVector.of([r / config.p for r in config.rates], budget=1)


@dataclass
class MultiprocTrace:
    config: MultiprocConfig
    cuts: list                      # per step, sorted tuple of cup indices (config order)
    reduced: Trace                  # the single-processor run that produced the cuts

    def __len__(self) -> int:
        return len(self.cuts)

    def records(self):
        state = new_multiproc_game(self.config)
        for chosen in self.cuts:
            state, rec = multiproc_step(state, chosen)
            yield rec

    def heights_units(self) -> tuple[np.ndarray, int]:
        """Intermediate heights as an integer matrix plus its denominator."""
        rv = RateVector.of(self.config.rates, budget=self.config.p)
        d = rv.scale
        a = np.array([r.numerator * (d // r.denominator) for r in self.config.rates], dtype=object if d > 2**40 else np.int64)
        h = np.zeros(len(a), dtype=a.dtype)
        out = np.empty((len(self.cuts), len(a)), dtype=a.dtype)
        for k, chosen in enumerate(self.cuts):
            h += a
            out[k] = h
            for c in chosen:
                h[c] = 0
        return out, d

    def backlog(self) -> Fraction:
        inter, d = self.heights_units()
        return Fraction(int(inter.max()), d)

    def write_jsonl(self, fh) -> None:
        import json
        for rec in self.records():
            fh.write(json.dumps(rec.to_json()) + "\n")


def run_reduction(config: MultiprocConfig, strategy, horizon: int) -> MultiprocTrace:
    """Drive a p-processor game with a single-processor strategy on the reduced rates."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    reduced = reduce_to_single(config)
    p = config.p
    single = run(reduced, Variant.FLUSH, strategy, horizon * p)
    perm = reduced.permutation
    cuts = []
    for k in range(horizon):
        chunk = single.choices[k * p:(k + 1) * p]
        cuts.append(tuple(sorted({perm[int(c)] for c in chunk if c != IDLE})))
    return MultiprocTrace(config, cuts, single)


def reduced_backlog(trace: MultiprocTrace) -> Fraction:
    return backlog(trace.reduced).max_intermediate
