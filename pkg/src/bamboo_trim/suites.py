"""Verification campaigns: every backlog theorem run at desk scale.

Each ``criterion_*`` function returns a :class:`CriterionResult`.  All
comparisons are exact.  The default arguments are the full acceptance
sizes; smaller values are accepted for quick runs.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from . import constructions as cons
from .analysis import audit_dds, audit_reduce_fastest, bilo_reference_bound, check_reduce_max_invariant
from .engine import RateVector, Variant, backlog, run
from .multiproc import MultiprocConfig, reduced_backlog, run_reduction
from .reference import naive_run
from .strategies import DEADLINE_DRIVEN, REDUCE_MAX, Kind, StrategyRef, reduce_fastest

log = logging.getLogger(__name__)

RANDOM_SUITE_SEED = 20230601
RANDOM_SUITE_SIZE = 200
SUITE_HORIZON = 10_000

CATALOG = (
    "two-bamboo:1/100",
    "two-bamboo:1/10",
    "two-bamboo:1/4",
    "uniform:4:2",
    "uniform:100:2",
    "uniform:1000:2",
    "rf1-fast-slow:4",
    "rf1-fast-slow:100",
    "rf1-fast-slow:10000",
    "rf-x-counter",
)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:>2}. {self.name}: {self.detail}"


def random_rates(rng: random.Random, n: int, total=1, max_weight: Optional[int] = None) -> RateVector:
    """Positive integer weights normalised to sum exactly to ``total``."""
    if max_weight is None:
        max_weight = rng.choice((3, 20, 1000))
    w = [rng.randint(1, max_weight) for _ in range(n)]
    s = sum(w)
    return RateVector.of([Fraction(total * x, s) for x in w], budget=total)


def random_suite(count: int = RANDOM_SUITE_SIZE, seed: int = RANDOM_SUITE_SEED,
                 n_range: tuple = (2, 50)) -> list[RateVector]:
    rng = random.Random(seed)
    return [random_rates(rng, rng.randint(*n_range)) for _ in range(count)]


def random_multiproc_config(rng: random.Random, p: int) -> MultiprocConfig:
    """Rates summing exactly to ``p`` with every rate at most 1."""
    n = rng.randint(p + 1, 3 * p + 10)
    w = [Fraction(rng.randint(1, 20)) for _ in range(n)]
    rates = [None] * n
    free = list(range(n))
    budget = Fraction(p)
    while True:
        s = sum(w[k] for k in free)
        over = [k for k in free if budget * w[k] / s > 1]
        if not over:
            for k in free:
                rates[k] = budget * w[k] / s
            break
        for k in over:
            rates[k] = Fraction(1)
            free.remove(k)
            budget -= 1
    return MultiprocConfig(p, tuple(rates))


def _horizon_for(c: cons.Construction) -> int:
    return max(c.critical_horizon, SUITE_HORIZON)


# ---------------------------------------------------------------------------
# Campaigns (cached so criteria sharing runs do not repeat them)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunSummary:
    label: str
    x: Fraction
    backlog: Fraction
    violations: int
    kinds: tuple
    windows: int = 0


def _rf_run(label, rates, x, horizon) -> RunSummary:
    tr = run(rates, Variant.FLUSH, reduce_fastest(x), horizon)
    audit = audit_reduce_fastest(tr, x)
    kinds = tuple(sorted({v.kind for v in audit.violations}))
    return RunSummary(label, Fraction(x), backlog(tr).max_intermediate, len(audit.violations), kinds, audit.windows)


@lru_cache(maxsize=None)
def rf_campaign(count: int = RANDOM_SUITE_SIZE, horizon: int = SUITE_HORIZON,
                catalog: tuple = CATALOG, uniform_n: int = 1000) -> tuple:
    out = []
    for k, rv in enumerate(random_suite(count)):
        out.append(_rf_run(f"random[{k}]", rv, 2, horizon))
    for spec in catalog:
        c = cons.parse_construction(spec)
        out.append(_rf_run(spec, c.rates, 2, max(c.critical_horizon, horizon)))
    for x in (2, 3, 4):
        c = cons.uniform(uniform_n, x)
        out.append(_rf_run(f"uniform:{uniform_n}:{x}", c.rates, x, c.critical_horizon))
    return tuple(out)


@lru_cache(maxsize=None)
def dds_campaign(count: int = RANDOM_SUITE_SIZE, horizon: int = SUITE_HORIZON,
                 catalog: tuple = CATALOG) -> tuple:
    out = []
    jobs = [(f"random[{k}]", rv, horizon) for k, rv in enumerate(random_suite(count))]
    for spec in catalog:
        c = cons.parse_construction(spec)
        jobs.append((spec, c.rates, max(c.critical_horizon, horizon)))
    for label, rates, h in jobs:
        for variant in Variant:
            tr = run(rates, variant, DEADLINE_DRIVEN, h)
            audit = audit_dds(tr)
            kinds = tuple(sorted({v.kind for v in audit.violations}))
            out.append(RunSummary(f"{label}/{variant.value}", Fraction(0), backlog(tr).max_intermediate,
                                  len(audit.violations), kinds))
    return tuple(out)


def _failures(runs, pred) -> list:
    return [r for r in runs if not pred(r)]


# ---------------------------------------------------------------------------
# Criteria
# ---------------------------------------------------------------------------

def criterion_1_reduce_max(count: int = RANDOM_SUITE_SIZE, horizon: int = SUITE_HORIZON,
                           strategy=REDUCE_MAX) -> CriterionResult:
    bad = 0
    worst = Fraction(0)
    first_bad = None
    for k, rv in enumerate(random_suite(count)):
        tr = run(rv, Variant.FLUSH, strategy, horizon)
        viol = check_reduce_max_invariant(tr)
        if viol and first_bad is None:
            first_bad = (k, viol[0])
        bad += len(viol)
        worst = max(worst, backlog(tr).max_intermediate)
    detail = f"{count} vectors x {horizon} steps, {bad} violations, worst backlog {float(worst):.4f}"
    if first_bad:
        detail += f"; first: vector {first_bad[0]} {first_bad[1]}"
    return CriterionResult(1, "Reduce-Max potential invariant", bad == 0, detail)


def criterion_2_rf_tightness(runs: Optional[tuple] = None, uniform_n: int = 1000) -> CriterionResult:
    runs = rf_campaign() if runs is None else runs
    x2 = [r for r in runs if r.x == 2]
    upper = _failures(x2, lambda r: r.backlog < 3 and "height_x_plus_1" not in r.kinds)
    target = next(r for r in x2 if r.label == f"uniform:{uniform_n}:2")
    lower_ok = target.backlog >= 2 + Fraction(uniform_n - 1, uniform_n)
    detail = (f"{len(x2)} runs at x=2, max backlog {max(r.backlog for r in x2)}; "
              f"uniform({uniform_n}, 2) reached {target.backlog}")
    if upper:
        detail += f"; over 3: {[r.label for r in upper][:5]}"
    return CriterionResult(2, "Reduce-Fastest(2) tight at 3", not upper and lower_ok, detail)


def criterion_3_rf_x(runs: Optional[tuple] = None, uniform_n: int = 1000) -> CriterionResult:
    runs = rf_campaign() if runs is None else runs
    parts, ok = [], True
    for x in (2, 3, 4):
        r = next(r for r in runs if r.label == f"uniform:{uniform_n}:{x}")
        good = x + 1 - Fraction(1, uniform_n) <= r.backlog < x + 1
        ok &= good
        parts.append(f"x={x}: {r.backlog}")
    return CriterionResult(3, "Reduce-Fastest(x) in [x+1-1/n, x+1)", ok, ", ".join(parts))


def criterion_4_rf1_counterexample(f: int = 10_000) -> CriterionResult:
    c = cons.rf1_fast_slow(f)
    tr = run(c.rates, Variant.FLUSH, reduce_fastest(1), c.critical_horizon)
    got = backlog(tr).max_intermediate
    return CriterionResult(
        4, "Reduce-Fastest(1) fast/slow counterexample", got >= c.predicted_backlog_lower_bound,
        f"f={f}, {c.critical_horizon} steps: backlog {got} ({float(got):.4f}) vs bound "
        f"{c.predicted_backlog_lower_bound} ({float(c.predicted_backlog_lower_bound):.4f})")


def criterion_5_no_201() -> CriterionResult:
    c = cons.rf_x_counter()
    parts, ok = [], True
    for x in (Fraction(1), Fraction(201, 200), Fraction(101, 100)):
        got = backlog(run(c.rates, Variant.FLUSH, reduce_fastest(x), c.critical_horizon)).max_intermediate
        ok &= got >= Fraction(29, 14)
        parts.append(f"x={x}: {got}")
    return CriterionResult(5, "no Reduce-Fastest(x) achieves 2.01", ok, ", ".join(parts) + " (need >= 29/14)")


def criterion_6_dds(runs: Optional[tuple] = None) -> CriterionResult:
    runs = dds_campaign() if runs is None else runs
    over = _failures(runs, lambda r: r.violations == 0 and r.backlog < 2)
    target = next(r for r in runs if r.label == "two-bamboo:1/100/flush")
    lower_ok = Fraction(49, 25) <= target.backlog < 2
    detail = (f"{len(runs)} runs (flush + unit), max backlog {max(r.backlog for r in runs)}; "
              f"two_bamboo(1/100) reached {target.backlog}")
    if over:
        detail += f"; failing: {[(r.label, r.kinds) for r in over][:5]}"
    return CriterionResult(6, "Deadline-Driven never reaches 2", not over and lower_ok, detail)


def criterion_7_claim(runs: Optional[tuple] = None) -> CriterionResult:
    runs = rf_campaign() if runs is None else runs
    bad = [r for r in runs if r.violations]
    windows = sum(r.windows for r in runs)
    return CriterionResult(7, "rate-budget claim on every window", not bad,
                           f"{len(runs)} traces, {windows} windows, {sum(r.violations for r in runs)} violations")


def criterion_8_multiproc(configs: int = 20, horizon: int = 2_000, seed: int = RANDOM_SUITE_SEED) -> CriterionResult:
    limits = ((DEADLINE_DRIVEN, Fraction(3)), (REDUCE_MAX, Fraction(5)), (reduce_fastest(2), Fraction(4)))
    failures = []
    worst = {str(s): Fraction(0) for s, _ in limits}
    runs = 0
    for p in (2, 4):
        rng = random.Random(seed + p)
        for _ in range(configs):
            cfg = random_multiproc_config(rng, p)
            for strat, limit in limits:
                tr = run_reduction(cfg, strat, horizon)
                got = tr.backlog()
                single = reduced_backlog(tr)
                runs += 1
                worst[str(strat)] = max(worst[str(strat)], got)
                if not got < limit or got > single + 1:
                    failures.append((p, str(strat), got, single))
    detail = f"{runs} runs; worst " + ", ".join(f"{k}={float(v):.4f}" for k, v in worst.items())
    if failures:
        detail += f"; failing: {failures[:3]}"
    return CriterionResult(8, "multiprocessor reduction bounds", not failures, detail)


def criterion_9_reference_bound() -> CriterionResult:
    b = bilo_reference_bound(2)
    return CriterionResult(9, "prior-work bound at x=2", b == Fraction(19, 6) and b >= Fraction(5, 2), f"{b}")


def oracle_instances(count: int = 100, seed: int = RANDOM_SUITE_SEED + 10):
    rng = random.Random(seed)
    for _ in range(count):
        rates = random_rates(rng, rng.randint(1, 10))
        variant = rng.choice(list(Variant))
        horizon = rng.randint(1, 1000)
        x = rng.choice((Fraction(1, 2), Fraction(1), Fraction(3, 2), Fraction(2), Fraction(5, 2), Fraction(3)))
        yield rates, variant, horizon, x


def oracle_agrees(rates: RateVector, variant: Variant, strategy: StrategyRef, horizon: int) -> bool:
    fast = run(rates, variant, strategy, horizon)
    slow = naive_run(list(rates.rates), variant is Variant.FLUSH, strategy.kind.value, strategy.threshold, horizon)
    for rec, (inter, cut, post) in zip(fast.records(), slow):
        if rec.cut_index != cut or list(rec.intermediate_heights) != inter or list(rec.post_heights) != post:
            return False
    return len(fast) == len(slow)


def criterion_10_oracle(count: int = 100) -> CriterionResult:
    mismatches = []
    checked = 0
    for k, (rates, variant, horizon, x) in enumerate(oracle_instances(count)):
        for strat in (REDUCE_MAX, reduce_fastest(x), DEADLINE_DRIVEN):
            checked += 1
            if not oracle_agrees(rates, variant, strat, horizon):
                mismatches.append((k, str(strat)))
    return CriterionResult(10, "naive oracle reproduces engine traces", not mismatches,
                           f"{checked} traces compared, {len(mismatches)} mismatches {mismatches[:3]}")


CRITERIA: dict[int, Callable[[], CriterionResult]] = {
    1: criterion_1_reduce_max,
    2: criterion_2_rf_tightness,
    3: criterion_3_rf_x,
    4: criterion_4_rf1_counterexample,
    5: criterion_5_no_201,
    6: criterion_6_dds,
    7: criterion_7_claim,
    8: criterion_8_multiproc,
    9: criterion_9_reference_bound,
    10: criterion_10_oracle,
}

SUITES = {
    "reduce-max": (1,),
    "reduce-fastest": (2, 3, 4, 5, 7, 9),
    "deadline-driven": (6,),
    "multiproc": (8,),
    "oracle": (10,),
    "all": tuple(CRITERIA),
}


class CutSlowest:
    """Deliberately bad strategy (always cuts the slowest bamboo); a harness self-test."""

    def bind(self, rates, dtype=np.int64):
        last = len(rates) - 1
        return lambda h, now: last

    def __str__(self) -> str:
        return "cut-slowest"


def run_suite(name: str, broken: bool = False, report: Callable[[str], None] = print) -> bool:
    """Run a named suite, report one line per criterion, return overall success."""
    if name not in SUITES:
        raise KeyError(name)
    ok = True
    for number in SUITES[name]:
        if broken and number == 1:
            res = criterion_1_reduce_max(count=5, horizon=500, strategy=CutSlowest())
        else:
            res = CRITERIA[number]()
        report(res.line())
        ok &= res.passed
    return ok
