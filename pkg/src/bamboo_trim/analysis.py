"""Potential-function ledgers and trace audits.

Checkers never raise on a bad trace.  They return :class:`Violation` lists
so the caller can render counterexamples; an empty list means the trace
satisfied every audited bound.

Indices ``i`` passed to :func:`volume` and :func:`potential` are 1-based,
counting from the fastest bamboo, as in the usual write-up of the bound.
Trace indices (cut choices, violation indices) are 0-based sorted positions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .engine import IDLE, RateVector, Trace, as_rational, format_rational, int_dtype

TWO = Fraction(2)


@dataclass(frozen=True)
class Violation:
    step: int
    index: int
    kind: str
    lhs: Fraction
    rhs: Fraction

    def to_json(self) -> dict:
        return {
            "step": self.step,
            "index": self.index,
            "kind": self.kind,
            "lhs": format_rational(self.lhs),
            "rhs": format_rational(self.rhs),
        }


def volume(i: int, heights: Sequence[Fraction]) -> Fraction:
    """Sum of the first ``i`` heights, each capped at 2."""
    if not 1 <= i <= len(heights):
        raise IndexError(f"volume index {i} out of range 1..{len(heights)}")
    return sum((min(TWO, h) for h in heights[:i]), Fraction(0))


def potential(i: int, heights: Sequence[Fraction], rates: Sequence[Fraction]) -> Fraction:
    """Rate-weighted spread of ``volume(i)``: weights of at most 2, fastest first."""
    v = volume(i, heights)
    total = Fraction(0)
    for k in range(1, i + 1):
        if 2 * (k - 1) < v:
            total += rates[k - 1] * min(TWO, v - 2 * (k - 1))
    return total


@dataclass(frozen=True)
class PotentialLedger:
    step: int
    V: tuple
    Phi: tuple


def ledger(step: int, heights: Sequence[Fraction], rates: Sequence[Fraction]) -> PotentialLedger:
    n = len(heights)
    return PotentialLedger(
        step,
        tuple(volume(i, heights) for i in range(1, n + 1)),
        tuple(potential(i, heights, rates) for i in range(1, n + 1)),
    )


def potential_units(post: np.ndarray, a: np.ndarray, scale: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised ``(V, Phi)`` for every prefix of every row.

    ``post`` holds heights in units of ``1/scale`` (rows are time steps).
    Returns V in units of ``1/scale`` and Phi in units of ``1/scale**2``.
    With ``q`` full weight-2 slots and remainder ``r``, Phi is
    ``2 * (a_0 + ... + a_{q-1}) + a_q * r``.
    """
    d = scale
    V = np.cumsum(np.minimum(post, 2 * d), axis=-1)
    q = V // (2 * d)
    r = V - 2 * d * q
    prefix = np.concatenate([np.zeros(1, dtype=a.dtype), np.cumsum(a)])
    q_idx = q.astype(np.int64)
    # q equals the prefix length only when r == 0, so clipping is harmless
    nxt = a[np.minimum(q_idx, len(a) - 1)]
    phi = 2 * d * prefix[q_idx] + nxt * r
    return V, phi


def check_reduce_max_invariant(trace: Trace, volume_drop: bool = True) -> list[Violation]:
    """Audit the Reduce-Max potential bound on every step.

    * ``lemma``: post-cut height ``|b_i|_t <= 4 - Phi(i, t)``.
    * ``intermediate``: every intermediate height ``< 4 - h_1``.
    * ``volume_drop`` (optional): when the cut bamboo ``j`` is at least 2 tall,
      ``V(i, t+1) <= V(i, t) - 1`` for ``i`` after ``j`` and
      ``V(i, t+1) <= V(j, t) - 1`` for ``i`` before ``j``.
    """
    rates = trace.rates
    d = rates.scale
    out: list[Violation] = []
    if trace.horizon == 0:
        return out
    a = None
    prev_V = None
    h1 = rates[0]
    cap_units = 4 * d - rates.units[0]        # strict upper bound on intermediates
    for first, inter, post, cuts in trace.blocks():
        if a is None:
            a = np.array(rates.units, dtype=inter.dtype)
            prev_V = np.zeros((1, len(a)), dtype=inter.dtype)
        V, phi = potential_units(post, a, d)

        bad = np.argwhere(post * d + phi > 4 * d * d)
        for k, i in bad:
            out.append(Violation(first + int(k), int(i), "lemma",
                                 Fraction(int(post[k, i]), d), 4 - Fraction(int(phi[k, i]), d * d)))

        bad = np.argwhere(inter >= cap_units)
        for k, i in bad:
            out.append(Violation(first + int(k), int(i), "intermediate",
                                 Fraction(int(inter[k, i]), d), 4 - h1))

        if volume_drop:
            out.extend(_volume_drop(first, inter, cuts, V, np.concatenate([prev_V, V[:-1]]), d))
        prev_V = V[-1:]
    return out


def _volume_drop(first, inter, cuts, V, V_prev, d) -> list[Violation]:
    out = []
    n = inter.shape[1]
    rows = np.nonzero(cuts != IDLE)[0]
    if len(rows) == 0:
        return out
    j = cuts[rows].astype(np.int64)
    tall = inter[rows, j] >= 2 * d
    rows, j = rows[tall], j[tall]
    if len(rows) == 0:
        return out
    idx = np.arange(n)
    after = idx[None, :] > j[:, None]
    before = idx[None, :] < j[:, None]
    ref = np.where(after, V_prev[rows], V_prev[rows, j][:, None])
    bad = (after | before) & (V[rows] > ref - d)
    for r, i in np.argwhere(bad):
        k = rows[r]
        out.append(Violation(first + int(k), int(i), "volume_drop",
                             Fraction(int(V[k, i]), d), Fraction(int(ref[r, i]) - d, d)))
    return out


@dataclass
class DdsAudit:
    """Request / completion / overflow log of a Deadline-Driven trace.

    ``open_requests[i]`` and ``deadlines[i]`` describe the state after the
    last step (None when the cup has no open request).
    """

    open_requests: list
    deadlines: list
    completions: list = field(default_factory=list)     # (cup, request_step, completion_step)
    overflows: list = field(default_factory=list)       # (cup, step)
    requests: int = 0
    violations: list = field(default_factory=list)

    def summary(self) -> dict:
        lat = [c - r for _, r, c in self.completions]
        return {
            "requests": self.requests,
            "completions": len(self.completions),
            "overflows": len(self.overflows),
            "violations": len(self.violations),
            "max_request_latency": max(lat) if lat else None,
        }


def audit_dds(trace: Trace) -> DdsAudit:
    """Replay the request/deadline bookkeeping of the Deadline-Driven strategy.

    A cup is requested on the first step its intermediate height is at least
    1; its deadline is the step at which it would reach 2 if left alone.
    Since a cup only loses water when it is served, a request is open after
    step ``t`` exactly when the post-cut height is still at least 1.
    Violations: ``overflow`` (an intermediate height reaches 2),
    ``idle_with_request``, ``cut_below_one``, ``not_min_deadline``.
    """
    rates = trace.rates
    d = rates.scale
    n = len(rates)
    audit = DdsAudit([None] * n, [None] * n)
    a = prev_post = last_req = None
    for first, inter, post, cuts in trace.blocks():
        if a is None:
            a = np.array(rates.units, dtype=inter.dtype)
            prev_post = np.zeros((1, n), dtype=inter.dtype)
            last_req = np.full((1, n), -1, dtype=np.int64)
        steps = np.arange(first, first + len(cuts))
        requested = inter >= d
        wait = (2 * d - inter + a - 1) // a
        before = np.concatenate([prev_post, post[:-1]])
        fresh = requested & (before < d)
        audit.requests += int(fresh.sum())
        req_time = np.maximum.accumulate(
            np.concatenate([last_req, np.where(fresh, steps[:, None], -1)]), axis=0)[1:]

        for k, i in np.argwhere(inter >= 2 * d):
            t = first + int(k)
            audit.overflows.append((int(i), t))
            audit.violations.append(Violation(t, int(i), "overflow", Fraction(int(inter[k, i]), d), TWO))

        idle = cuts == IDLE
        for k in np.nonzero(idle & requested.any(axis=1))[0]:
            i = int(np.argmax(requested[k]))
            audit.violations.append(Violation(first + int(k), i, "idle_with_request",
                                              Fraction(int(inter[k, i]), d), Fraction(1)))
        rows = np.nonzero(~idle)[0]
        c = cuts[rows].astype(np.int64)
        served = requested[rows, c]
        for k, ci in zip(rows[~served], c[~served]):
            audit.violations.append(Violation(first + int(k), int(ci), "cut_below_one",
                                              Fraction(int(inter[k, ci]), d), Fraction(1)))
        rows, c = rows[served], c[served]
        if len(rows):
            masked = np.where(requested[rows], wait[rows], wait.max() + 1)
            best = masked.min(axis=1)
            mine = wait[rows, c]
            for k, ci, w, b in zip(rows, c, mine, best):
                if w > b:
                    t = first + int(k)
                    audit.violations.append(Violation(t, int(ci), "not_min_deadline",
                                                      Fraction(t + int(w)), Fraction(t + int(b))))
            done = inter[rows, c] < 2 * d
            for k, ci in zip(rows[done], c[done]):
                audit.completions.append((int(ci), int(req_time[k, ci]), first + int(k)))

        prev_post = post[-1:]
        last_req = np.where(post[-1:] >= d, req_time[-1:], -1)
    if a is not None:
        t_end = trace.horizon
        h = prev_post[0]
        for i in np.nonzero(h >= d)[0]:
            audit.open_requests[int(i)] = int(last_req[0, i])
            # a cup left alone keeps its deadline; project from the last step
            audit.deadlines[int(i)] = t_end + int((2 * d - h[i] + a[i] - 1) // a[i])
    return audit


@dataclass
class RfAudit:
    """Window audit of a Reduce-Fastest(x) trace.

    A window for bamboo ``i`` opens on the step its intermediate height
    reaches ``x`` and closes when ``i`` is cut, when it first reaches
    ``x + 1``, or at the end of the trace.  For every other bamboo ``j`` cut
    ``m_j`` times inside the window the audit requires ``h_j >= m_j * h_i``.
    ``window_start`` lists, per bamboo, the start of a window still open when
    the trace ends.
    """

    x: Fraction
    window_start: list
    windows: int = 0
    max_cuts_in_window: int = 0
    violations: list = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "x": format_rational(self.x),
            "windows": self.windows,
            "max_cuts_in_window": self.max_cuts_in_window,
            "violations": len(self.violations),
        }


def _next_event(keys: np.ndarray, query: np.ndarray, span: int, default: int) -> np.ndarray:
    """For packed ``cup * span + step`` keys, the first event step >= each query."""
    out = np.full(len(query), default, dtype=np.int64)
    if len(keys) == 0:
        return out
    pos = np.searchsorted(keys, query)
    ok = pos < len(keys)
    hit = keys[np.minimum(pos, len(keys) - 1)]
    ok &= (hit // span) == (query // span)
    out[ok] = hit[ok] % span
    return out


def audit_reduce_fastest(trace: Trace, x) -> RfAudit:
    """Audit windows, thresholds and the ``x + 1`` ceiling of a Reduce-Fastest(x) trace.

    Violation kinds: ``height_x_plus_1``, ``claim`` (``lhs = h_j``,
    ``rhs = m_j * h_i``), ``cut_below_threshold``, ``not_fastest``,
    ``idle_with_candidate``.
    """
    x = as_rational(x)
    if x < 2:
        raise ValueError("the window audit needs x >= 2")
    rates = trace.rates
    d = rates.scale
    n = len(rates)
    units = rates.units
    units_arr = np.array(units, dtype=int_dtype(d, trace.horizon))
    lo = math.ceil(x * d)
    hi = math.ceil((x + 1) * d)
    audit = RfAudit(x, [None] * n)
    span = trace.horizon + 2
    opens, highs = [], []
    prev_post = None
    for first, inter, post, cuts in trace.blocks():
        if prev_post is None:
            prev_post = np.zeros((1, n), dtype=inter.dtype)
        tall = inter >= lo
        before = np.concatenate([prev_post, post[:-1]])
        for k, i in np.argwhere(tall & (before < lo)):
            opens.append(int(i) * span + first + int(k))
        for k, i in np.argwhere(inter >= hi):
            t = first + int(k)
            highs.append(int(i) * span + t)
            audit.violations.append(Violation(t, int(i), "height_x_plus_1", Fraction(int(inter[k, i]), d), x + 1))

        idle = cuts == IDLE
        any_tall = tall.any(axis=1)
        first_tall = np.argmax(tall, axis=1)
        for k in np.nonzero(idle & any_tall)[0]:
            i = int(first_tall[k])
            audit.violations.append(Violation(first + int(k), i, "idle_with_candidate",
                                              Fraction(int(inter[k, i]), d), x))
        rows = np.nonzero(~idle)[0]
        c = cuts[rows].astype(np.int64)
        ok = tall[rows, c]
        for k, ci in zip(rows[~ok], c[~ok]):
            audit.violations.append(Violation(first + int(k), int(ci), "cut_below_threshold",
                                              Fraction(int(inter[k, ci]), d), x))
        slow = ok & (first_tall[rows] < c)
        for k, ci in zip(rows[slow], c[slow]):
            audit.violations.append(Violation(first + int(k), int(ci), "not_fastest",
                                              rates[int(ci)], rates[int(first_tall[k])]))
        prev_post = post[-1:]

    if not opens:
        return audit
    choices = trace.choices
    cut_steps = np.nonzero(choices != IDLE)[0] + 1
    cut_cups = choices[cut_steps - 1]
    cut_keys = np.sort(cut_cups * span + cut_steps)
    # rank of every cut within the flattened (cup, step) order
    rank = np.full(trace.horizon + 1, -1, dtype=np.int64)
    rank[cut_steps] = np.searchsorted(cut_keys, cut_cups * span + cut_steps)
    opens = np.array(opens, dtype=np.int64)
    end = np.minimum(_next_event(cut_keys, opens, span, span - 1),
                     _next_event(np.sort(np.array(highs, dtype=np.int64)), opens, span, span - 1))
    for key, stop in zip(opens.tolist(), end.tolist()):
        i, t1 = divmod(key, span)
        if stop == span - 1:
            audit.window_start[i] = t1
        audit.windows += 1
        window = choices[t1 - 1:stop - 1]
        steps = np.nonzero((window != IDLE) & (window != i))[0] + t1
        if len(steps) == 0:
            continue
        cups = choices[steps - 1]
        # cuts of the same cup inside the window so far, counting this one
        m = rank[steps] - np.searchsorted(cut_keys, cups * span + t1) + 1
        audit.max_cuts_in_window = max(audit.max_cuts_in_window, int(m.max()))
        bad = units_arr[cups] < m * units[i]
        if bad.any():
            worst = {}
            for j, mj in zip(cups[bad].tolist(), m[bad].tolist()):
                worst[j] = max(worst.get(j, 0), mj)
            for j, mj in worst.items():
                audit.violations.append(Violation(stop, j, "claim", rates[j], mj * rates[i]))
    return audit


def bilo_reference_bound(x) -> Fraction:
    """Earlier published Reduce-Fastest(x) upper bound, valid for ``x > 1``."""
    x = as_rational(x)
    if x <= 1:
        raise ValueError("reference bound is defined for x > 1 only")
    return max(
        x + x * x / (4 * (x - 1)),
        Fraction(1, 2) + x + x * x / (4 * (x - Fraction(1, 2))),
    )


def theorem_bound(strategy, rates: RateVector) -> Optional[Fraction]:
    """Proven backlog ceiling for ``strategy`` on ``rates`` (strict), if any."""
    from .strategies import Kind

    if rates.total > 1:
        return None
    if strategy.kind is Kind.REDUCE_MAX:
        return 4 - rates[0]
    if strategy.kind is Kind.DEADLINE_DRIVEN:
        return TWO
    if strategy.threshold >= 2:
        return strategy.threshold + 1
    return None
