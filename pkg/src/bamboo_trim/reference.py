"""Deliberately naive re-implementation of the game, used as an oracle.

Plain lists of Fractions, linear scans, no integer scaling, no numpy and no
code shared with the engine's fast path.  Slow by design.
"""

from __future__ import annotations

from fractions import Fraction


def _time_to_two(height, rate):
    # smallest k >= 0 (or negative, if already past) with height + k*rate >= 2
    gap = (2 - height) / rate
    k = gap.numerator // gap.denominator
    if k < gap:
        k += 1
    return k


def naive_choice(kind: str, threshold, heights, rates):
    if kind == "reduce-max":
        best = 0
        for k in range(len(heights)):
            if heights[k] > heights[best]:
                best = k
        return best
    if kind == "reduce-fastest":
        best = None
        for k in range(len(heights)):
            if heights[k] >= threshold and (best is None or rates[k] > rates[best]):
                best = k
        return best
    if kind == "deadline-driven":
        best = None
        best_time = None
        for k in range(len(heights)):
            if heights[k] >= 1:
                t = _time_to_two(heights[k], rates[k])
                if best is None or t < best_time:
                    best, best_time = k, t
        return best
    raise ValueError(kind)


def naive_run(rates, flush: bool, kind: str, threshold, horizon: int):
    """Return ``[(intermediate, cut, post), ...]`` for ``horizon`` steps.

    ``rates`` must already be in non-increasing order.
    """
    heights = [Fraction(0)] * len(rates)
    out = []
    for _ in range(horizon):
        inter = []
        for k in range(len(rates)):
            inter.append(heights[k] + rates[k])
        cut = naive_choice(kind, threshold, inter, rates)
        post = list(inter)
        if cut is not None:
            if flush:
                post[cut] = Fraction(0)
            else:
                post[cut] = inter[cut] - 1 if inter[cut] > 1 else Fraction(0)
        out.append((inter, cut, post))
        heights = post
    return out
