"""Adversarial rate vectors with their predicted backlog lower bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .engine import RateVector, as_rational


@dataclass(frozen=True)
class Construction:
    name: str
    rates: RateVector
    predicted_backlog_lower_bound: Fraction
    critical_horizon: int

    def to_json(self) -> dict:
        b = self.predicted_backlog_lower_bound
        return {
            "name": self.name,
            "n": len(self.rates),
            "rate_sum": f"{self.rates.total.numerator}/{self.rates.total.denominator}",
            "predicted_backlog_lower_bound": f"{b.numerator}/{b.denominator}",
            "predicted_backlog_lower_bound_approx": float(b),
            "critical_horizon": self.critical_horizon,
        }


def two_bamboo(eps) -> Construction:
    """Rates ``1 - eps`` and ``eps``: every algorithm reaches ``2 - 2 eps``."""
    eps = as_rational(eps)
    if not 0 < eps < Fraction(1, 2):
        raise ValueError("two_bamboo needs 0 < eps < 1/2")
    return Construction(
        f"two-bamboo:{eps.numerator}/{eps.denominator}",
        RateVector.of([1 - eps, eps]),
        2 - 2 * eps,
        math.ceil(2 / eps),
    )


def uniform(n: int, x) -> Construction:
    """``n`` rates of ``1/n``.  Reduce-Fastest(x) lets the last one reach ``x + (n-1)/n``."""
    x = as_rational(x)
    if n < 1:
        raise ValueError("uniform needs n >= 1")
    return Construction(
        f"uniform:{n}:{x.numerator}/{x.denominator}",
        RateVector.of([Fraction(1, n)] * n),
        x + Fraction(n - 1, n),
        math.ceil(x * n) + n,
    )


def rf1_fast_slow(f: int) -> Construction:
    """``f`` fast rates ``1/(f + r)`` and ``r + 1`` slow rates ``1/(f + 2r + 2)``, ``r = sqrt(f)``.

    Under Reduce-Fastest(1) one slow bamboo waits until step ``3f + 2r``.
    """
    r = math.isqrt(f) if f >= 0 else -1
    if f < 4 or r * r != f:
        raise ValueError(f"rf1_fast_slow needs a perfect square f >= 4, got {f}")
    fast = Fraction(1, f + r)
    slow = Fraction(1, f + 2 * r + 2)
    return Construction(
        f"rf1-fast-slow:{f}",
        RateVector.of([fast] * f + [slow] * (r + 1)),
        Fraction(3 * f + 2 * r, f + 2 * r + 2),
        3 * f + 2 * r + 1,
    )


def rf_x_counter() -> Construction:
    """900 rates of 1/1000 and 140 of 1/1400; beats Reduce-Fastest(x) for 1 <= x <= 101/100."""
    return Construction(
        "rf-x-counter",
        RateVector.of([Fraction(1, 1000)] * 900 + [Fraction(1, 1400)] * 140),
        Fraction(2900, 1400),
        3000,
    )


def parse_construction(text: str) -> Construction:
    """``two-bamboo:<eps>``, ``uniform:<n>:<x>``, ``rf1-fast-slow:<f>`` or ``rf-x-counter``."""
    name, *args = text.strip().split(":")
    try:
        if name == "two-bamboo" and len(args) == 1:
            return two_bamboo(Fraction(args[0]))
        if name == "uniform" and len(args) == 2:
            return uniform(int(args[0]), Fraction(args[1]))
        if name == "rf1-fast-slow" and len(args) == 1:
            return rf1_fast_slow(int(args[0]))
        if name == "rf-x-counter" and not args:
            return rf_x_counter()
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"bad construction {text!r}: {exc}") from None
    raise ValueError(f"malformed construction {text!r}")
