import math
from fractions import Fraction as F

import pytest

from bamboo_trim.constructions import (
    parse_construction,
    rf1_fast_slow,
    rf_x_counter,
    two_bamboo,
    uniform,
)
from bamboo_trim.engine import Variant, backlog, run
from bamboo_trim.strategies import DEADLINE_DRIVEN, REDUCE_MAX, reduce_fastest


# Expected bounds below are worked out by hand from the closed forms:
#   two_bamboo(eps)   2 - 2 eps
#   uniform(n, x)     x + (n - 1) / n
#   rf1_fast_slow(f)  (3f + 2r) / (f + 2r + 2), r = sqrt(f)

@pytest.mark.parametrize("eps, bound, horizon", [
    (F(1, 100), F(99, 50), 200),
    (F(1, 4), F(3, 2), 8),
    (F(1, 10), F(9, 5), 20),
])
def test_two_bamboo(eps, bound, horizon):
    c = two_bamboo(eps)
    assert c.rates.rates == (1 - eps, eps)
    assert c.predicted_backlog_lower_bound == bound
    assert c.critical_horizon == horizon


@pytest.mark.parametrize("eps", [F(0), F(1, 2), F(3, 5)])
def test_two_bamboo_range(eps):
    with pytest.raises(ValueError):
        two_bamboo(eps)


@pytest.mark.parametrize("n, x, bound", [
    (100, 2, F(299, 100)),
    (1, 2, F(2)),
    (4, 2, F(11, 4)),
    (1000, 3, F(3999, 1000)),
])
def test_uniform(n, x, bound):
    c = uniform(n, x)
    assert len(c.rates) == n
    assert c.rates.total == 1
    assert c.predicted_backlog_lower_bound == bound


def test_uniform_needs_positive_n():
    with pytest.raises(ValueError):
        uniform(0, 2)


def test_rf1_fast_slow_large():
    c = rf1_fast_slow(10_000)
    # r = 100: (30000 + 200) / (10000 + 202)
    assert c.predicted_backlog_lower_bound == F(30200, 10202) == F(15100, 5101)
    assert len(c.rates) == 10_000 + 101
    assert c.rates[0] == F(1, 10_100)
    assert c.rates[-1] == F(1, 10_202)
    assert c.critical_horizon == 30_201
    assert c.rates.total <= 1


def test_rf1_fast_slow_small():
    c = rf1_fast_slow(4)
    assert c.rates.rates == (F(1, 6),) * 4 + (F(1, 10),) * 3
    assert c.predicted_backlog_lower_bound == F(16, 10)
    assert c.rates.total == F(29, 30)


@pytest.mark.parametrize("f", [10, 3, 0, -4])
def test_rf1_fast_slow_needs_square(f):
    with pytest.raises(ValueError):
        rf1_fast_slow(f)


def test_rf_x_counter():
    c = rf_x_counter()
    assert len(c.rates) == 1040
    assert c.rates.total == 1                       # 900/1000 + 140/1400
    assert c.predicted_backlog_lower_bound == F(29, 14)
    assert c.rates.rates.count(F(1, 1000)) == 900


@pytest.mark.parametrize("strategy", [REDUCE_MAX, DEADLINE_DRIVEN, reduce_fastest(1), reduce_fastest(2)])
@pytest.mark.parametrize("eps", [F(1, 4), F(1, 10), F(1, 50)])
def test_two_bamboo_bound_reached_by_every_strategy(strategy, eps):
    c = two_bamboo(eps)
    got = backlog(run(c.rates, Variant.FLUSH, strategy, c.critical_horizon)).max_intermediate
    assert got >= c.predicted_backlog_lower_bound


def test_uniform_bound_reached_by_reduce_fastest():
    c = uniform(100, 2)
    got = backlog(run(c.rates, Variant.FLUSH, reduce_fastest(2), c.critical_horizon)).max_intermediate
    assert got == F(299, 100)


@pytest.mark.parametrize("text, name", [
    ("two-bamboo:1/100", "two-bamboo:1/100"),
    ("uniform:4:2", "uniform:4:2/1"),
    ("rf1-fast-slow:4", "rf1-fast-slow:4"),
    ("rf-x-counter", "rf-x-counter"),
])
def test_parse_construction(text, name):
    assert parse_construction(text).name == name


@pytest.mark.parametrize("text", ["two-bamboo", "uniform:4", "uniform:x:2", "nope", "rf-x-counter:3",
                                  "two-bamboo:1/0"])
def test_parse_construction_errors(text):
    with pytest.raises(ValueError):
        parse_construction(text)


def test_construction_json():
    js = two_bamboo(F(1, 4)).to_json()
    assert js["predicted_backlog_lower_bound"] == "3/2"
    assert js["rate_sum"] == "1/1"
    assert math.isclose(js["predicted_backlog_lower_bound_approx"], 1.5)
