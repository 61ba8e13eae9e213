import random
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bamboo_trim.analysis import (
    audit_dds,
    audit_reduce_fastest,
    bilo_reference_bound,
    check_reduce_max_invariant,
    ledger,
    potential,
    potential_units,
    theorem_bound,
    volume,
)
from bamboo_trim.constructions import two_bamboo, uniform
from bamboo_trim.engine import IDLE, RateVector, Trace, Variant, backlog, run
from bamboo_trim.strategies import DEADLINE_DRIVEN, REDUCE_MAX, reduce_fastest
from bamboo_trim.suites import random_rates


def rv(*rates):
    return RateVector.of([F(r) for r in rates])


def fake(rates, choices):
    return Trace(rates, Variant.FLUSH, np.array([IDLE if c is None else c for c in choices], dtype=np.int64))


# -- volume / potential -----------------------------------------------------

def test_volume_examples():
    assert volume(3, (F(3), F(1), F(1, 2))) == F(7, 2)      # 2 + 1 + 1/2
    assert volume(2, (F(0), F(0), F(5))) == 0
    assert volume(2, (F(5), F(5))) == 4


def test_volume_index_range():
    with pytest.raises(IndexError):
        volume(0, (F(1),))


def test_potential_examples():
    # V = 4 fills the two slots: 2 * 1/2 + 2 * 1/4
    assert potential(2, (F(2), F(2)), (F(1, 2), F(1, 4))) == F(3, 2)
    # V = 29/4: three full slots and 5/4 of the fourth
    h = (F(3), F(2), F(7, 4), F(3, 2), F(1))
    r = (F(1, 5), F(1, 5), F(1, 5), F(1, 5), F(1, 5))
    assert volume(4, h) == F(29, 4)
    assert potential(4, h, r) == 2 * F(1, 5) * 3 + F(5, 4) * F(1, 5)
    assert potential(3, (F(0),) * 3, r) == 0
    assert potential(1, (F(3, 2),), (F(1, 2),)) == F(3, 4)


heights_rates = st.integers(1, 8).flatmap(lambda n: st.tuples(
    st.lists(st.fractions(0, 4, max_denominator=24), min_size=n, max_size=n),
    st.integers(0, 10**6),
))


@settings(max_examples=60)
@given(heights_rates)
def test_potential_units_matches_definition(hr):
    heights, seed = hr
    n = len(heights)
    rates = random_rates(random.Random(seed), n)
    d = rates.scale
    for h in heights:
        d = d * h.denominator // np.gcd(d, h.denominator)
    # express everything over the common denominator d
    units = np.array([[int(h * d) for h in heights]], dtype=object)
    a = np.array([int(r * d) for r in rates], dtype=object)
    V, phi = potential_units(units, a, d)
    for i in range(1, n + 1):
        assert F(int(V[0, i - 1]), d) == volume(i, heights)
        assert F(int(phi[0, i - 1]), d * d) == potential(i, heights, rates)


@settings(max_examples=60)
@given(heights_rates)
def test_potential_range_and_monotone(hr):
    heights, seed = hr
    rates = random_rates(random.Random(seed), len(heights))
    for i in range(1, len(heights) + 1):
        v = volume(i, heights)
        p = potential(i, heights, rates)
        assert 0 <= v <= 2 * i
        assert 0 <= p <= 2 * rates.total
        # raising the last height never lowers the potential
        more = list(heights)
        more[i - 1] += F(1, 3)
        assert potential(i, more, rates) >= p


# -- Reduce-Max checker -----------------------------------------------------

def test_reduce_max_checker_idle_ledger():
    r = rv("1/2")
    tr = fake(r, [None] * 3)
    recs = list(tr.records())
    # post heights 1/2, 1, 3/2; Phi(1) = h/2
    assert [ledger(rec.step, rec.post_heights, r).Phi[0] for rec in recs] == [F(1, 4), F(1, 2), F(3, 4)]
    assert check_reduce_max_invariant(tr) == []


def test_reduce_max_checker_flags_overgrowth():
    # idle rate 1/2: step 7 reaches 7/2 = 4 - h1, and post 7/2 > 4 - Phi = 3
    v = check_reduce_max_invariant(fake(rv("1/2"), [None] * 7), volume_drop=False)
    assert sorted((x.kind, x.step) for x in v) == [("intermediate", 7), ("lemma", 7)]
    inter = [x for x in v if x.kind == "intermediate"][0]
    assert (inter.lhs, inter.rhs) == (F(7, 2), F(7, 2))


def test_reduce_max_checker_flags_cut_slowest():
    tr = fake(rv("1/2", "1/4"), [1] * 20)
    kinds = {x.kind for x in check_reduce_max_invariant(tr)}
    assert "intermediate" in kinds


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 12), st.integers(0, 10**6))
def test_reduce_max_checker_clean_on_reduce_max(n, seed):
    rates = random_rates(random.Random(seed), n)
    tr = run(rates, Variant.FLUSH, REDUCE_MAX, 400)
    assert check_reduce_max_invariant(tr) == []
    assert backlog(tr).max_intermediate < theorem_bound(REDUCE_MAX, rates)


# -- Deadline-Driven audit --------------------------------------------------

def test_dds_audit_overflow():
    audit = audit_dds(fake(rv("1/2"), [None] * 4))
    assert audit.overflows == [(0, 4)]
    assert {v.kind for v in audit.violations} >= {"overflow", "idle_with_request"}


def test_dds_audit_no_requests():
    audit = audit_dds(fake(rv("1/3", "1/3", "1/3"), [None] * 2))
    assert audit.requests == 0
    assert audit.violations == []
    assert audit.open_requests == [None] * 3


def test_dds_audit_two_bamboo_clean():
    c = two_bamboo(F(1, 100))
    audit = audit_dds(run(c.rates, Variant.FLUSH, DEADLINE_DRIVEN, 2_000))
    assert audit.overflows == []
    assert audit.violations == []
    assert audit.requests > 0
    assert audit.summary()["completions"] == len(audit.completions)


def test_dds_audit_flags_cut_below_one():
    audit = audit_dds(fake(rv("1/2", "1/4"), [0]))
    assert [v.kind for v in audit.violations] == ["cut_below_one"]


# -- Reduce-Fastest audit ---------------------------------------------------

def test_rf_audit_claim_violation():
    # rate 1/10 reaches 2 at step 20; the fast bamboo is then cut 3 times
    # before the slow one is served, so 1/5 >= 3 * 1/10 must fail
    tr = fake(rv("1/5", "1/10"), [None] * 19 + [0, 0, 0, 1])
    claims = [v for v in audit_reduce_fastest(tr, 2).violations if v.kind == "claim"]
    assert len(claims) == 1
    assert (claims[0].index, claims[0].lhs, claims[0].rhs) == (0, F(1, 5), F(3, 10))


def test_rf_audit_clean_on_uniform():
    c = uniform(100, 2)
    tr = run(c.rates, Variant.FLUSH, reduce_fastest(2), 2_000)
    audit = audit_reduce_fastest(tr, 2)
    assert audit.violations == []
    assert audit.windows >= 100
    assert backlog(tr).max_intermediate >= F(299, 100)


def test_rf_audit_needs_x_at_least_two():
    with pytest.raises(ValueError):
        audit_reduce_fastest(fake(rv("1/2"), [None]), F(3, 2))


# -- bounds -----------------------------------------------------------------

def test_reference_bound_at_two():
    # max(2 + 4/4, 1/2 + 2 + 4/6) = max(3, 19/6)
    assert bilo_reference_bound(2) == F(19, 6)


@pytest.mark.parametrize("x", [F(101, 100), F(3, 2), 2, 3, 10])
def test_reference_bound_at_least_five_halves(x):
    assert bilo_reference_bound(x) >= F(5, 2)


def test_reference_bound_domain():
    with pytest.raises(ValueError):
        bilo_reference_bound(1)


def test_theorem_bounds():
    r = rv("1/2", "1/4")
    assert theorem_bound(REDUCE_MAX, r) == F(7, 2)
    assert theorem_bound(DEADLINE_DRIVEN, r) == 2
    assert theorem_bound(reduce_fastest(3), r) == 4
    assert theorem_bound(reduce_fastest(1), r) is None
