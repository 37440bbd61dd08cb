import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surgery_lab.census import CensusTable
from surgery_lab.entropy import (
    BoundSequenceParams,
    abramov_transfer,
    closed_form_next,
    growth_type_classify,
    homotopy_bound_sequence,
    next_period,
    pesin_consistency,
    rescale_table,
)


def test_abramov():
    assert abramov_transfer(1.0, 1.0) == 1.0
    assert abramov_transfer(1.0, 0.5) == 0.5
    with pytest.raises(ValueError):
        abramov_transfer(1.0, 0.0)


def test_pesin_consistency():
    assert pesin_consistency([1.2, 1.0, 1.5], q=1)["ok"]
    bad = pesin_consistency([1.2, 0.9], q=1)
    assert not bad["ok"] and bad["offending_index"] == 1
    assert pesin_consistency(np.ones(5), q=0, no_crossings=True)["deviation"] == 0.0
    assert not pesin_consistency([1.0, 1.01], q=0, no_crossings=True)["ok"]
    # negative twist carries no lower bound
    assert pesin_consistency([0.3], q=-1)["ok"]


def _table(T, N):
    return CensusTable(T, np.maximum.accumulate(np.round(N).astype(np.int64)), "synthetic")


def test_classifier_on_synthetic_tables():
    T = np.linspace(5.0, 40.0, 12)
    lab = growth_type_classify(_table(T, np.exp(0.9 * T)))
    assert lab.kind == "exponential" and lab.value == pytest.approx(0.9, abs=1e-3)
    assert lab.ci[0] <= lab.value <= lab.ci[1]
    T = np.geomspace(10.0, 1e4, 12)
    lab = growth_type_classify(_table(T, 3.0 * T**2))
    assert lab.kind == "polynomial" and lab.value == pytest.approx(2.0, abs=1e-3)
    flat = growth_type_classify(_table(T, np.full(12, 7.0)))
    assert flat.kind == "polynomial" and flat.value == 0.0


def test_classifier_preconditions():
    with pytest.raises(ValueError):
        growth_type_classify(_table(np.geomspace(10, 1e4, 6), np.arange(1, 7)))
    with pytest.raises(ValueError):
        growth_type_classify(_table(np.linspace(10, 20, 10), np.linspace(10, 20, 10)))


@given(st.sampled_from(["poly", "exp"]), st.floats(0.2, 5.0), st.floats(0.05, 20.0))
@settings(max_examples=40, deadline=None)
def test_classifier_invariant_under_rescaling(kind, rate, C):
    if kind == "poly":
        T = np.geomspace(10.0, 1e3, 10)
        N = 2.0 * T**rate
    else:
        T = np.linspace(1.0, 20.0 / rate, 10)
        N = 5.0 * np.exp(rate * T)
    table = _table(T, N)
    a = growth_type_classify(table)
    b = growth_type_classify(rescale_table(table, C))
    assert a.kind == b.kind
    if kind == "poly":
        assert b.value == pytest.approx(a.value, rel=1e-9)
    else:
        assert b.value == pytest.approx(C * a.value, rel=1e-9)


@given(st.floats(0.0, 50.0))
def test_recursion_matches_closed_form(log_T):
    p = BoundSequenceParams(a1=1.5, c1=0.3, a2=2.0, c2=0.1, E=3.0, e=1.0)
    assert next_period(p, log_T) == pytest.approx(closed_form_next(p, log_T), rel=1e-12, abs=1e-12)


def test_unit_exponents_grow_by_2e():
    p = BoundSequenceParams()
    seq = homotopy_bound_sequence(p, 1e40)
    ratios = np.diff(seq.log_T)
    assert np.allclose(ratios, np.log(2 * np.e), rtol=1e-12)
    assert seq.bound_kind == "log"


@pytest.mark.parametrize("a1", [1.0, 2.0])
def test_bound_sits_under_the_staircase(a1):
    seq = homotopy_bound_sequence(BoundSequenceParams(a1=a1), 1e300)
    T = np.geomspace(seq.params.T0, 1e300, 5000)
    assert np.all(seq.bound(T)[T > np.e] <= seq.staircase(T)[T > np.e] + 1e-9)
    assert seq.c6 >= 0
    assert seq.bound_kind == ("loglog" if a1 > 1 else "log")


def test_bound_sequence_guards():
    with pytest.raises(ValueError):
        homotopy_bound_sequence(BoundSequenceParams(a1=0.5), 1e10)
    with pytest.raises(ValueError):
        BoundSequenceParams(E=0.5)
    with pytest.raises(ArithmeticError):
        homotopy_bound_sequence(BoundSequenceParams(), 1e300, max_terms=3)
