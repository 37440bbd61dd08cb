import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from surgery_lab.census import (
    BudgetExceeded,
    CensusTable,
    canonical_rotation,
    canonical_word,
    class_chords,
    classify_orbit_type,
    complementary_handle,
    disjoint_class_census,
    enumerate_classes,
    geodesic_table,
    handle_word,
    intersection_number,
    invert_word,
    necklace_count,
    primitive_necklaces,
    primitive_period,
    reduced_words,
    reference_curve,
)
from surgery_lab.hyperbolic import build_genus2_surface

SURF = build_genus2_surface()
words = st.lists(st.integers(0, 7), min_size=1, max_size=12).map(tuple)


@pytest.fixture(scope="module")
def census9():
    return enumerate_classes(SURF, 9.0)


@pytest.fixture(scope="module")
def curve():
    return reference_curve(SURF)


@given(words, st.integers(0, 20))
def test_canonical_word_is_a_class_invariant(w, k):
    k %= len(w)
    rotated = w[k:] + w[:k]
    assert canonical_word(rotated) == canonical_word(w)
    assert canonical_word(invert_word(w)) == canonical_word(w)
    assert canonical_rotation(rotated) == canonical_rotation(w)


@given(words, st.integers(1, 4))
def test_primitive_period_of_powers(w, m):
    assert primitive_period(w * m) == primitive_period(w)
    assert len(w) % primitive_period(w) == 0


def test_systole_multiplicity(census9):
    # 12 unoriented systoles on the regular octagon surface, 24 oriented classes
    shortest = [e for e in census9 if abs(e.length - SURF.systole) < 1e-8]
    assert len(shortest) == 24
    assert min(e.length for e in census9) == pytest.approx(SURF.systole, abs=1e-9)


def test_entries_are_consistent(census9):
    for e in census9[:: max(1, len(census9) // 200)]:
        m = SURF.word_matrix(e.word)
        tr = abs(np.trace(m))
        assert tr == pytest.approx(abs(e.trace), rel=1e-8)
        assert e.length == pytest.approx(2 * math.acosh(abs(e.trace) / 2), rel=1e-10)
        assert e.word == canonical_rotation(e.word)


def test_classes_are_distinct_and_come_in_reversed_pairs(census9):
    assert len({e.word for e in census9}) == len(census9)
    # reversing orientation gives a distinct class of the same length
    lengths = np.round([e.length for e in census9 if e.primitive], 6)
    _, counts = np.unique(lengths, return_counts=True)
    assert np.all(counts % 2 == 0)


def test_census_budget_guards():
    with pytest.raises(BudgetExceeded):
        enumerate_classes(SURF, 20.0)


def test_geodesic_table_monotone(census9):
    table = geodesic_table(census9, np.linspace(4, 9, 11))
    assert np.all(np.diff(table.counts) >= 0)
    with pytest.raises(ValueError):
        CensusTable([1.0, 1.0], [1, 2], "bad")
    with pytest.raises(ValueError):
        CensusTable([1.0, 2.0], [2, 1], "bad")


def test_reference_curve_types(curve):
    assert classify_orbit_type(class_chords(SURF, (0,)), curve) == "on_torus"
    assert classify_orbit_type(class_chords(SURF, (4,)), curve) == "on_torus"
    for k in (1, 2, 3, 5, 6, 7):
        assert classify_orbit_type(class_chords(SURF, (k,)), curve) == "transverse"


def test_intersection_number_is_symmetric(curve):
    a = class_chords(SURF, (1,))
    b = class_chords(SURF, (2, 7))
    n_ab, _ = intersection_number(a, b)
    n_ba, _ = intersection_number(b, a)
    assert n_ab == n_ba


def test_handle_classes_miss_the_curve(curve):
    handle = complementary_handle(SURF, curve)
    for n in (1, 2, 3):
        for w in primitive_necklaces(n)[:6]:
            word = handle_word(handle, tuple(int(x) for x in w))
            assert classify_orbit_type(class_chords(SURF, word), curve) == "disjoint"
    a, b = handle.mats
    assert not np.allclose(a @ b, b @ a)


def test_reduced_words_count():
    for n in range(1, 7):
        assert len(reduced_words(n)) == 4 * 3 ** (n - 1)


def _brute_primitive_classes(n):
    inv = (2, 3, 0, 1)
    seen = set()
    for w in itertools.product(range(4), repeat=n):
        if any(w[i + 1] == inv[w[i]] for i in range(n - 1)) or (n > 1 and w[0] == inv[w[-1]]):
            continue
        if primitive_period(w) != n:
            continue
        seen.add(canonical_rotation(w))
    return len(seen)


def test_necklaces_match_brute_force_and_mobius():
    for n in range(1, 8):
        assert len(primitive_necklaces(n)) == _brute_primitive_classes(n) == necklace_count(n)
    assert [necklace_count(n) for n in range(1, 6)] == [4, 4, 8, 18, 48]


def test_disjoint_census_rate():
    table = disjoint_class_census(13)
    assert table.new[0] == 4 and table.new[1] == 4
    assert abs(table.fit["rate_per_letter"] / math.log(3) - 1) <= 0.05
