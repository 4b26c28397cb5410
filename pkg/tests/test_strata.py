import pytest
from hypothesis import given
from hypothesis import strategies as st

from repsample.errors import EmptyInput, FieldOutOfRange, InsufficientCandidates
from repsample.geomodel import PlanarPoint, SamplingUnit, validate_candidates
from repsample.strata import SHANGHAI_Q1_BUILTUP, allocate, quartile_threshold, stratify


def cands(builtups):
    return validate_candidates(
        [SamplingUnit(id=i, centroid=PlanarPoint(i * 1000.0, 0.0), cell_side=1000.0, builtup=b) for i, b in enumerate(builtups)]
    )


def hand_q1(values):
    # zero-based rank 0.25*(n-1), linear between neighbouring order statistics
    v = sorted(values)
    pos = 0.25 * (len(v) - 1)
    lo = int(pos)
    hi = min(lo + 1, len(v) - 1)
    return v[lo] + (pos - lo) * (v[hi] - v[lo])


def test_quartile_examples():
    assert quartile_threshold([0.0, 0.1, 0.2, 0.9]) == pytest.approx(0.075, abs=1e-15)
    assert quartile_threshold([0.5] * 4) == 0.5
    with pytest.raises(EmptyInput):
        quartile_threshold([])


def test_reference_threshold_is_not_a_default():
    assert SHANGHAI_Q1_BUILTUP == 0.16
    assert quartile_threshold([0.3, 0.4, 0.5]) != SHANGHAI_Q1_BUILTUP


@given(st.lists(st.floats(0, 1), min_size=1, max_size=50), st.randoms())
def test_quartile_matches_hand_and_is_permutation_invariant(values, rnd):
    shuffled = values[:]
    rnd.shuffle(shuffled)
    q = quartile_threshold(values)
    assert q == quartile_threshold(shuffled)
    assert q == pytest.approx(hand_q1(values), abs=1e-12)


def test_stratify_boundary_inclusive():
    st_ = stratify(cands([0.1, 0.16, 0.5]), 0.16)
    assert sorted(u.builtup for u in st_.dense) == [0.16, 0.5]
    assert [u.builtup for u in st_.sparse] == [0.1]
    assert st_.dense.total_area == 2e6 and st_.sparse.total_area == 1e6


def test_stratify_threshold_zero_and_range():
    assert len(stratify(cands([0.0, 0.3]), 0.0).sparse) == 0
    with pytest.raises(FieldOutOfRange):
        stratify(cands([0.3]), 1.01)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=40), st.floats(0, 1), st.floats(0, 1))
def test_partition_and_monotone(values, t1, t2):
    cs = cands(values)
    lo, hi = sorted((t1, t2))
    a, b = stratify(cs, lo), stratify(cs, hi)
    for s in (a, b):
        ids_d, ids_s = set(s.dense.ids), set(s.sparse.ids)
        assert ids_d | ids_s == set(cs.ids) and not ids_d & ids_s
        assert all(u.builtup >= s.threshold for u in s.dense)
    # raising the threshold never moves a sparse unit into dense
    assert set(a.sparse.ids) <= set(b.sparse.ids)


def test_allocate():
    a = allocate(100, 0.8)
    assert (a.n_dense, a.n_sparse) == (80, 20)
    assert (allocate(10, 0.0).n_dense, allocate(10, 0.0).n_sparse) == (0, 10)
    assert allocate(5, 0.5).n_dense == 3  # 2.5 rounds away from zero
    with pytest.raises(FieldOutOfRange):
        allocate(10, 1.5)


def test_allocate_insufficient():
    s = stratify(cands([0.5] * 50 + [0.0] * 50), 0.16)
    with pytest.raises(InsufficientCandidates):
        allocate(100, 0.8, s)
    assert allocate(50, 0.8, s).n_dense == 40
