import io

import pytest

from repsample.annealer import AnnealConfig
from repsample.diversity import enrich_units
from repsample.errors import InsufficientCandidates
from repsample.geomodel import check_solution
from repsample.ingest import write_pois_csv, write_units_csv
from repsample.strata import DENSE, SPARSE
from repsample.synth import (
    METHODS,
    ScenarioSpec,
    compare,
    generate_scenario,
    make_rng,
    prepare,
    read_report_csv,
    sample_random,
    sample_spatial_only,
    sample_stratified_random,
    sign_test_less,
    write_report_csv,
)


def scenario_bytes(spec):
    sc = generate_scenario(spec)
    u, p = io.StringIO(), io.StringIO()
    write_units_csv(list(sc.candidates), u)
    write_pois_csv(sc.pois, p)
    return u.getvalue(), p.getvalue()


def test_grid_size():
    sc = generate_scenario(ScenarioSpec(nx=10, ny=5))
    assert len(sc.candidates) == 50


def test_scenario_deterministic():
    spec = ScenarioSpec(nx=8, ny=8, seed=3)
    assert scenario_bytes(spec) == scenario_bytes(spec)
    assert scenario_bytes(spec) != scenario_bytes(ScenarioSpec(nx=8, ny=8, seed=4))


def test_no_pois_means_zero_mul():
    sc = generate_scenario(ScenarioSpec(nx=6, ny=6, pois_per_cluster=0))
    assert all(u.mul == 0.0 for u in enrich_units(list(sc.candidates)))


def test_builtup_range():
    sc = generate_scenario(ScenarioSpec(nx=10, ny=10, builtup_peak=0.7))
    values = [u.builtup for u in sc.candidates]
    assert min(values) >= 0 and max(values) == pytest.approx(0.7)


def test_spec_validation():
    with pytest.raises(ValueError):
        ScenarioSpec(nx=0)
    with pytest.raises(ValueError):
        ScenarioSpec(builtup_peak=1.5)


def test_sample_random(small_candidates):
    whole = sample_random(small_candidates, len(small_candidates), make_rng(0))
    assert sorted(whole.member_ids) == sorted(small_candidates.ids)
    assert sample_random(small_candidates, 7, make_rng(5)) == sample_random(small_candidates, 7, make_rng(5))
    with pytest.raises(InsufficientCandidates):
        sample_random(small_candidates, 101, make_rng(0))


@pytest.fixture(scope="module")
def small_prepared(small_candidates):
    return prepare(small_candidates, n_total=20)


def test_stratified_random(small_prepared):
    strat, alloc = small_prepared.stratification, small_prepared.allocation
    dense, sparse = sample_stratified_random(strat, alloc, make_rng(1))
    assert dense.n == alloc.n_dense and sparse.n == alloc.n_sparse
    assert set(dense.member_ids) <= set(strat.dense.ids)
    assert set(sparse.member_ids) <= set(strat.sparse.ids)


@pytest.mark.parametrize("seed", range(100))
def test_samplers_structurally_valid(small_candidates, small_prepared, seed):
    check_solution(sample_random(small_candidates, 9, make_rng(seed)), small_candidates, 9)
    strat, alloc = small_prepared.stratification, small_prepared.allocation
    dense, sparse = sample_stratified_random(strat, alloc, make_rng(seed))
    check_solution(dense, strat.dense, alloc.n_dense)
    check_solution(sparse, strat.sparse, alloc.n_sparse)


def test_spatial_only(small_candidates):
    res = sample_spatial_only(small_candidates, 10, AnnealConfig(n=10, seed=7))
    assert all(r.accepted_diversity is None and r.p_diversity is None for r in res.trace)
    # pinned on the 10x10 seed-7 scenario
    assert res.initial.cost_ann == pytest.approx(0.8321783316232576, rel=1e-12)
    assert res.best.cost_ann == pytest.approx(0.4567179343536071, rel=1e-12)
    assert res.best.cost_amul == pytest.approx(1.85816700913682, rel=1e-12)
    cold = sample_spatial_only(small_candidates, 10, AnnealConfig(n=10, t0=1e-9))
    assert cold.best == cold.initial and cold.trace == []


def report_text(report):
    s = io.StringIO()
    write_report_csv(report, s)
    return s.getvalue()


QUICK = AnnealConfig(n=2, max_iters=200)


def test_compare_rows(small_prepared):
    rep = compare(small_prepared, ["random"], 1)
    assert [(r.method, r.stratum) for r in rep.rows] == [("random", DENSE), ("random", SPARSE)]
    assert sum(r.n for r in rep.rows) == small_prepared.allocation.n_total


def test_compare_deterministic_and_roundtrip(small_prepared):
    a = report_text(compare(small_prepared, METHODS, 2, QUICK))
    assert a == report_text(compare(small_prepared, METHODS, 2, QUICK))
    assert report_text(read_report_csv(io.StringIO(a))) == a


def test_compare_method_order_invariant(small_prepared):
    forward = compare(small_prepared, list(METHODS), 2, QUICK)
    backward = compare(small_prepared, list(reversed(METHODS)), 2, QUICK)
    assert forward.summary() == backward.summary()


def test_compare_parallel_matches_serial(small_prepared):
    serial = compare(small_prepared, ["dual", "stratified"], 2, QUICK)
    parallel = compare(small_prepared, ["dual", "stratified"], 2, QUICK, jobs=2)
    assert report_text(serial) == report_text(parallel)


def test_stratified_is_annealer_start(small_prepared):
    # every within-stratum method shares the per-stratum stream
    rep = compare(small_prepared, ["stratified", "spatial"], 1, AnnealConfig(n=2, max_iters=0))
    for stratum in (DENSE, SPARSE):
        assert rep.values("stratified", stratum, "final_cost_ann") == rep.values("spatial", stratum, "final_cost_ann")


def test_compare_pinned(small_prepared):
    rep = compare(small_prepared, METHODS, 2, AnnealConfig(n=2, max_iters=300))
    dual = rep.values("dual", DENSE, "final_cost_amul")
    assert dual == pytest.approx([1.321484154591815, 1.2443485168377135], rel=1e-12)
    assert rep.values("spatial", SPARSE, "final_cost_ann") == pytest.approx([0.14705882352941177] * 2, rel=1e-12)


def test_sign_test():
    assert sign_test_less([1] * 20, [2] * 20) == pytest.approx(0.5**20)
    assert sign_test_less([1, 2], [1, 2]) == 1.0
    assert sign_test_less([3] * 10, [2] * 10) == 1.0
