import io

import pytest
from hypothesis import given
from hypothesis import strategies as st

from repsample.annealer import (
    AnnealConfig,
    SPATIAL,
    acceptance_probability,
    cool,
    init_solution,
    iterations_to_converge,
    make_rng,
    perturb_diversity,
    perturb_spatial,
    read_trace_csv,
    run,
    write_trace_csv,
)
from repsample.errors import (
    ExhaustedCandidates,
    FieldOutOfRange,
    InsufficientCandidates,
    NonPositiveTemperature,
    TooFewSamples,
)
from repsample.geomodel import PlanarPoint, SamplingUnit, Solution, check_solution, validate_candidates


def test_acceptance_examples():
    assert acceptance_probability(-0.5, 1.0) == 1.0
    assert acceptance_probability(0.0, 1.0) == 1.0
    # mpmath exp(-0.1)
    assert acceptance_probability(0.1, 1.0) == pytest.approx(0.90483741803595957316, rel=1e-15)
    with pytest.raises(NonPositiveTemperature):
        acceptance_probability(0.1, 0.0)


@given(st.floats(0, 10), st.floats(0, 10), st.floats(1e-6, 10), st.floats(1e-6, 10))
def test_acceptance_monotone(d1, d2, t1, t2):
    lo, hi = sorted((d1, d2))
    assert acceptance_probability(hi, t1) <= acceptance_probability(lo, t1)
    cold, hot = sorted((t1, t2))
    assert acceptance_probability(d1, cold) <= acceptance_probability(d1, hot)


def test_low_temperature_rejects_worsening():
    assert acceptance_probability(1.0, 1e-8 * (1 + 1e-9)) < 1e-100
    rng = make_rng(0)
    deltas = rng.uniform(0.01, 1.0, size=10_000)
    accepted = sum(rng.random() < acceptance_probability(d, 1e-6) for d in deltas)
    assert accepted == 0


def test_cool():
    assert cool(1.0, 0.999) == 0.999
    t = 1.0
    for _ in range(5000):
        t = cool(t, 0.999)
    assert t == pytest.approx(0.0067211119598656178, rel=1e-12)


def test_config_validation():
    with pytest.raises(FieldOutOfRange):
        AnnealConfig(n=5, alpha=1.0)
    with pytest.raises(FieldOutOfRange):
        AnnealConfig(n=5, t0=0.0)
    with pytest.raises(FieldOutOfRange):
        AnnealConfig(n=5, max_iters=-1)


def grid_units(k=4, mul=None):
    units = []
    for i in range(k * k):
        m = 0.5 if mul is None else mul(i)
        units.append(SamplingUnit(i, PlanarPoint(i % k * 10.0, i // k * 10.0), 10.0, mul=m))
    return validate_candidates(units)


def test_init_solution(small_candidates):
    a = init_solution(small_candidates, 10, make_rng(3))
    b = init_solution(small_candidates, 10, make_rng(3))
    assert a == b
    check_solution(a, small_candidates, 10)
    whole = init_solution(small_candidates, len(small_candidates), make_rng(0))
    assert sorted(whole.member_ids) == sorted(small_candidates.ids)
    with pytest.raises(TooFewSamples):
        init_solution(small_candidates, 1, make_rng(0))
    with pytest.raises(InsufficientCandidates):
        init_solution(small_candidates, 101, make_rng(0))


def test_perturb_spatial_tie_rule():
    # unit-square corners are all 1 apart; the far candidate is the only non-member
    pts = [(0, 0), (1, 0), (0, 1), (1, 1), (50, 50)]
    units = validate_candidates([SamplingUnit(i, PlanarPoint(*p), 1.0, mul=0.5) for i, p in enumerate(pts)])
    sol = Solution((3, 1, 2, 0), 1.0, 2.0)
    prop = perturb_spatial(sol, units, make_rng(0))
    assert prop.member_ids == (3, 1, 2, 4)


def test_perturb_diversity_argmin_and_tie():
    cands = validate_candidates(
        [SamplingUnit(i, PlanarPoint(i * 10.0, 0), 10.0, mul=m) for i, m in enumerate([0.9, 0.2, 0.9, 0.5])]
    )
    prop = perturb_diversity(Solution((0, 1, 2), 1.0, 1.0), cands, make_rng(0))
    assert prop.member_ids == (0, 3, 2)
    flat = grid_units(2)
    prop = perturb_diversity(Solution((2, 1, 3), 1.0, 1.0), flat, make_rng(0))
    assert prop.member_ids == (2, 0, 3)


def test_perturb_exhausted():
    cands = grid_units(2)
    full = Solution((0, 1, 2, 3), 1.0, 1.0)
    with pytest.raises(ExhaustedCandidates):
        perturb_spatial(full, cands, make_rng(0))
    with pytest.raises(ExhaustedCandidates):
        perturb_diversity(full, cands, make_rng(0))


@pytest.mark.parametrize("seed", range(10))
def test_perturb_structure(small_candidates, seed):
    rng = make_rng(seed)
    sol = init_solution(small_candidates, 12, rng)
    for move in (perturb_spatial, perturb_diversity):
        prop = move(sol, small_candidates, rng)
        check_solution(prop, small_candidates, 12)
        assert len(set(prop.member_ids) - set(sol.member_ids)) == 1


def test_zero_iterations_when_already_cold(small_candidates):
    res = run(small_candidates, AnnealConfig(n=5, t0=1e-9, t_tol=1e-8))
    assert res.trace == []
    assert res.best == res.initial
    res = run(small_candidates, AnnealConfig(n=5, max_iters=0))
    assert res.trace == [] and res.best == res.initial


def trace_csv(trace):
    s = io.StringIO()
    write_trace_csv(trace, s)
    return s.getvalue()


def test_run_deterministic(small_candidates):
    cfg = AnnealConfig(n=8, seed=42, max_iters=300)
    assert trace_csv(run(small_candidates, cfg).trace) == trace_csv(run(small_candidates, cfg).trace)
    other = AnnealConfig(n=8, seed=43, max_iters=300)
    assert trace_csv(run(small_candidates, other).trace) != trace_csv(run(small_candidates, cfg).trace)


def test_trace_roundtrip(small_candidates):
    for mode in ("dual", SPATIAL):
        trace = run(small_candidates, AnnealConfig(n=6, max_iters=50), objectives=mode).trace
        assert read_trace_csv(io.StringIO(trace_csv(trace))) == trace


@pytest.mark.parametrize("seed", range(5))
def test_trace_invariants(small_candidates, seed):
    cfg = AnnealConfig(n=10, seed=seed, max_iters=800)
    seen = []
    res = run(small_candidates, cfg, observer=lambda e, stage, ids: seen.append(ids))
    assert len(seen) == 1 + 2 * len(res.trace)
    for ids in seen:
        check_solution(Solution(ids, 1.0, 1.0), small_candidates, 10)
    ann = [r.cost_ann_best for r in res.trace]
    amul = [r.cost_amul_best for r in res.trace]
    assert all(b <= a for a, b in zip(ann, ann[1:]))
    assert all(b <= a for a, b in zip(amul, amul[1:]))
    for row in res.trace:
        assert row.temperature == pytest.approx(cfg.t0 * cfg.alpha**row.iter, rel=1e-12)
        assert 0.0 <= row.p_spatial <= 1.0 and 0.0 <= row.p_diversity <= 1.0
    assert res.best.cost_ann <= res.initial.cost_ann and res.best.cost_amul <= res.initial.cost_amul


def test_spatial_only_mode(small_candidates):
    res = run(small_candidates, AnnealConfig(n=10, max_iters=400), objectives=SPATIAL)
    assert all(r.accepted_diversity is None and r.p_diversity is None for r in res.trace)
    ann = [r.cost_ann_best for r in res.trace]
    assert all(b <= a for a, b in zip(ann, ann[1:]))
    assert res.best.cost_ann == min([res.initial.cost_ann] + [r.cost_ann_current for r in res.trace])


def test_best_is_costed_correctly(small_candidates):
    res = run(small_candidates, AnnealConfig(n=10, seed=1, max_iters=500))
    check_solution(res.best, small_candidates, 10)


def test_pinned_regression(small_candidates):
    """10x10 scenario, seed 7, n = 10, default schedule."""
    res = run(small_candidates, AnnealConfig(n=10, seed=7))
    assert len(res.trace) == 5000
    assert res.initial.cost_ann == pytest.approx(0.8321783316232576, rel=1e-12)
    assert res.initial.cost_amul == pytest.approx(1.8223162802541586, rel=1e-12)
    assert res.best.cost_ann == pytest.approx(0.5335329404164102, rel=1e-12)
    assert res.best.cost_amul == pytest.approx(1.1722455559817941, rel=1e-12)
    assert res.best.member_ids == (79, 82, 38, 20, 54, 8, 4, 91, 95, 61)
    assert res.final.cost_ann == pytest.approx(0.5916793362251168, rel=1e-12)
    assert res.final.cost_amul == pytest.approx(1.2478317685306122, rel=1e-12)


def test_iterations_to_converge():
    assert iterations_to_converge([]) == 0
    assert iterations_to_converge([5.0, 3.0, 2.01, 2.0]) == 3
    assert iterations_to_converge([2.0, 2.0]) == 1
