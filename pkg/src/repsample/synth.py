"""Synthetic study areas, baseline samplers and the sampler comparison harness.

The harness scores each sampler by the cost functions it achieves per
stratum. It does not train any downstream model.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence, TextIO

import numpy as np
from scipy.stats import binomtest

from . import annealer
from .annealer import AnnealConfig, AnnealResult, make_rng
from .diversity import enrich_units
from .errors import FieldOutOfRange, InsufficientCandidates, SamplingError
from .geomodel import CandidateSet, PlanarPoint, SamplingUnit, Solution, validate_candidates
from .ingest import Poi, assign_pois_to_cells, generate_grid, BoundingBox
from .spatial import cost_ann_from_distances, cost_amul, nn_distances_xy
from .strata import DENSE, SPARSE, STRATA, Allocation, Stratification, allocate, quartile_threshold, stratify

METHODS = ("random", "stratified", "spatial", "dual")
REPORT_HEADER = ("method", "seed", "stratum", "n", "final_cost_ann", "final_cost_amul", "wall_time_ms")

# RNG sub-streams. Every method sampling within a stratum uses the same
# stream for a given seed, so the annealers start from the stratified-random
# draw and the comparison is paired.
STRATUM_STREAM = {DENSE: 0, SPARSE: 1}
WHOLE_AREA_STREAM = 2
SCENARIO_STREAM = 100


@dataclass(frozen=True)
class ScenarioSpec:
    nx: int = 50
    ny: int = 50
    cell_side: float = 1000.0
    n_clusters: int = 20
    pois_per_cluster: int = 500
    n_categories: int = 8
    cluster_spread: float = 8000.0
    builtup_peak: float = 0.9
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("nx", "ny", "n_clusters", "n_categories"):
            if getattr(self, name) <= 0:
                raise FieldOutOfRange(name, getattr(self, name))
        if self.pois_per_cluster < 0:
            raise FieldOutOfRange("pois_per_cluster", self.pois_per_cluster)
        if not (self.cell_side > 0 and self.cluster_spread > 0):
            raise FieldOutOfRange("cell_side/cluster_spread", (self.cell_side, self.cluster_spread))
        if not (0 < self.builtup_peak <= 1):
            raise FieldOutOfRange("builtup_peak", self.builtup_peak)


@dataclass(frozen=True)
class Scenario:
    spec: ScenarioSpec
    candidates: CandidateSet
    pois: list[Poi]
    out_of_grid_count: int


def generate_scenario(spec: ScenarioSpec) -> Scenario:
    """Gaussian POI clusters with random category mixes over a regular grid.

    Built-up proportion is a smoothed kernel density of the cluster centres,
    scaled so its maximum equals ``builtup_peak``. Units come back with POI
    counts but without diversity; run :func:`repsample.diversity.enrich_units`.
    """
    rng = make_rng(spec.seed, SCENARIO_STREAM)
    width, height = spec.nx * spec.cell_side, spec.ny * spec.cell_side
    grid = generate_grid(BoundingBox(0.0, 0.0, width, height), spec.cell_side)

    centers = rng.uniform([0.0, 0.0], [width, height], size=(spec.n_clusters, 2))
    categories = [f"cat{k:02d}" for k in range(spec.n_categories)]
    pois: list[Poi] = []
    for c in centers:
        mix = rng.dirichlet(np.ones(spec.n_categories))
        xy = c + rng.normal(0.0, spec.cluster_spread, size=(spec.pois_per_cluster, 2))
        cats = rng.choice(spec.n_categories, size=spec.pois_per_cluster, p=mix)
        for (x, y), k in zip(xy, cats):
            pois.append(Poi(id=len(pois), location=PlanarPoint(float(x), float(y)), category=categories[int(k)]))

    assignment = assign_pois_to_cells(pois, grid)
    cx = np.array([u.x for u in grid])
    cy = np.array([u.y for u in grid])
    bandwidth = 1.5 * spec.cluster_spread
    d2 = (cx[:, None] - centers[None, :, 0]) ** 2 + (cy[:, None] - centers[None, :, 1]) ** 2
    density = np.exp(-d2 / (2 * bandwidth**2)).sum(axis=1)
    builtup = spec.builtup_peak * density / density.max()
    units = [u.with_(builtup=float(b)) for u, b in zip(assignment.units, builtup)]
    return Scenario(spec, validate_candidates(units), pois, assignment.out_of_grid_count)


@dataclass(frozen=True)
class Prepared:
    """An enriched, stratified and allocated study area ready for sampling."""

    candidates: CandidateSet
    stratification: Stratification
    allocation: Allocation


def prepare(
    candidates: CandidateSet | Sequence[SamplingUnit],
    *,
    threshold: float | None = None,
    n_total: int = 100,
    dense_fraction: float = 0.8,
) -> Prepared:
    """Enrich (if needed), stratify at ``threshold`` (default: lower quartile) and allocate."""
    units = list(candidates)
    if any(u.mul is None for u in units):
        units = enrich_units(units)
    cset = validate_candidates(units)
    if threshold is None:
        threshold = quartile_threshold([u.builtup for u in cset])
    strat = stratify(cset, threshold)
    return Prepared(cset, strat, allocate(n_total, dense_fraction, strat))


def default_prepared(seed: int = 0) -> Prepared:
    return prepare(generate_scenario(ScenarioSpec(seed=seed)).candidates)


# -- samplers -----------------------------------------------------------------


def evaluate(candidates: CandidateSet, member_ids: Sequence[int]) -> tuple[float, float]:
    """(Cost_ANN, Cost_AMUL) of ``member_ids`` within ``candidates``; NaN where undefined."""
    by_id = candidates.by_id()
    units = [by_id[i] for i in member_ids]
    ann = amul = math.nan
    if len(units) >= 2:
        xs = np.array([u.x for u in units])
        ys = np.array([u.y for u in units])
        try:
            ann = cost_ann_from_distances(nn_distances_xy(xs, ys), candidates.total_area)
        except SamplingError:
            pass
    if units and all(u.mul is not None for u in units):
        try:
            amul = cost_amul([u.mul for u in units])
        except SamplingError:
            pass
    return ann, amul


def sample_random(candidates: CandidateSet, n: int, rng: np.random.Generator) -> Solution:
    """Uniform draw without replacement. Costs are NaN where undefined."""
    if n < 0 or n > len(candidates):
        raise InsufficientCandidates(f"{len(candidates)} candidates cannot supply {n} samples")
    perm = rng.permutation(len(candidates))
    ids = tuple(candidates.units[int(k)].id for k in perm[:n])
    return Solution(ids, *evaluate(candidates, ids))


def sample_stratified_random(
    stratification: Stratification,
    allocation: Allocation,
    rng: np.random.Generator | Mapping[str, np.random.Generator],
) -> tuple[Solution, Solution]:
    """Independent uniform draws per stratum; ``rng`` may be one generator or one per stratum name."""
    out = []
    for name in STRATA:
        g = rng[name] if isinstance(rng, Mapping) else rng
        out.append(sample_random(stratification.get(name), allocation.get(name), g))
    return out[0], out[1]


def sample_spatial_only(candidates: CandidateSet, n: int, config: AnnealConfig) -> AnnealResult:
    """The annealer with the diversity move switched off (spread-only baseline)."""
    if config.n != n:
        config = AnnealConfig(n=n, t0=config.t0, alpha=config.alpha, t_tol=config.t_tol,
                              max_iters=config.max_iters, seed=config.seed, stream=config.stream)
    return annealer.run(candidates, config, objectives=annealer.SPATIAL)


# -- comparison harness -------------------------------------------------------


@dataclass(frozen=True)
class ReportRow:
    method: str
    seed: int
    stratum: str
    n: int
    final_cost_ann: float
    final_cost_amul: float
    wall_time_ms: float = 0.0


@dataclass
class ComparisonReport:
    rows: list[ReportRow] = field(default_factory=list)

    def values(self, method: str, stratum: str, column: str) -> list[float]:
        return [getattr(r, column) for r in sorted(self.rows, key=lambda r: r.seed)
                if r.method == method and r.stratum == stratum]

    def mean(self, method: str, stratum: str, column: str) -> float:
        return float(np.mean(self.values(method, stratum, column)))

    def summary(self) -> dict[tuple[str, str], tuple[float, float]]:
        out = {}
        for m in sorted({r.method for r in self.rows}):
            for s in STRATA:
                if self.values(m, s, "final_cost_ann"):
                    out[(m, s)] = (self.mean(m, s, "final_cost_ann"), self.mean(m, s, "final_cost_amul"))
        return out


def _anneal_config(base: AnnealConfig, n: int, seed: int, stratum: str) -> AnnealConfig:
    return AnnealConfig(n=n, t0=base.t0, alpha=base.alpha, t_tol=base.t_tol, max_iters=base.max_iters,
                        seed=seed, stream=(STRATUM_STREAM[stratum],))


def _run_one(prepared: Prepared, method: str, seed: int, base: AnnealConfig, timing: bool) -> list[ReportRow]:
    strat, alloc = prepared.stratification, prepared.allocation
    start = time.perf_counter()
    results: list[tuple[str, Solution]] = []
    if method == "random":
        whole = sample_random(prepared.candidates, alloc.n_total, make_rng(seed, WHOLE_AREA_STREAM))
        label = strat.stratum_of()
        for name in STRATA:
            ids = tuple(i for i in whole.member_ids if label[i] == name)
            results.append((name, Solution(ids, *evaluate(strat.get(name), ids))))
    elif method == "stratified":
        rngs = {name: make_rng(seed, STRATUM_STREAM[name]) for name in STRATA}
        results.extend(zip(STRATA, sample_stratified_random(strat, alloc, rngs)))
    elif method in ("spatial", "dual"):
        objectives = annealer.SPATIAL if method == "spatial" else annealer.DUAL
        for name in STRATA:
            cfg = _anneal_config(base, alloc.get(name), seed, name)
            results.append((name, annealer.run(strat.get(name), cfg, objectives=objectives).best))
    else:
        raise ValueError(f"unknown method {method!r}")
    elapsed = (time.perf_counter() - start) * 1000.0 if timing else 0.0
    return [ReportRow(method, seed, name, sol.n, sol.cost_ann, sol.cost_amul, elapsed) for name, sol in results]


def _run_task(args) -> list[ReportRow]:
    return _run_one(*args)


def compare(
    prepared: Prepared,
    methods: Sequence[str] = METHODS,
    n_seeds: int = 20,
    config: AnnealConfig | None = None,
    *,
    jobs: int = 1,
    timing: bool = False,
) -> ComparisonReport:
    """Run each method for seeds ``0..n_seeds-1``; one row per (method, seed, stratum).

    Rows come out in canonical method order whatever order ``methods`` lists.
    ``wall_time_ms`` is 0 unless ``timing`` is set, keeping the report
    reproducible byte for byte.
    """
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}")
    base = config or AnnealConfig(n=2)
    tasks = [(prepared, m, s, base, timing) for m in METHODS if m in methods for s in range(n_seeds)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_task, tasks))
    else:
        chunks = [_run_task(t) for t in tasks]
    return ComparisonReport([row for chunk in chunks for row in chunk])


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def write_report_csv(report: ComparisonReport, stream: TextIO) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(REPORT_HEADER)
    for r in report.rows:
        w.writerow([_fmt(getattr(r, c)) for c in REPORT_HEADER])


def read_report_csv(stream: TextIO) -> ComparisonReport:
    rows = [
        ReportRow(rec["method"], int(rec["seed"]), rec["stratum"], int(rec["n"]), float(rec["final_cost_ann"]),
                  float(rec["final_cost_amul"]), float(rec["wall_time_ms"]))
        for rec in csv.DictReader(stream)
    ]
    return ComparisonReport(rows)


def sign_test_less(a: Sequence[float], b: Sequence[float]) -> float:
    """One-sided sign-test p-value for "a tends to be smaller than b" over paired values; ties dropped."""
    wins = sum(1 for x, y in zip(a, b) if x < y)
    losses = sum(1 for x, y in zip(a, b) if x > y)
    if wins + losses == 0:
        return 1.0
    return float(binomtest(wins, wins + losses, 0.5, alternative="greater").pvalue)
