"""Dual-objective simulated annealing over a candidate set.

Each iteration makes two tentative single-unit swaps: one replaces the member
with the shortest nearest-neighbour distance (judged by the spread cost), the
other replaces the member with the lowest mixed-use level (judged by the
diversity cost). A best-so-far solution is kept under Pareto dominance.

Randomness comes from numpy's PCG64 seeded through ``SeedSequence([seed,
*stream])``; callers pick a distinct ``stream`` per stratum so independent
runs never share a generator.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, TextIO

import numpy as np

from .errors import (
    ExhaustedCandidates,
    FieldOutOfRange,
    InsufficientCandidates,
    NonPositiveTemperature,
    TooFewSamples,
)
from .geomodel import CandidateSet, Solution
from .spatial import cost_ann_from_distances, cost_amul, nn_distances_xy

DUAL = "dual"
SPATIAL = "spatial"

TRACE_HEADER = (
    "iter",
    "temperature",
    "cost_ann_current",
    "cost_amul_current",
    "cost_ann_best",
    "cost_amul_best",
    "accepted_spatial",
    "accepted_diversity",
    "p_spatial",
    "p_diversity",
)


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """PCG64 generator for ``seed`` and the sub-stream key ``stream``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, stream)])))


@dataclass(frozen=True)
class AnnealConfig:
    n: int
    t0: float = 1.0
    alpha: float = 0.999
    t_tol: float = 1e-8
    max_iters: int = 5000
    seed: int = 0
    stream: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if not (math.isfinite(self.t0) and self.t0 > 0):
            raise FieldOutOfRange("t0", self.t0)
        if not (0.0 < self.alpha < 1.0):
            raise FieldOutOfRange("alpha", self.alpha)
        if not (math.isfinite(self.t_tol) and self.t_tol > 0):
            raise FieldOutOfRange("t_tol", self.t_tol)
        if self.max_iters < 0:
            raise FieldOutOfRange("max_iters", self.max_iters)
        if not (0 <= self.seed < 2**64):
            raise FieldOutOfRange("seed", self.seed)

    def rng(self) -> np.random.Generator:
        return make_rng(self.seed, *self.stream)


@dataclass(frozen=True)
class TraceRow:
    iter: int
    temperature: float
    cost_ann_current: float
    cost_amul_current: float
    cost_ann_best: float
    cost_amul_best: float
    accepted_spatial: bool
    accepted_diversity: bool | None
    p_spatial: float
    p_diversity: float | None


@dataclass
class AnnealResult:
    best: Solution
    final: Solution
    initial: Solution
    trace: list[TraceRow] = field(default_factory=list)

    def __iter__(self):
        # allows ``best, trace = run(...)``
        return iter((self.best, self.trace))


def acceptance_probability(delta_cost: float, temperature: float) -> float:
    if not temperature > 0:
        raise NonPositiveTemperature(f"temperature must be positive, got {temperature}")
    if delta_cost < 0:
        return 1.0
    return math.exp(-delta_cost / temperature)


def cool(temperature: float, alpha: float) -> float:
    if not temperature > 0:
        raise NonPositiveTemperature(f"temperature must be positive, got {temperature}")
    return alpha * temperature


class _Problem:
    """Array view of a candidate set used by the inner loop."""

    def __init__(self, candidates: CandidateSet):
        units = candidates.units
        self.ids = np.array([u.id for u in units], dtype=np.int64)
        self.xs = np.array([u.x for u in units], dtype=float)
        self.ys = np.array([u.y for u in units], dtype=float)
        for u in units:
            if u.mul is None:
                raise FieldOutOfRange("mul", None)
        self.muls = np.array([u.mul for u in units], dtype=float)
        self.area = candidates.total_area
        self.index = {int(i): k for k, i in enumerate(self.ids)}

    def __len__(self) -> int:
        return len(self.ids)

    def distances(self, members: np.ndarray) -> np.ndarray:
        return nn_distances_xy(self.xs[members], self.ys[members])

    def costs(self, members: np.ndarray, dists: np.ndarray | None = None) -> tuple[float, float]:
        if dists is None:
            dists = self.distances(members)
        return cost_ann_from_distances(dists, self.area), cost_amul(self.muls[members].tolist())

    def solution(self, members: np.ndarray, costs: tuple[float, float]) -> Solution:
        return Solution(tuple(int(i) for i in self.ids[members]), costs[0], costs[1])

    def indices(self, solution: Solution) -> np.ndarray:
        return np.array([self.index[i] for i in solution.member_ids], dtype=np.int64)

    def argmin_position(self, members: np.ndarray, values: np.ndarray) -> int:
        """Position in ``members`` of the smallest value, ties to the smallest unit id."""
        ties = np.flatnonzero(values == values.min())
        if len(ties) == 1:
            return int(ties[0])
        return int(ties[np.argmin(self.ids[members[ties]])])


def _check_n(n_candidates: int, n: int) -> None:
    if n < 2:
        raise TooFewSamples(f"need at least two samples, got n={n}")
    if n_candidates < n:
        raise InsufficientCandidates(f"{n_candidates} candidates cannot supply {n} samples")


def _draw(problem: _Problem, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    perm = rng.permutation(len(problem))
    return perm[:n].copy(), perm[n:].copy()


def init_solution(candidates: CandidateSet, n: int, rng: np.random.Generator) -> Solution:
    """Uniform draw of ``n`` distinct units, with both costs evaluated."""
    _check_n(len(candidates), n)
    problem = _Problem(candidates)
    members, _ = _draw(problem, n, rng)
    return problem.solution(members, problem.costs(members))


def _perturb(solution: Solution, candidates: CandidateSet, rng: np.random.Generator, target: str) -> Solution:
    problem = _Problem(candidates)
    members = problem.indices(solution)
    inside = np.zeros(len(problem), dtype=bool)
    inside[members] = True
    outside = np.flatnonzero(~inside)
    if len(outside) == 0:
        raise ExhaustedCandidates("every candidate is already in the solution")
    values = problem.distances(members) if target == SPATIAL else problem.muls[members]
    pos = problem.argmin_position(members, values)
    members[pos] = outside[rng.integers(len(outside))]
    return problem.solution(members, problem.costs(members))


def perturb_spatial(solution: Solution, candidates: CandidateSet, rng: np.random.Generator) -> Solution:
    """Replace the member closest to another member with a random non-member."""
    return _perturb(solution, candidates, rng, SPATIAL)


def perturb_diversity(solution: Solution, candidates: CandidateSet, rng: np.random.Generator) -> Solution:
    """Replace the member with the lowest mixed-use level with a random non-member."""
    return _perturb(solution, candidates, rng, DUAL)


Observer = Callable[[int, str, tuple[int, ...]], None]


def run(
    candidates: CandidateSet,
    config: AnnealConfig,
    *,
    objectives: str = DUAL,
    observer: Observer | None = None,
) -> AnnealResult:
    """Anneal ``config.n`` samples out of ``candidates``.

    ``objectives="spatial"`` disables the diversity move and tracks the best
    solution by spread cost alone. ``observer(iter, stage, member_ids)`` sees
    the initial solution and every proposal, accepted or not.
    """
    if objectives not in (DUAL, SPATIAL):
        raise ValueError(f"unknown objectives {objectives!r}")
    dual = objectives == DUAL
    _check_n(len(candidates), config.n)
    problem = _Problem(candidates)
    rng = config.rng()

    members, outside = _draw(problem, config.n, rng)
    dists = problem.distances(members)
    cur_ann, cur_amul = problem.costs(members, dists)
    initial = problem.solution(members, (cur_ann, cur_amul))
    if observer is not None:
        observer(0, "initial", initial.member_ids)
    best_members, best_ann, best_amul = members.copy(), cur_ann, cur_amul

    trace: list[TraceRow] = []
    temperature = config.t0
    e = 0
    while temperature > config.t_tol and e < config.max_iters:
        e += 1
        temperature = cool(temperature, config.alpha)
        if len(outside) == 0:
            raise ExhaustedCandidates("candidate set has no units outside the solution")

        # spread move
        pos = problem.argmin_position(members, dists)
        j = int(rng.integers(len(outside)))
        old = members[pos]
        members[pos] = outside[j]
        prop_dists = problem.distances(members)
        prop_ann, prop_amul = problem.costs(members, prop_dists)
        if observer is not None:
            observer(e, "spatial", tuple(int(i) for i in problem.ids[members]))
        p_spatial = acceptance_probability(prop_ann - cur_ann, temperature)
        acc_spatial = bool(rng.random() < p_spatial)
        if acc_spatial:
            outside[j] = old
            dists, cur_ann, cur_amul = prop_dists, prop_ann, prop_amul
        else:
            members[pos] = old

        acc_div: bool | None = None
        p_div: float | None = None
        if dual:
            pos = problem.argmin_position(members, problem.muls[members])
            j = int(rng.integers(len(outside)))
            old = members[pos]
            members[pos] = outside[j]
            prop_dists = problem.distances(members)
            prop_ann, prop_amul = problem.costs(members, prop_dists)
            if observer is not None:
                observer(e, "diversity", tuple(int(i) for i in problem.ids[members]))
            p_div = acceptance_probability(prop_amul - cur_amul, temperature)
            acc_div = bool(rng.random() < p_div)
            if acc_div:
                outside[j] = old
                dists, cur_ann, cur_amul = prop_dists, prop_ann, prop_amul
            else:
                members[pos] = old

        if dual:
            improved = cur_ann <= best_ann and cur_amul <= best_amul and (cur_ann < best_ann or cur_amul < best_amul)
        else:
            improved = cur_ann < best_ann
        if improved:
            best_members, best_ann, best_amul = members.copy(), cur_ann, cur_amul

        trace.append(
            TraceRow(
                iter=e,
                temperature=temperature,
                cost_ann_current=cur_ann,
                cost_amul_current=cur_amul,
                cost_ann_best=best_ann,
                cost_amul_best=best_amul,
                accepted_spatial=acc_spatial,
                accepted_diversity=acc_div,
                p_spatial=p_spatial,
                p_diversity=p_div,
            )
        )

    return AnnealResult(
        best=problem.solution(best_members, (best_ann, best_amul)),
        final=problem.solution(members, (cur_ann, cur_amul)),
        initial=initial,
        trace=trace,
    )


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def trace_rows(trace: Iterable[TraceRow]) -> Iterable[list[str]]:
    for r in trace:
        yield [_fmt(getattr(r, name)) for name in TRACE_HEADER]


def write_trace_csv(trace: Sequence[TraceRow], stream: TextIO) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    w.writerows(trace_rows(trace))


def read_trace_csv(stream: TextIO) -> list[TraceRow]:
    def opt_bool(s: str) -> bool | None:
        return None if s == "" else s == "1"

    def opt_float(s: str) -> float | None:
        return None if s == "" else float(s)

    rows = []
    for rec in csv.DictReader(stream):
        rows.append(
            TraceRow(
                iter=int(rec["iter"]),
                temperature=float(rec["temperature"]),
                cost_ann_current=float(rec["cost_ann_current"]),
                cost_amul_current=float(rec["cost_amul_current"]),
                cost_ann_best=float(rec["cost_ann_best"]),
                cost_amul_best=float(rec["cost_amul_best"]),
                accepted_spatial=rec["accepted_spatial"] == "1",
                accepted_diversity=opt_bool(rec["accepted_diversity"]),
                p_spatial=float(rec["p_spatial"]),
                p_diversity=opt_float(rec["p_diversity"]),
            )
        )
    return rows


def iterations_to_converge(values: Sequence[float], rel_tol: float = 0.01) -> int:
    """First (1-based) trace position whose value is within ``rel_tol`` of the last one."""
    if not values:
        return 0
    final = values[-1]
    for k, v in enumerate(values, start=1):
        if abs(v - final) <= rel_tol * abs(final):
            return k
    return len(values)
