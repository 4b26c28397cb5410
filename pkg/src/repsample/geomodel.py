"""Core domain types: grid cells, candidate sets and sample solutions.

Coordinates are planar meters throughout. Geographic inputs are projected
in :mod:`repsample.ingest` before they reach these types.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

from .errors import DuplicateId, EmptyInput, FieldOutOfRange

# Relative slack for the d0 >= d1 >= d2 ordering; exp(Shannon) of a uniform
# distribution can overshoot the richness by an ulp or two.
_PROFILE_RTOL = 1e-9


@dataclass(frozen=True)
class PlanarPoint:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise FieldOutOfRange("point", (self.x, self.y))


@dataclass(frozen=True)
class DiversityProfile:
    """Hill numbers of orders 0, 1 and 2 for one unit."""

    d0: float
    d1: float
    d2: float

    def __post_init__(self) -> None:
        for name in ("d0", "d1", "d2"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise FieldOutOfRange(name, v)
        if self.d0 == 0:
            if self.d1 != 0 or self.d2 != 0:
                raise FieldOutOfRange("profile", self.as_tuple())
            return
        tol = _PROFILE_RTOL * self.d0
        if not (self.d0 + tol >= self.d1 and self.d1 + tol >= self.d2 and self.d2 >= 1 - tol):
            raise FieldOutOfRange("profile", self.as_tuple())

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.d0, self.d1, self.d2)


@dataclass(frozen=True)
class SamplingUnit:
    """One grid cell.

    ``profile`` and ``mul`` stay ``None`` until the unit is enriched with
    POI diversity.
    """

    id: int
    centroid: PlanarPoint
    cell_side: float
    builtup: float = 0.0
    poi_counts: Mapping[str, int] = field(default_factory=dict)
    profile: DiversityProfile | None = None
    mul: float | None = None

    @property
    def x(self) -> float:
        return self.centroid.x

    @property
    def y(self) -> float:
        return self.centroid.y

    def with_(self, **changes) -> "SamplingUnit":
        return replace(self, **changes)


@dataclass(frozen=True)
class CostPair:
    ann: float
    amul: float


@dataclass(frozen=True)
class CandidateSet:
    """A validated collection of units; build it with :func:`validate_candidates`."""

    units: tuple[SamplingUnit, ...]
    total_area: float

    def __len__(self) -> int:
        return len(self.units)

    def __iter__(self):
        return iter(self.units)

    @property
    def ids(self) -> list[int]:
        return [u.id for u in self.units]

    def by_id(self) -> dict[int, SamplingUnit]:
        return {u.id: u for u in self.units}

    def subset(self, ids: Iterable[int]) -> "CandidateSet":
        """Validated candidate set holding only ``ids``, in candidate order."""
        wanted = set(ids)
        return validate_candidates([u for u in self.units if u.id in wanted], allow_empty=True)


@dataclass(frozen=True)
class Solution:
    """N distinct unit ids plus their cached cost pair."""

    member_ids: tuple[int, ...]
    cost_ann: float
    cost_amul: float

    @property
    def n(self) -> int:
        return len(self.member_ids)

    @property
    def costs(self) -> CostPair:
        return CostPair(self.cost_ann, self.cost_amul)


def _check_unit(u: SamplingUnit) -> None:
    if isinstance(u.id, bool) or not isinstance(u.id, int) or u.id < 0:
        raise FieldOutOfRange("id", u.id)
    if not isinstance(u.centroid, PlanarPoint):
        raise FieldOutOfRange("centroid", u.centroid)
    if not (math.isfinite(u.cell_side) and u.cell_side > 0):
        raise FieldOutOfRange("cell_side", u.cell_side)
    if not (0.0 <= u.builtup <= 1.0):
        raise FieldOutOfRange("builtup", u.builtup)
    for cat, count in u.poi_counts.items():
        if not cat:
            raise FieldOutOfRange("category", cat)
        if count < 0:
            raise FieldOutOfRange(f"poi_counts[{cat}]", count)
    if u.mul is not None and not (0.0 <= u.mul <= 1.0):
        raise FieldOutOfRange("mul", u.mul)
    if u.profile is not None and not isinstance(u.profile, DiversityProfile):
        raise FieldOutOfRange("profile", u.profile)


def validate_candidates(units: Iterable[SamplingUnit], *, allow_empty: bool = False) -> CandidateSet:
    """Check every unit and the id uniqueness, returning a :class:`CandidateSet`.

    Strata may legitimately be empty, hence ``allow_empty``; the public
    contract rejects empty input.
    """
    units = tuple(units)
    if not units and not allow_empty:
        raise EmptyInput("candidate set is empty")
    seen: set[int] = set()
    for u in units:
        _check_unit(u)
        if u.id in seen:
            raise DuplicateId(u.id)
        seen.add(u.id)
    area = float(sum(u.cell_side * u.cell_side for u in units))
    return CandidateSet(units=units, total_area=area)


def check_solution(solution: Solution, candidates: CandidateSet, n: int | None = None) -> None:
    """Assert the structural invariants of ``solution`` (distinct members drawn from candidates)."""
    members = solution.member_ids
    if n is not None and len(members) != n:
        raise AssertionError(f"solution has {len(members)} members, expected {n}")
    if len(set(members)) != len(members):
        raise AssertionError("solution has duplicate members")
    missing = set(members) - set(candidates.ids)
    if missing:
        raise AssertionError(f"members not in candidate set: {sorted(missing)}")
