"""Hill-number diversity of POI categories and the synthesized mixed-use level."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import EmptyInput, FieldOutOfRange, UnsupportedOrder
from .geomodel import DiversityProfile, SamplingUnit

ORDERS = (0, 1, 2)


@dataclass(frozen=True)
class CategoryDistribution:
    proportions: tuple[float, ...]

    def __post_init__(self) -> None:
        if any(p < 0 or not math.isfinite(p) for p in self.proportions):
            raise FieldOutOfRange("proportions", self.proportions)
        total = math.fsum(self.proportions)
        if total != 0 and abs(total - 1.0) > 1e-12:
            raise FieldOutOfRange("proportions", total)

    @property
    def s(self) -> int:
        return sum(1 for p in self.proportions if p > 0)

    @classmethod
    def from_counts(cls, counts: Mapping[str, int] | Sequence[int]) -> "CategoryDistribution":
        values = list(counts.values()) if isinstance(counts, Mapping) else list(counts)
        if any(c < 0 for c in values):
            raise FieldOutOfRange("counts", values)
        total = sum(values)
        if total == 0:
            return cls(tuple(0.0 for _ in values))
        return cls(tuple(c / total for c in values))


def hill_number(dist: CategoryDistribution, q: int) -> float:
    """Hill number of order ``q``; order 1 is the exp-Shannon limit.

    Zero proportions never contribute. An empty distribution has diversity 0
    at every order.
    """
    if q not in ORDERS:
        raise UnsupportedOrder(f"order {q!r} not in {ORDERS}")
    ps = [p for p in dist.proportions if p > 0]
    if not ps:
        return 0.0
    if q == 0:
        return float(len(ps))
    if q == 1:
        return math.exp(-math.fsum(p * math.log(p) for p in ps))
    return 1.0 / math.fsum(p * p for p in ps)


def diversity_profile(counts: Mapping[str, int]) -> DiversityProfile:
    dist = CategoryDistribution.from_counts(counts)
    return DiversityProfile(*(hill_number(dist, q) for q in ORDERS))


def mixed_use_levels(profiles: Sequence[DiversityProfile]) -> list[float]:
    """Average of the per-order min-max normalized Hill numbers.

    The normalization range comes from *all* ``profiles`` passed in, so call
    this once on the whole study area. An order whose values are all equal
    normalizes to 0.
    """
    if not profiles:
        raise EmptyInput("no diversity profiles")
    columns = [[p.as_tuple()[k] for p in profiles] for k in range(len(ORDERS))]
    normed = []
    for col in columns:
        lo, hi = min(col), max(col)
        if hi == lo:
            normed.append([0.0] * len(col))
        else:
            span = hi - lo
            normed.append([(v - lo) / span for v in col])
    out = []
    for i in range(len(profiles)):
        m = (normed[0][i] + normed[1][i] + normed[2][i]) / len(ORDERS)
        out.append(min(1.0, max(0.0, m)))
    return out


def enrich_units(units: Sequence[SamplingUnit]) -> list[SamplingUnit]:
    """Attach a diversity profile and study-wide MUL to every unit."""
    profiles = [diversity_profile(u.poi_counts) for u in units]
    muls = mixed_use_levels(profiles)
    return [u.with_(profile=p, mul=m) for u, p, m in zip(units, profiles, muls)]
