"""Built-up stratification and per-stratum sample allocation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyInput, FieldOutOfRange, InsufficientCandidates
from .geomodel import CandidateSet, validate_candidates

DENSE = "dense"
SPARSE = "sparse"
STRATA = (DENSE, SPARSE)

# Reference lower-quartile threshold reported for the Shanghai grid. Informational
# only: ``quartile_threshold`` always recomputes from the data at hand.
SHANGHAI_Q1_BUILTUP = 0.16


@dataclass(frozen=True)
class Stratification:
    threshold: float
    dense: CandidateSet
    sparse: CandidateSet

    def get(self, name: str) -> CandidateSet:
        if name == DENSE:
            return self.dense
        if name == SPARSE:
            return self.sparse
        raise KeyError(name)

    def stratum_of(self) -> dict[int, str]:
        out = {u.id: DENSE for u in self.dense}
        out.update({u.id: SPARSE for u in self.sparse})
        return out


@dataclass(frozen=True)
class Allocation:
    n_dense: int
    n_sparse: int

    @property
    def n_total(self) -> int:
        return self.n_dense + self.n_sparse

    def get(self, name: str) -> int:
        return {DENSE: self.n_dense, SPARSE: self.n_sparse}[name]


def quartile_threshold(builtups: Sequence[float]) -> float:
    """Lower quartile, linear interpolation at zero-based rank 0.25*(n-1)."""
    if len(builtups) == 0:
        raise EmptyInput("no built-up values")
    return float(np.quantile(np.asarray(builtups, dtype=float), 0.25, method="linear"))


def check_threshold(threshold: float) -> float:
    if not (0.0 <= threshold <= 1.0):
        raise FieldOutOfRange("threshold", threshold)
    return float(threshold)


def stratify(units: CandidateSet, threshold: float) -> Stratification:
    """Split on ``builtup >= threshold`` (boundary values go to the dense stratum)."""
    check_threshold(threshold)
    dense = [u for u in units if u.builtup >= threshold]
    sparse = [u for u in units if u.builtup < threshold]
    return Stratification(
        threshold=threshold,
        dense=validate_candidates(dense, allow_empty=True),
        sparse=validate_candidates(sparse, allow_empty=True),
    )


def allocate(n_total: int, dense_fraction: float, stratification: Stratification | None = None) -> Allocation:
    """Split ``n_total`` into dense/sparse counts, rounding half away from zero.

    When ``stratification`` is given, each stratum must hold at least its share.
    """
    if n_total < 0:
        raise FieldOutOfRange("n_total", n_total)
    if not (0.0 <= dense_fraction <= 1.0):
        raise FieldOutOfRange("dense_fraction", dense_fraction)
    n_dense = int(math.floor(n_total * dense_fraction + 0.5))
    alloc = Allocation(n_dense=n_dense, n_sparse=n_total - n_dense)
    if stratification is not None:
        for name in STRATA:
            have = len(stratification.get(name))
            if have < alloc.get(name):
                raise InsufficientCandidates(f"{name} stratum has {have} units, allocation asks {alloc.get(name)}")
    return alloc
