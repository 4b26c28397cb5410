"""Nearest-neighbour distances and the two sampling cost functions."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import FieldOutOfRange, NonPositiveArea, TooFewPoints, ZeroMeanDistance, ZeroMeanMul
from .geomodel import PlanarPoint

# Below this size a dense pairwise matrix beats walking the tree.
_BRUTE_FORCE_MAX = 2048


class NnIndex:
    """Static 2-d tree answering exact nearest-*other*-point queries.

    Distances are reported as ``sqrt(dx*dx + dy*dy)`` of the winning pair so
    they agree bit-for-bit with a plain pairwise scan.
    """

    def __init__(self, points: Sequence[PlanarPoint], ids: Sequence[int] | None = None):
        self.xs = np.array([p.x for p in points], dtype=float)
        self.ys = np.array([p.y for p in points], dtype=float)
        self.ids = list(range(len(points))) if ids is None else list(ids)
        if len(self.ids) != len(points):
            raise ValueError("ids and points differ in length")
        # node arrays: point index, split axis, left child, right child (-1 = none)
        self._point: list[int] = []
        self._axis: list[int] = []
        self._left: list[int] = []
        self._right: list[int] = []
        order = list(range(len(points)))
        self._root = self._build(order, 0)

    def __len__(self) -> int:
        return len(self.ids)

    def _build(self, idx: list[int], depth: int) -> int:
        if not idx:
            return -1
        axis = depth % 2
        coord = self.xs if axis == 0 else self.ys
        idx.sort(key=lambda i: (coord[i], i))
        mid = len(idx) // 2
        node = len(self._point)
        self._point.append(idx[mid])
        self._axis.append(axis)
        self._left.append(-1)
        self._right.append(-1)
        left = self._build(idx[:mid], depth + 1)
        right = self._build(idx[mid + 1 :], depth + 1)
        self._left[node] = left
        self._right[node] = right
        return node

    def nearest_other(self, i: int) -> tuple[int, float]:
        """Index of the closest point to point ``i`` other than ``i`` itself, and its distance."""
        if len(self) < 2:
            raise TooFewPoints("need at least two points")
        qx, qy = float(self.xs[i]), float(self.ys[i])
        best_d2 = math.inf
        best_j = -1
        # entries: (node, squared distance from query to the node's half-plane)
        stack = [(self._root, 0.0)]
        while stack:
            node, bound = stack.pop()
            if node < 0 or bound > best_d2:
                continue
            j = self._point[node]
            px, py = float(self.xs[j]), float(self.ys[j])
            if j != i:
                dx, dy = qx - px, qy - py
                d2 = dx * dx + dy * dy
                if d2 < best_d2:
                    best_d2, best_j = d2, j
            diff = (qx - px) if self._axis[node] == 0 else (qy - py)
            near, far = (self._left[node], self._right[node]) if diff < 0 else (self._right[node], self._left[node])
            # far side is pushed first so the near side is explored first
            stack.append((far, diff * diff))
            stack.append((near, 0.0))
        return best_j, math.sqrt(best_d2)

    def distances(self) -> list[float]:
        return [self.nearest_other(i)[1] for i in range(len(self))]


def nn_distances_xy(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Nearest-other-point distances for coordinate arrays (dense pairwise scan)."""
    if xs.shape[0] < 2:
        raise TooFewPoints("need at least two points")
    dx = xs[:, None] - xs[None, :]
    dy = ys[:, None] - ys[None, :]
    d2 = dx * dx + dy * dy
    np.fill_diagonal(d2, np.inf)
    return np.sqrt(d2.min(axis=1))


def nearest_neighbor_distances(points: Sequence[PlanarPoint]) -> list[float]:
    if len(points) < 2:
        raise TooFewPoints(f"need at least two points, got {len(points)}")
    if len(points) <= _BRUTE_FORCE_MAX:
        xs = np.array([p.x for p in points], dtype=float)
        ys = np.array([p.y for p in points], dtype=float)
        return nn_distances_xy(xs, ys).tolist()
    return NnIndex(points).distances()


def cost_ann_from_distances(distances: np.ndarray | Sequence[float], area: float) -> float:
    n = len(distances)
    if n < 2:
        raise TooFewPoints(f"need at least two points, got {n}")
    if not area > 0:
        raise NonPositiveArea(f"area must be positive, got {area}")
    mean_d = math.fsum(distances) / n
    if mean_d == 0:
        raise ZeroMeanDistance("all sample points coincide")
    expected = 1.0 / (2.0 * math.sqrt(n / area))
    return expected / mean_d


def cost_ann(points: Sequence[PlanarPoint], area: float) -> float:
    """Inverse average-nearest-neighbour ratio (observed mean NN distance over its random expectation).

    No edge correction is applied.
    """
    if not area > 0:
        raise NonPositiveArea(f"area must be positive, got {area}")
    return cost_ann_from_distances(nearest_neighbor_distances(points), area)


def cost_amul(muls: Sequence[float]) -> float:
    """Inverse of the mean mixed-use level; always >= 1 for MULs in [0, 1]."""
    if len(muls) == 0:
        raise ZeroMeanMul("no mixed-use levels")
    for m in muls:
        if not (0.0 <= m <= 1.0):
            raise FieldOutOfRange("mul", m)
    total = math.fsum(muls)
    if total == 0:
        raise ZeroMeanMul("mean mixed-use level is zero")
    return len(muls) / total
