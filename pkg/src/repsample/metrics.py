"""Pixel metrics (precision/recall/F1/IoU), Cohen's kappa and majority-vote label resolution."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Mapping, Sequence, TextIO

import numpy as np

from .errors import DegenerateAgreement, EmptyInput, EmptyInstance, FieldOutOfRange, MalformedRow, MissingColumn, ShapeMismatch


@dataclass(frozen=True)
class BinaryCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self) -> None:
        for name in ("tp", "fp", "fn", "tn"):
            if getattr(self, name) < 0:
                raise FieldOutOfRange(name, getattr(self, name))

    @property
    def degenerate(self) -> bool:
        """Neither prediction nor truth contains any foreground."""
        return self.tp == 0 and self.fp == 0 and self.fn == 0


def confusion_binary(pred, truth) -> BinaryCounts:
    """Per-pixel tallies with foreground = any non-zero value."""
    p = np.asarray(pred) != 0
    t = np.asarray(truth) != 0
    if p.shape != t.shape:
        raise ShapeMismatch(f"prediction {p.shape} vs truth {t.shape}")
    return BinaryCounts(
        tp=int(np.sum(p & t)),
        fp=int(np.sum(p & ~t)),
        fn=int(np.sum(~p & t)),
        tn=int(np.sum(~p & ~t)),
    )


# Empty-vs-empty (tp = fp = fn = 0) scores 1.0 everywhere: both sides agree
# there is nothing to find. ``BinaryCounts.degenerate`` flags the case.


def precision(c: BinaryCounts) -> float:
    if c.tp + c.fp == 0:
        return 1.0 if c.fn == 0 else 0.0
    return c.tp / (c.tp + c.fp)


def recall(c: BinaryCounts) -> float:
    if c.tp + c.fn == 0:
        return 1.0 if c.fp == 0 else 0.0
    return c.tp / (c.tp + c.fn)


def f1(c: BinaryCounts) -> float:
    if c.degenerate:
        return 1.0
    if c.tp == 0:
        return 0.0
    # equivalent to 2PR/(P+R) without the intermediate divisions
    return 2 * c.tp / (2 * c.tp + c.fp + c.fn)


def iou(c: BinaryCounts) -> float:
    if c.degenerate:
        return 1.0
    return c.tp / (c.tp + c.fn + c.fp)


class ConfusionMatrix:
    """Square count matrix, rows = truth, columns = prediction."""

    def __init__(self, counts):
        m = np.asarray(counts)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 2:
            raise ShapeMismatch(f"need a square k x k matrix with k >= 2, got shape {m.shape}")
        if not np.issubdtype(m.dtype, np.integer):
            if not np.all(np.mod(m, 1) == 0):
                raise FieldOutOfRange("counts", "non-integer entries")
            m = m.astype(np.int64)
        if np.any(m < 0):
            raise FieldOutOfRange("counts", "negative entries")
        self.counts = m.astype(np.int64)

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def from_labels(cls, truth, pred, k: int | None = None) -> "ConfusionMatrix":
        t = np.asarray(truth).ravel()
        p = np.asarray(pred).ravel()
        if np.asarray(truth).shape != np.asarray(pred).shape:
            raise ShapeMismatch(f"truth {np.asarray(truth).shape} vs prediction {np.asarray(pred).shape}")
        if t.size and (t.min() < 0 or p.min() < 0):
            raise FieldOutOfRange("label", "negative class id")
        if k is None:
            k = max(2, int(max(t.max(initial=0), p.max(initial=0))) + 1)
        m = np.zeros((k, k), dtype=np.int64)
        np.add.at(m, (t, p), 1)
        return cls(m)

    def observed_agreement(self) -> float:
        return float(np.trace(self.counts)) / self.total

    def chance_agreement(self) -> float:
        n = self.total
        rows = self.counts.sum(axis=1)
        cols = self.counts.sum(axis=0)
        return float(np.dot(rows, cols)) / (n * n)


def kappa(m: ConfusionMatrix) -> float:
    """Cohen's kappa with the marginal-product chance agreement."""
    if m.total <= 0:
        raise EmptyInput("confusion matrix is empty")
    p_o = m.observed_agreement()
    p_e = m.chance_agreement()
    if p_e >= 1.0:
        raise DegenerateAgreement("chance agreement is 1; kappa undefined")
    return (p_o - p_e) / (1.0 - p_e)


def resolve_instance_label(counts: Mapping[int, int] | Sequence[int], order: Sequence[int] | None = None) -> int:
    """Most frequent predicted class of one instance.

    ``order`` is the declared class list; ties go to the class listed first
    (default: smallest class id).
    """
    items = dict(enumerate(counts)) if not isinstance(counts, Mapping) else dict(counts)
    if any(v < 0 for v in items.values()):
        raise FieldOutOfRange("counts", items)
    if not items or max(items.values()) <= 0:
        raise EmptyInstance("instance has no predicted pixels")
    rank = {c: i for i, c in enumerate(order)} if order is not None else {}
    top = max(items.values())
    winners = [c for c, v in items.items() if v == top]
    return min(winners, key=lambda c: (rank.get(c, len(rank)), c))


# -- file formats -------------------------------------------------------------


def read_label_grid(stream: TextIO, source: str | None = None) -> np.ndarray:
    rows = []
    for line, rec in enumerate(csv.reader(stream), start=1):
        if not rec or all(not c.strip() for c in rec):
            continue
        try:
            rows.append([int(c) for c in rec])
        except ValueError:
            raise MalformedRow(line, "non-integer label", source) from None
        if len(rows[-1]) != len(rows[0]):
            raise MalformedRow(line, f"expected {len(rows[0])} columns, got {len(rows[-1])}", source)
    if not rows:
        raise EmptyInput(f"empty label grid{' ' + source if source else ''}")
    return np.array(rows, dtype=np.int64)


def read_class_map(stream: TextIO, source: str | None = None) -> list[tuple[int, str]]:
    reader = csv.DictReader(stream)
    for name in ("class_id", "class_name"):
        if name not in (reader.fieldnames or []):
            raise MissingColumn(name, source)
    out = []
    for line, rec in enumerate(reader, start=2):
        try:
            out.append((int(rec["class_id"]), rec["class_name"]))
        except ValueError:
            raise MalformedRow(line, f"bad class_id {rec['class_id']!r}", source) from None
    return out


def read_instance_pixels(stream: TextIO, source: str | None = None) -> dict[int, dict[int, int]]:
    reader = csv.DictReader(stream)
    for name in ("instance_id", "class_id", "count"):
        if name not in (reader.fieldnames or []):
            raise MissingColumn(name, source)
    out: dict[int, dict[int, int]] = {}
    for line, rec in enumerate(reader, start=2):
        try:
            inst, cls, cnt = int(rec["instance_id"]), int(rec["class_id"]), int(rec["count"])
        except ValueError:
            raise MalformedRow(line, "non-integer field", source) from None
        if cnt < 0:
            raise MalformedRow(line, f"negative count {cnt}", source)
        per = out.setdefault(inst, {})
        per[cls] = per.get(cls, 0) + cnt
    return out


def binary_metrics(c: BinaryCounts) -> list[tuple[str, float]]:
    return [
        ("tp", c.tp),
        ("fp", c.fp),
        ("fn", c.fn),
        ("tn", c.tn),
        ("precision", precision(c)),
        ("recall", recall(c)),
        ("f1", f1(c)),
        ("iou", iou(c)),
        ("degenerate", int(c.degenerate)),
    ]


def kappa_metrics(m: ConfusionMatrix) -> list[tuple[str, float]]:
    return [
        ("n", m.total),
        ("p_o", m.observed_agreement()),
        ("p_e", m.chance_agreement()),
        ("kappa", kappa(m)),
    ]


def write_metrics_csv(rows: Sequence[tuple[str, float]], stream: TextIO) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["metric", "value"])
    for name, value in rows:
        w.writerow([name, repr(value) if isinstance(value, float) else value])
