"""Confusion counts inside margin-dilated bounding boxes and the six accuracy indices."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import morphology
from .errors import EmptyEvaluationError

DEFAULT_MARGIN = 32
METRIC_KEYS = ("iou", "rc", "pc", "sp", "fm", "acc")


@dataclass
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int
    bounds: tuple[int, int, int, int] | None = None  # row0, row1, col0, col1

    def __add__(self, other: ConfusionCounts) -> ConfusionCounts:
        return ConfusionCounts(self.tp + other.tp, self.tn + other.tn, self.fp + other.fp, self.fn + other.fn)

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass
class Metrics:
    """Indices in [0, 1]; ``None`` marks a zero denominator."""

    iou: float | None
    rc: float | None
    pc: float | None
    sp: float | None
    fm: float | None
    acc: float | None

    def as_dict(self) -> dict[str, float | None]:
        return {k: getattr(self, k) for k in METRIC_KEYS}


@dataclass
class MetricsReport:
    glaciers: list[tuple[str, ConfusionCounts, Metrics]] = field(default_factory=list)
    aggregate: Metrics | None = None
    aggregate_counts: ConfusionCounts | None = None

    def to_text(self) -> str:
        lines = []
        rows = [(name, m) for name, _, m in self.glaciers]
        if self.aggregate is not None:
            rows.append(("aggregate", self.aggregate))
        for name, m in rows:
            for key, value in m.as_dict().items():
                lines.append(f"{name}.{key} = {'undefined' if value is None else repr(float(value))}")
        return "\n".join(lines) + "\n"

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(self.to_text())
        return path


def parse_report(text: str) -> dict[str, dict[str, float | None]]:
    """Inverse of :meth:`MetricsReport.to_text`."""
    out: dict[str, dict[str, float | None]] = {}
    for line in text.splitlines():
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        key, _, value = line.partition("=")
        name, _, metric = key.strip().rpartition(".")
        value = value.strip()
        out.setdefault(name, {})[metric] = None if value == "undefined" else float(value)
    return out


def bounding_box(mask: np.ndarray, margin: int) -> tuple[int, int, int, int]:
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    h, w = mask.shape
    return (
        max(0, int(rows[0]) - margin),
        min(h, int(rows[-1]) + 1 + margin),
        max(0, int(cols[0]) - margin),
        min(w, int(cols[-1]) + 1 + margin),
    )


def confusion(
    pred: np.ndarray,
    ref: np.ndarray,
    margin: int = DEFAULT_MARGIN,
    sus_elevation: float | None = None,
    dem: np.ndarray | None = None,
    valid: np.ndarray | None = None,
    region: np.ndarray | None = None,
) -> ConfusionCounts:
    """Count agreement over valid cells in the margin-dilated box around ``pred | ref``.

    ``region`` overrides the mask the box is built around. With
    ``sus_elevation`` (and ``dem``), cells above that elevation are excluded.
    """
    pred = np.asarray(pred, dtype=bool)
    ref = np.asarray(ref, dtype=bool)
    if pred.shape != ref.shape:
        raise ValueError("pred and ref shapes differ")
    if margin < 0:
        raise ValueError("margin must be >= 0")
    either = pred | ref if region is None else np.asarray(region, dtype=bool)
    if not either.any():
        raise EmptyEvaluationError("prediction and reference are both empty")
    r0, r1, c0, c1 = bounding_box(either, margin)
    keep = np.zeros(pred.shape, dtype=bool)
    keep[r0:r1, c0:c1] = True
    if valid is not None:
        keep &= np.asarray(valid, dtype=bool)
    if sus_elevation is not None:
        if dem is None:
            raise ValueError("sus_elevation requires dem")
        with np.errstate(invalid="ignore"):
            keep &= np.asarray(dem) <= sus_elevation
    p, r = pred[keep], ref[keep]
    counts = ConfusionCounts(
        tp=int(np.count_nonzero(p & r)),
        tn=int(np.count_nonzero(~p & ~r)),
        fp=int(np.count_nonzero(p & ~r)),
        fn=int(np.count_nonzero(~p & r)),
        bounds=(r0, r1, c0, c1),
    )
    if counts.total == 0:
        raise EmptyEvaluationError("no valid cells left inside the evaluation bounds")
    return counts


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def metrics(counts: ConfusionCounts) -> Metrics:
    tp, tn, fp, fn = counts.tp, counts.tn, counts.fp, counts.fn
    rc = _ratio(tp, tp + fn)
    pc = _ratio(tp, tp + fp)
    if rc is None or pc is None or pc + rc == 0:
        fm = None
    else:
        fm = 2 * pc * rc / (pc + rc)
    return Metrics(
        iou=_ratio(tp, tp + fp + fn),
        rc=rc,
        pc=pc,
        sp=_ratio(tn, tn + fp),
        fm=fm,
        acc=_ratio(tp + tn, tp + tn + fp + fn),
    )


def evaluate(
    pred: np.ndarray,
    ref: np.ndarray,
    margin: int = DEFAULT_MARGIN,
    sus_elevation: dict[int, float] | float | None = None,
    dem: np.ndarray | None = None,
    valid: np.ndarray | None = None,
) -> MetricsReport:
    """Per-glacier and micro-averaged metrics.

    A glacier is a connected component (8-connectivity) of ``pred | ref``;
    ``sus_elevation`` may be one ceiling for all or a per-glacier mapping.
    """
    pred = np.asarray(pred, dtype=bool)
    ref = np.asarray(ref, dtype=bool)
    labels, n = morphology.label(pred | ref, 8)
    if n == 0:
        raise EmptyEvaluationError("prediction and reference are both empty")
    report = MetricsReport()
    total = ConfusionCounts(0, 0, 0, 0)
    for code in range(1, n + 1):
        sus = sus_elevation.get(code) if isinstance(sus_elevation, dict) else sus_elevation
        try:
            counts = confusion(pred, ref, margin, sus, dem, valid, region=labels == code)
        except EmptyEvaluationError:
            continue
        report.glaciers.append((f"glacier_{code}", counts, metrics(counts)))
        total = total + counts
    if not report.glaciers:
        raise EmptyEvaluationError("no glacier had countable cells")
    report.aggregate_counts = total
    report.aggregate = metrics(total)
    return report

