"""Terminus refinement: find each tongue's low end, gate on mask agreement, re-decide with KNN.

Works on a pair of post-processed ablation masks: ``d1`` (the recall-leaning
segmenter) and ``d2`` (the fused, precision-leaning one). The refined mask is
``d2`` with every terminus box rewritten.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import kernels, morphology
from .grid import normalize_channel

log = logging.getLogger(__name__)


@dataclass
class KnnParams:
    k: int = 5
    ring_width: int = 5
    iou_threshold: float = 0.7
    low_alt_fraction: float = 0.15
    box_pad: int = 10
    close_radius: int = morphology.DEFAULT_CLOSE_RADIUS
    veg_thresh: float = 0.3

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0 < self.iou_threshold < 1:
            raise ValueError("iou_threshold must lie in (0, 1)")
        if not 0 < self.low_alt_fraction < 1:
            raise ValueError("low_alt_fraction must lie in (0, 1)")
        if self.ring_width < 1 or self.box_pad < 0 or self.close_radius < 0:
            raise ValueError("ring_width must be >= 1; box_pad and close_radius >= 0")


@dataclass
class TerminusCase:
    glacier_code: int
    box: tuple[int, int, int, int]  # row0, row1, col0, col1 (half-open)
    e1: np.ndarray
    e2: np.ndarray
    iou: float | None = None
    disagreement: bool = False
    low_cells: np.ndarray | None = field(default=None, repr=False)

    @property
    def slices(self) -> tuple[slice, slice]:
        r0, r1, c0, c1 = self.box
        return slice(r0, r1), slice(c0, c1)


def iou(a: np.ndarray, b: np.ndarray) -> float | None:
    """|a & b| / |a | b|, or None when the union is empty."""
    union = int(np.count_nonzero(a | b))
    if union == 0:
        return None
    return int(np.count_nonzero(a & b)) / union


def disagreement(e1: np.ndarray, e2: np.ndarray, iou_threshold: float = 0.7) -> bool:
    """True iff the sub-masks' IOU is strictly below the threshold. Empty union agrees."""
    if e1.shape != e2.shape:
        raise ValueError("sub-masks differ in shape")
    value = iou(np.asarray(e1, bool), np.asarray(e2, bool))
    return value is not None and value < iou_threshold


def _lowest_cells(elev: np.ndarray, rows: np.ndarray, cols: np.ndarray, fraction: float) -> np.ndarray:
    n = max(1, int(round(fraction * len(elev))))
    order = np.lexsort((cols, rows, elev))  # elevation, then row-major
    return order[:n]


def detect_terminus_boxes(
    d1: np.ndarray,
    d2: np.ndarray,
    dem: np.ndarray,
    params: KnnParams | None = None,
) -> list[TerminusCase]:
    """One case per connected ``d1`` region, ordered by region label.

    The terminus is the largest 8-connected cluster among the region's lowest
    ``low_alt_fraction`` cells (count-based; ties broken row-major). The box is
    its bounding box padded by ``box_pad`` and clipped to the grid.
    """
    params = params or KnnParams()
    d1 = np.asarray(d1, dtype=bool)
    d2 = np.asarray(d2, dtype=bool)
    dem = np.asarray(dem, dtype=np.float64)
    h, w = d1.shape
    regions = morphology.connected_components(d1, 8)
    cases = []
    for code in range(1, regions.count + 1):
        rs, cs = regions.bboxes[code - 1]
        sub = regions.labels[rs, cs] == code
        rows, cols = np.nonzero(sub)
        z = dem[rs, cs][rows, cols]
        ok = ~np.isnan(z)
        if not ok.any():
            log.warning("glacier region %d has no valid elevation; terminus skipped", code)
            continue
        rows, cols, z = rows[ok] + rs.start, cols[ok] + cs.start, z[ok]
        pick = _lowest_cells(z, rows, cols, params.low_alt_fraction)
        low = np.zeros((h, w), dtype=bool)
        low[rows[pick], cols[pick]] = True
        clusters = morphology.connected_components(low, 8)
        biggest = int(np.argmax(clusters.areas)) + 1
        br, bc = clusters.bboxes[biggest - 1]
        box = (
            max(0, br.start - params.box_pad),
            min(h, br.stop + params.box_pad),
            max(0, bc.start - params.box_pad),
            min(w, bc.stop + params.box_pad),
        )
        case = TerminusCase(code, box, None, None, low_cells=clusters.labels == biggest)
        case.e1 = d1[case.slices].copy()
        case.e2 = d2[case.slices].copy()
        case.iou = iou(case.e1, case.e2)
        case.disagreement = disagreement(case.e1, case.e2, params.iou_threshold)
        cases.append(case)
    return cases


def build_features(channels: np.ndarray, window: int = 5) -> np.ndarray:
    """Per-cell features: min-max normalized channels plus their local mean and std.

    ``channels`` is (H, W, C); the result is (H, W, 3C) with NaN replaced by 0.
    """
    channels = np.asarray(channels, dtype=np.float64)
    if channels.ndim == 2:
        channels = channels[..., None]
    feats = []
    for i in range(channels.shape[-1]):
        x = normalize_channel(channels[..., i])
        ok = ~np.isnan(x)
        x0 = np.where(ok, x, 0.0)
        kernel = np.ones((window, window))
        n = ndimage.correlate(ok.astype(np.float64), kernel, mode="constant")
        s1 = ndimage.correlate(x0, kernel, mode="constant")
        s2 = ndimage.correlate(x0 * x0, kernel, mode="constant")
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = s1 / n
            std = np.sqrt(np.maximum(s2 / n - mean * mean, 0.0))
        feats += [x0, mean, std]
    out = np.stack(feats, axis=-1)
    return np.nan_to_num(out, nan=0.0, posinf=0.0, neginf=0.0)


def knn_samples(e1: np.ndarray, e2: np.ndarray, ring_width: int):
    """(positive, pending, negative) cell masks for one terminus sub-image."""
    e1 = np.asarray(e1, bool)
    e2 = np.asarray(e2, bool)
    return e1 & e2, e1 ^ e2, morphology.ring(e1 | e2, ring_width)


def knn_refine(case: TerminusCase, features: np.ndarray, params: KnnParams | None = None) -> np.ndarray:
    """Re-decide the cells where the two masks disagree, using only this terminus's samples.

    Positive samples are AND cells, negatives the ring around the OR region;
    samples keep row-major insertion order, which breaks equal-distance ties.
    Falls back to ``e2`` when either sample class is empty.
    """
    params = params or KnnParams()
    pos, pending, neg = knn_samples(case.e1, case.e2, params.ring_width)
    if not pending.any():
        return case.e1.copy()
    if not pos.any() or not neg.any():
        missing = "positive" if not pos.any() else "negative"
        log.warning("terminus %d has no %s samples; keeping d2", case.glacier_code, missing)
        return case.e2.copy()
    sub = np.asarray(features)[case.slices]
    samples = pos | neg
    x = sub[samples]
    y = pos[samples].astype(np.uint8)
    decided = kernels.active.knn_predict(x, y, sub[pending], params.k)
    out = pos.copy()
    out[pending] = decided.astype(bool)
    return morphology.close(out, params.close_radius)


def vegetation_zone_removal(
    mask: np.ndarray,
    ndvi: np.ndarray,
    veg_thresh: float = 0.3,
    close_radius: int = morphology.DEFAULT_CLOSE_RADIUS,
) -> np.ndarray:
    """Drop cells with NDVI above ``veg_thresh`` and smooth what is left with one closing.

    The closing may bridge non-vegetated gaps but never re-admits a vegetated
    cell. A mask with no vegetated cell is returned unchanged.
    """
    mask = np.asarray(mask, dtype=bool)
    with np.errstate(invalid="ignore"):
        vegetated = np.asarray(ndvi) > veg_thresh
    if not (mask & vegetated).any():
        return mask.copy()
    return morphology.close(mask & ~vegetated, close_radius) & ~vegetated


def refine_termini(
    d1: np.ndarray,
    d2: np.ndarray,
    dem: np.ndarray,
    features: np.ndarray,
    ndvi: np.ndarray,
    params: KnnParams | None = None,
    threads: int = 1,
) -> tuple[np.ndarray, list[TerminusCase]]:
    """Refined ablation mask: ``d2`` with each terminus box re-decided and vegetation-cleaned.

    Boxes are written back in ascending glacier-code order, so where two boxes
    overlap the higher code wins regardless of ``threads``.
    """
    params = params or KnnParams()
    d2 = np.asarray(d2, dtype=bool)
    cases = detect_terminus_boxes(d1, d2, dem, params)

    def solve(case: TerminusCase) -> np.ndarray:
        sub = knn_refine(case, features, params) if case.disagreement else case.e2
        return vegetation_zone_removal(sub, np.asarray(ndvi)[case.slices], params.veg_thresh, params.close_radius)

    if threads > 1 and len(cases) > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(solve, cases))
    else:
        results = [solve(c) for c in cases]
    out = d2.copy()
    for case, sub in zip(cases, results):
        out[case.slices] = sub
    return out, cases
