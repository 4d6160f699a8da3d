"""Snow-covered accumulation zone estimation on top of a refined ablation mask.

The estimator grows each ablation zone into adjacent snow, splits the merged
area into drainage basins, then prunes snow that reaches its ablation zone
only by leaving the merged area (or that sits downslope of it).

Basin rasters:

* ``g1`` - basins of the ablation zones with flow cut at the merged border
* ``g3`` - basins of the ablation zones over the full scene, clipped to the merged area
* ``g2`` - untargeted basin segments of the cut flow, tagged with their ``g3`` code
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import hydro, morphology
from .spectral import DEFAULT_SNOW_THRESH

log = logging.getLogger(__name__)


@dataclass
class ScazParams:
    snow_thresh: float = DEFAULT_SNOW_THRESH
    close_radius: int = morphology.DEFAULT_CLOSE_RADIUS
    min_isolated_area: int = morphology.DEFAULT_MIN_AREA

    def __post_init__(self):
        if not -1 < self.snow_thresh < 1:
            raise ValueError("snow_thresh must lie in (-1, 1)")
        if self.close_radius < 0 or self.min_isolated_area < 0:
            raise ValueError("close_radius and min_isolated_area must be >= 0")


@dataclass
class MergedRegion:
    merged: np.ndarray
    ablation_labels: np.ndarray
    filled_gaps: np.ndarray
    snow: np.ndarray


@dataclass
class BasinPartition:
    g1: np.ndarray
    g2: np.ndarray  # segment ids, 0 outside g3
    g2_codes: np.ndarray  # g2_codes[sid] is the glacier code of segment sid; index 0 unused
    g3: np.ndarray
    merged: np.ndarray
    ablation_codes: list[int]


def adjust_snowline(d2: np.ndarray, d1: np.ndarray, dem: np.ndarray) -> np.ndarray:
    """Raise ``d2``'s snowline to ``d1``'s where ``d1`` reaches higher.

    For each ``d1`` region, the ``d2`` regions overlapping it set the current
    snowline (their highest valid elevation); ``d1`` cells above it are added.
    """
    d1 = np.asarray(d1, dtype=bool)
    d2 = np.asarray(d2, dtype=bool)
    dem = np.asarray(dem, dtype=np.float64)
    out = d2.copy()
    lab1, n1 = morphology.label(d1, 8)
    lab2, _ = morphology.label(d2, 8)
    for code in range(1, n1 + 1):
        region = lab1 == code
        hit = np.unique(lab2[region & d2])
        if hit.size == 0:
            log.warning("d1 region %d has no overlapping d2 region; snowline not adjusted", code)
            continue
        z2 = dem[np.isin(lab2, hit)]
        z1 = dem[region]
        if np.all(np.isnan(z2)) or np.all(np.isnan(z1)):
            continue
        top2 = np.nanmax(z2)
        if np.nanmax(z1) > top2:
            with np.errstate(invalid="ignore"):
                out |= region & (dem > top2)
    return out


def snow_mask(snow_index: np.ndarray, snow_thresh: float = DEFAULT_SNOW_THRESH) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        return np.asarray(snow_index) < snow_thresh


def build_merged_region(ablation: np.ndarray, snow_index: np.ndarray, params: ScazParams | None = None) -> MergedRegion:
    """Keep snow regions touching (8-adjacent or overlapping) the ablation zone, merge, fill gaps."""
    params = params or ScazParams()
    ablation = np.asarray(ablation, dtype=bool)
    snow = snow_mask(snow_index, params.snow_thresh)
    lab, n = morphology.label(snow, 8)
    touching = np.unique(lab[morphology.dilate(ablation, 1)])
    keep = np.zeros(n + 1, dtype=bool)
    keep[touching] = True
    keep[0] = False
    merged0 = ablation | keep[lab]
    holes, _ = morphology.holes(merged0)
    gaps = holes > 0
    ablation_labels, _ = morphology.label(ablation, 8)
    return MergedRegion(merged0 | gaps, ablation_labels, gaps, snow)


def basin_partition(merged: np.ndarray, ablation_labels: np.ndarray, dem: np.ndarray) -> BasinPartition:
    """Compute ``g1``, ``g2`` and ``g3`` from a sink-filled routing of ``dem``."""
    merged = np.asarray(merged, dtype=bool)
    ablation_labels = np.asarray(ablation_labels, dtype=np.int64)
    flow = hydro.flow_direction_d8(hydro.fill_sinks(dem))
    cut = flow.restricted_to(merged)

    g1 = hydro.drainage_basins(cut, np.where(merged, ablation_labels, 0))
    g3 = np.where(merged, hydro.drainage_basins(flow, ablation_labels), 0)

    seg_raw = np.where(merged & (g3 > 0), hydro.drainage_basins(cut), 0)
    ids, inverse = np.unique(seg_raw, return_inverse=True)
    g2 = inverse.reshape(seg_raw.shape).astype(np.int64)
    if ids[0] != 0:  # no background cell at all
        g2 += 1
    nseg = int(g2.max())
    g2_codes = np.zeros(nseg + 1, dtype=np.int64)
    straddling = []
    for sid in range(1, nseg + 1):
        codes, counts = np.unique(g3[g2 == sid], return_counts=True)
        if codes.size > 1:
            straddling.append(sid)
        g2_codes[sid] = codes[np.argmax(counts)]
    if straddling:
        log.warning("%d g2 segment(s) straddle glacier codes (first: %d); using majority code", len(straddling), straddling[0])
    codes = sorted(int(c) for c in np.unique(ablation_labels) if c > 0)
    return BasinPartition(g1, g2, g2_codes, g3, merged, codes)


def _diff_pieces(part: BasinPartition, g3: np.ndarray):
    """(segment id, code, cells) for every g2 segment's share of the current g3-minus-g1 difference."""
    diff = (g3 > 0) & (part.g1 != g3)
    for sid in np.unique(part.g2[diff]):
        if sid == 0:
            continue
        cells = diff & (part.g2 == sid)
        yield int(sid), int(part.g2_codes[sid]), cells


def prune_indirect(part: BasinPartition, dem: np.ndarray) -> np.ndarray:
    """Remove snow segments that do not drain directly into their own ablation zone."""
    dem = np.asarray(dem, dtype=np.float64)
    g3 = part.g3.copy()

    # a piece that neither touches nor overlaps same-code g1 reaches it only indirectly
    marked = np.zeros_like(g3, dtype=bool)
    for _sid, code, cells in _diff_pieces(part, g3):
        if not morphology.touches(cells, part.g1 == code):
            marked |= cells
    g3[marked] = 0

    # a piece whose shared border with g1 sits above its average border drains away from it
    selected = np.zeros_like(marked)
    for _sid, code, cells in _diff_pieces(part, g3):
        edge = morphology.boundary(cells)
        shared = edge & morphology.dilate(part.g1 == code, 1)
        if not shared.any():
            continue
        z_shared = np.nanmean(dem[shared]) if np.any(~np.isnan(dem[shared])) else np.nan
        z_edge = np.nanmean(dem[edge]) if np.any(~np.isnan(dem[edge])) else np.nan
        if z_shared > z_edge:
            selected |= cells
    g3[selected] = 0
    return g3


def estimate_scaz(
    ablation_d2: np.ndarray,
    ablation_d1: np.ndarray,
    dem: np.ndarray,
    snow_index: np.ndarray,
    params: ScazParams | None = None,
    detail: bool = False,
):
    """Full-glacier mask (ablation plus accumulation zone).

    With ``detail=True`` returns ``(mask, info)`` where ``info`` holds the
    intermediate rasters.
    """
    params = params or ScazParams()
    ablation = adjust_snowline(ablation_d2, ablation_d1, dem)
    region = build_merged_region(ablation, snow_index, params)
    part = basin_partition(region.merged, region.ablation_labels, dem)
    pruned = prune_indirect(part, dem)

    glacier = (pruned > 0) | ablation
    # restore each filled gap unless a closing would bridge all of it
    gaps = region.filled_gaps & glacier
    solid = glacier & ~gaps
    bridged = morphology.close(solid, params.close_radius)
    gap_lab, ngap = morphology.label(gaps, 4)
    open_cells = np.bincount(gap_lab[gaps & ~bridged], minlength=ngap + 1)
    small = open_cells == 0
    small[0] = False
    glacier = solid | small[gap_lab]

    # keep, per glacier code, only pieces connected to that glacier's ablation zone
    codes = np.where(glacier, np.maximum(pruned, region.ablation_labels), 0)
    keep = ablation.copy()
    for code in part.ablation_codes:
        lab, n = morphology.label(codes == code, 8)
        if n == 0:
            continue
        anchored = np.unique(lab[(region.ablation_labels == code) & (lab > 0)])
        keep |= np.isin(lab, anchored) & (lab > 0)
    lab, n = morphology.label(keep, 8)
    if n:
        areas = np.bincount(lab.ravel(), minlength=n + 1)
        has_ablation = np.zeros(n + 1, dtype=bool)
        has_ablation[np.unique(lab[ablation])] = True
        small = (areas < params.min_isolated_area) & ~has_ablation
        small[0] = False
        keep &= ~small[lab]
    if detail:
        return keep, {
            "ablation": ablation,
            "merged": region,
            "partition": part,
            "pruned_g3": pruned,
        }
    return keep
