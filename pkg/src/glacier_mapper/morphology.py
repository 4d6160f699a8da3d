"""Binary mask operations: components, size filtering, slope-aware hole filling, closing, rings.

Masks are boolean arrays. Positive regions use 8-connectivity and holes use
4-connectivity unless stated otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import ndimage

DEFAULT_MIN_AREA = 445
DEFAULT_HOLE_MAX_AREA = 2000
DEFAULT_HOLE_MAX_SLOPE = 24.0
DEFAULT_CLOSE_RADIUS = 2

_STRUCTURE = {4: ndimage.generate_binary_structure(2, 1), 8: ndimage.generate_binary_structure(2, 2)}


@dataclass
class RegionSet:
    labels: np.ndarray
    count: int
    areas: np.ndarray  # areas[i] is the area of label i + 1
    bboxes: list[tuple[slice, slice]]

    def mask(self, label: int) -> np.ndarray:
        return self.labels == label

    def boundary(self, label: int) -> np.ndarray:
        """Region cells with at least one 4-neighbour outside the region (or off-grid)."""
        return boundary(self.labels == label)


def label(mask: np.ndarray, connectivity: int = 8) -> tuple[np.ndarray, int]:
    """Label connected regions 1..n in row-major first-encounter order."""
    if connectivity not in _STRUCTURE:
        raise ValueError("connectivity must be 4 or 8")
    labels, n = ndimage.label(np.asarray(mask, dtype=bool), structure=_STRUCTURE[connectivity])
    return labels.astype(np.int64), int(n)


def connected_components(mask: np.ndarray, connectivity: int = 8) -> RegionSet:
    labels, n = label(mask, connectivity)
    areas = np.bincount(labels.ravel(), minlength=n + 1)[1:]
    bboxes = ndimage.find_objects(labels, max_label=n) if n else []
    return RegionSet(labels, n, areas, list(bboxes))


def remove_small_regions(mask: np.ndarray, min_area: int, connectivity: int = 8) -> np.ndarray:
    """Drop positive regions with fewer than ``min_area`` cells (``min_area`` itself survives)."""
    mask = np.asarray(mask, dtype=bool)
    if min_area <= 0:
        return mask.copy()
    labels, n = label(mask, connectivity)
    areas = np.bincount(labels.ravel(), minlength=n + 1)
    keep = areas >= min_area
    keep[0] = False
    return keep[labels]


def holes(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """4-connected background regions that do not touch the grid border."""
    mask = np.asarray(mask, dtype=bool)
    labels, n = label(~mask, 4)
    edge = np.unique(np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]]))
    labels[np.isin(labels, edge)] = 0
    return labels, n


def fill_holes(
    mask: np.ndarray,
    slope: np.ndarray,
    max_area: int = DEFAULT_HOLE_MAX_AREA,
    max_slope: float = DEFAULT_HOLE_MAX_SLOPE,
) -> np.ndarray:
    """Fill interior holes no larger than ``max_area`` whose mean slope is at most ``max_slope``.

    The mean ignores nodata slope cells; a hole with no valid slope is left open.
    """
    mask = np.asarray(mask, dtype=bool)
    slope = np.asarray(slope, dtype=np.float64)
    labels, n = holes(mask)
    if n == 0:
        return mask.copy()
    ok = ~np.isnan(slope)
    flat = labels.ravel()
    area = np.bincount(flat, minlength=n + 1)
    nvalid = np.bincount(flat, weights=ok.ravel(), minlength=n + 1)
    total = np.bincount(flat, weights=np.where(ok, slope, 0.0).ravel(), minlength=n + 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = total / nvalid
    fill = (area <= max_area) & (nvalid > 0) & (mean <= max_slope)
    fill[0] = False
    return mask | fill[labels]


@lru_cache(maxsize=None)
def disk(radius: int) -> np.ndarray:
    """Cells within ``radius + 0.5`` of the centre; ``disk(1)`` is the full 3x3 block."""
    r = int(radius)
    yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
    out = np.hypot(yy, xx) <= r + 0.5
    out.setflags(write=False)
    return out


def dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    if radius <= 0:
        return mask.copy()
    return ndimage.binary_dilation(mask, structure=disk(radius))


def close(mask: np.ndarray, radius: int) -> np.ndarray:
    """Dilation then erosion by ``disk(radius)``, evaluated as if the grid were unbounded."""
    mask = np.asarray(mask, dtype=bool)
    if radius <= 0 or not mask.any():
        return mask.copy()
    pad = 2 * radius
    padded = np.pad(mask, pad)
    se = disk(radius)
    out = ndimage.binary_erosion(ndimage.binary_dilation(padded, structure=se), structure=se)
    return out[pad:-pad, pad:-pad]


def ring(mask: np.ndarray, width: int) -> np.ndarray:
    """The band of cells within ``disk(width)`` of the mask but outside it."""
    if width < 1:
        raise ValueError("ring width must be >= 1")
    mask = np.asarray(mask, dtype=bool)
    return dilate(mask, width) & ~mask


def boundary(mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    inner = ndimage.binary_erosion(mask, structure=_STRUCTURE[4], border_value=0)
    return mask & ~inner


def touches(region: np.ndarray, other: np.ndarray) -> bool:
    """True if ``region`` overlaps or is 8-adjacent to ``other``."""
    return bool((dilate(region, 1) & other).any())
