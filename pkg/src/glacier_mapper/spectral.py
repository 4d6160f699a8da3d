"""Normalized-difference band indices and a threshold segmenter used in place of CNN masks."""

from __future__ import annotations

import numpy as np

from .grid import MultiBandStack

DEFAULT_SNOW_THRESH = -0.4
DEFAULT_VEG_THRESH = 0.3


def normalized_difference(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(a - b) / (a + b); NaN where either input is NaN or the sum is zero."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    den = a + b
    out = np.full(np.broadcast(a, b).shape, np.nan)
    ok = (den != 0) & ~np.isnan(den)
    np.divide(a - b, den, out=out, where=ok)
    return out


def ndvi(stack: MultiBandStack) -> np.ndarray:
    """Landsat 8 NDVI from NIR (B5) and red (B4)."""
    stack.require("B5", "B4")
    return normalized_difference(stack.data("B5"), stack.data("B4"))


def snow_index(stack: MultiBandStack) -> np.ndarray:
    """(SWIR1 - green) / (SWIR1 + green) from B6 and B3.

    Snow is strongly negative under this orientation.
    """
    stack.require("B6", "B3")
    return normalized_difference(stack.data("B6"), stack.data("B3"))


def baseline_segment(
    stack: MultiBandStack,
    snow_thresh: float = DEFAULT_SNOW_THRESH,
    slope_max: float = 24.0,
) -> np.ndarray:
    """Boolean mask of low-slope, snow-index-negative cells.

    Stand-in for the CNN decision rasters when none are supplied.
    """
    stack.require("B3", "B6", "SLOPE")
    return segment_arrays(snow_index(stack), stack.data("SLOPE"), snow_thresh, slope_max)


def segment_arrays(index: np.ndarray, slope: np.ndarray, snow_thresh: float, slope_max: float) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        return (index < snow_thresh) & (slope < slope_max)
