"""DEM smoothing and geomorphometric layers from a 3x3 quadratic fit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage


@dataclass
class TerrainLayers:
    slope: np.ndarray  # degrees
    profile_curvature: np.ndarray  # 1/m
    tangential_curvature: np.ndarray  # 1/m
    unsphericity: np.ndarray  # 1/m
    sad_index: np.ndarray  # [0, 1]

    def as_dict(self) -> dict[str, np.ndarray]:
        return {
            "SLOPE": self.slope,
            "PROFC": self.profile_curvature,
            "TANC": self.tangential_curvature,
            "UNSPH": self.unsphericity,
            "SAD": self.sad_index,
        }


def smooth_dem(dem: np.ndarray, radius: int) -> np.ndarray:
    """Mean over valid cells of the (2r+1)^2 window; nodata (NaN) stays nodata."""
    dem = np.asarray(dem, dtype=np.float64)
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0:
        return dem.copy()
    valid = ~np.isnan(dem)
    size = 2 * radius + 1
    # sums, not means, so boundary cells only average what exists
    total = ndimage.correlate(np.where(valid, dem, 0.0), np.ones((size, size)), mode="constant")
    count = ndimage.correlate(valid.astype(np.float64), np.ones((size, size)), mode="constant")
    out = np.full_like(dem, np.nan)
    out[valid] = total[valid] / count[valid]
    return out


def derivatives(dem: np.ndarray, cellsize: float) -> tuple[np.ndarray, ...]:
    """Evans-Young partial derivatives (p, q, r, s, t) with x east and y north.

    Cells on the border or with a nodata neighbour are NaN.
    """
    z = np.asarray(dem, dtype=np.float64)
    h, w = z.shape
    nan = np.full((h, w), np.nan)
    if h < 3 or w < 3:
        return nan, nan.copy(), nan.copy(), nan.copy(), nan.copy()
    # window cells z1..z9, row-major from the north-west corner
    z1, z2, z3 = z[:-2, :-2], z[:-2, 1:-1], z[:-2, 2:]
    z4, z5, z6 = z[1:-1, :-2], z[1:-1, 1:-1], z[1:-1, 2:]
    z7, z8, z9 = z[2:, :-2], z[2:, 1:-1], z[2:, 2:]
    g = float(cellsize)
    out = []
    for expr in (
        ((z3 + z6 + z9) - (z1 + z4 + z7)) / (6 * g),
        ((z1 + z2 + z3) - (z7 + z8 + z9)) / (6 * g),
        ((z1 + z3 + z4 + z6 + z7 + z9) - 2 * (z2 + z5 + z8)) / (3 * g * g),
        ((z3 + z7) - (z1 + z9)) / (4 * g * g),
        ((z1 + z2 + z3 + z7 + z8 + z9) - 2 * (z4 + z5 + z6)) / (3 * g * g),
    ):
        a = nan.copy()
        a[1:-1, 1:-1] = expr
        # p and q skip the centre cell, so nodata there must be masked explicitly
        a[np.isnan(z)] = np.nan
        out.append(a)
    return tuple(out)


def aspect(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Downslope azimuth in degrees clockwise from north; 0 where the gradient vanishes."""
    az = np.degrees(np.arctan2(-p, -q)) % 360.0
    return np.where((p == 0) & (q == 0), 0.0, az)


def terrain_params(dem: np.ndarray, cellsize: float, sad_radius: int = 5) -> TerrainLayers:
    dem = np.asarray(dem, dtype=np.float64)
    p, q, r, s, t = derivatives(dem, cellsize)
    g2 = p * p + q * q
    flat = g2 == 0
    w = 1.0 + g2
    slope = np.degrees(np.arctan(np.sqrt(g2)))

    with np.errstate(invalid="ignore", divide="ignore"):
        kv = -(p * p * r + 2 * p * q * s + q * q * t) / (g2 * w ** 1.5)
        kh = -(q * q * r - 2 * p * q * s + p * p * t) / (g2 * np.sqrt(w))
    kv = np.where(flat, 0.0, kv)
    kh = np.where(flat, 0.0, kh)

    mean_k = -((1 + q * q) * r - 2 * p * q * s + (1 + p * p) * t) / (2 * w ** 1.5)
    gauss_k = (r * t - s * s) / (w * w)
    unsph = np.sqrt(np.maximum(mean_k * mean_k - gauss_k, 0.0))

    sp, sq, *_ = derivatives(smooth_dem(dem, sad_radius), cellsize)
    diff = np.abs((aspect(p, q) - aspect(sp, sq) + 180.0) % 360.0 - 180.0)
    smooth_flat = (sp == 0) & (sq == 0)
    sad = np.where(flat | smooth_flat, 0.0, diff / 180.0)

    undefined = np.isnan(p)
    layers = []
    for a in (slope, kv, kh, unsph, sad):
        a = np.array(a, dtype=np.float64)
        a[undefined] = np.nan
        layers.append(a)
    return TerrainLayers(*layers)
