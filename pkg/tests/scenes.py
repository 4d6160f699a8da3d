"""Synthetic scenes with analytically known flow paths.

``two_valley_scene`` is a south-tilted surface folded into two valleys (axes at
columns 64 and 192) by a ridge at column 128:

    z = 1000 + 4 * (H - 1 - row) + 2 * fold(col)

where ``fold`` is the distance to the nearer valley axis. Off the axes every
cell's steepest neighbour is the diagonal toward its axis (drop 6/sqrt 2 beats 4),
on an axis it is due south, and on the ridge the SE/SW tie goes SE. So a cell
keeps ``row + fold`` constant until it meets its axis, which makes basins
computable by hand.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from glacier_mapper.grid import Grid, write_grid

SNOW_INDEX = -0.8
ROCK_INDEX = 0.2


def fold(cols):
    return np.minimum(np.abs(cols - 64), np.abs(cols - 192))


@dataclass
class TwoValleyScene:
    dem: np.ndarray
    tongue_a: np.ndarray
    tongue_b: np.ndarray  # includes its western lobe across the divide
    snowfield: np.ndarray  # shared funnel-shaped snowfield, before rock and nunatak
    rock: np.ndarray  # 12x12 outcrop: a large gap inside the snowfield
    nunatak: np.ndarray  # 3 rock cells: a small gap
    patch: np.ndarray  # snow below tongue B's lobe that drains across the divide to tongue A
    snow_index: np.ndarray

    @property
    def ablation(self) -> np.ndarray:
        return self.tongue_a | self.tongue_b

    @property
    def expected(self) -> np.ndarray:
        """Full-glacier mask derived from the geometry alone.

        Tongues plus the whole snowfield (paths stay inside it until they reach
        a tongue), with the 3-cell nunatak absorbed, the 12x12 outcrop restored
        as a hole, and the patch dropped because it reaches tongue A only after
        leaving the glacier.
        """
        return (self.ablation | self.snowfield) & ~self.rock


def two_valley_scene(size: int = 256) -> TwoValleyScene:
    if size < 256:
        raise ValueError("the layout needs at least 256 x 256 cells")
    rows, cols = np.mgrid[0:size, 0:size]
    f = fold(cols)
    dem = 1000.0 + 4.0 * (size - 1 - rows) + 2.0 * f

    tongue_a = (rows >= 150) & (rows <= 230) & (np.abs(cols - 64) <= 10)
    tongue_b = (rows >= 150) & (rows <= 230) & (np.abs(cols - 192) <= 10)
    tongue_b |= (rows >= 150) & (rows <= 160) & (cols >= 120) & (cols <= 202)

    snowfield = (rows >= 20) & (rows + f <= 160) & (f <= 50) & (rows < 150)
    rock = (rows >= 50) & (rows <= 61) & (cols >= 150) & (cols <= 161)
    nunatak = np.zeros_like(rock)
    nunatak[40, 100] = nunatak[40, 101] = nunatak[41, 100] = True
    patch = (rows >= 161) & (rows <= 166) & (cols >= 100) & (cols <= 127)

    snow = (snowfield & ~rock & ~nunatak) | patch
    snow_index = np.where(snow, SNOW_INDEX, ROCK_INDEX)
    return TwoValleyScene(dem, tongue_a, tongue_b, snowfield, rock, nunatak, patch, snow_index)


def cone_scene(size: int = 121, apex=(60, 60)):
    """Cone with a snow cap (radius < 40) ringed by an ablation annulus (40..50)."""
    rows, cols = np.mgrid[0:size, 0:size]
    dist = np.hypot(rows - apex[0], cols - apex[1])
    dem = 3000.0 - 10.0 * dist
    ablation = (dist >= 40) & (dist <= 50)
    cap = dist < 40
    snow_index = np.where(cap, SNOW_INDEX, ROCK_INDEX)
    return dem, ablation, cap, snow_index


def write_pipeline_scene(directory, size: int = 256, fmt: str = ".asc") -> dict:
    """Write DEM, bands and both ablation masks for the two-valley scene.

    ``d1`` overshoots each tongue's terminus by an apron of 12 rows and ``d2``
    stops short of it by 6 rows; a vegetated strip lies across tongue A's foot.
    Returns the written paths by name.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    s = two_valley_scene(size)
    rows = np.arange(size)[:, None]
    d2 = s.ablation & (rows <= 224)
    d1 = s.ablation.copy()
    for centre in (64, 192):
        cols = np.arange(size)[None, :]
        d1 |= (rows > 230) & (rows <= 242) & (np.abs(cols - centre) <= 10)
    snow = s.snow_index < 0
    green = np.where(snow, 0.9, 0.2)
    swir = np.where(snow, 0.1, 0.3)
    red = np.full(s.dem.shape, 0.2)
    nir = np.full(s.dem.shape, 0.25)
    nir[236:240, 50:80] = 0.8  # NDVI 0.6 strip
    # texture that tells the apron (debris-free ground) from the tongues
    rng = np.random.default_rng(7)
    b10 = np.where(d1 & ~(rows > 236), 0.3, 0.7) + rng.normal(0, 0.01, s.dem.shape)

    layers = {
        "dem": s.dem, "d1": d1.astype(float), "d2": d2.astype(float),
        "B3": green, "B4": red, "B5": nir, "B6": swir, "B10": b10,
        "reference_full": s.expected.astype(float), "reference_ablation": s.ablation.astype(float),
    }
    out = {}
    for name, values in layers.items():
        grid = Grid(values.astype(np.float32), 15.0, 500000.0, 4000000.0)
        out[name] = write_grid(grid, directory / f"{name}{fmt}")
    return out


def pipeline_config(directory, paths: dict, output_dir="out", fmt="esri_ascii", extra: str = "") -> Path:
    directory = Path(directory)
    text = f"""[inputs]
dem = {paths['dem']}
d1 = {paths['d1']}
d2 = {paths['d2']}
reference_ablation = {paths['reference_ablation']}
reference_full = {paths['reference_full']}

[stack]
B3 = {paths['B3']}
B4 = {paths['B4']}
B5 = {paths['B5']}
B6 = {paths['B6']}
B10 = {paths['B10']}

[output]
dir = {output_dir}
format = {fmt}

[postprocess]
min_area = 50

[scaz]
min_isolated_area = 50
{extra}
"""
    path = directory / "config.ini"
    path.write_text(text)
    return path
