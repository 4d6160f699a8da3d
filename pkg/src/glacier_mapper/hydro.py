"""D8 flow routing, sink filling, accumulation and drainage-basin delineation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InconsistencyError

SINK = kernels.SINK
NODATA = kernels.NODATA
# (row, col) offsets for direction codes 0..7: E, SE, S, SW, W, NW, N, NE
OFFSETS = tuple(zip(kernels.DR, kernels.DC))


@dataclass
class FlowField:
    """Per-cell receiver direction: 0..7 index into :data:`OFFSETS`, or SINK / NODATA."""

    dirs: np.ndarray

    @property
    def shape(self):
        return self.dirs.shape

    @property
    def valid(self) -> np.ndarray:
        return self.dirs != NODATA

    def downstream(self) -> np.ndarray:
        """Flat index of each cell's receiver (-1 for sinks and nodata), same shape as the grid."""
        return kernels.active.downstream(self.dirs).reshape(self.shape)

    def restricted_to(self, region: np.ndarray) -> FlowField:
        """Cells outside ``region`` become NODATA; links leaving it become SINK."""
        region = np.asarray(region, dtype=bool)
        dirs = np.where(region, self.dirs, NODATA).astype(np.int8)
        down = self.downstream().ravel()
        leaves = (down >= 0) & ~region.ravel()[np.maximum(down, 0)]
        dirs.ravel()[leaves & region.ravel()] = SINK
        return FlowField(dirs)

    def order(self) -> np.ndarray:
        order = kernels.active.topo_order(self.dirs)
        if order is None:
            raise InconsistencyError("flow field contains a cycle")
        return order


def _valid(dem: np.ndarray) -> np.ndarray:
    return ~np.isnan(dem)


def fill_sinks(dem: np.ndarray) -> np.ndarray:
    """Priority-flood fill: the minimal raise giving every cell a non-ascending path out.

    Cells on the grid border or next to nodata are outlets.
    """
    dem = np.asarray(dem, dtype=np.float64)
    valid = _valid(dem)
    if not valid.any():
        return dem.copy()
    out = kernels.active.priority_flood(np.where(valid, dem, 0.0), valid)
    out[~valid] = np.nan
    return out


def flow_direction_d8(dem: np.ndarray, resolve_flats: bool = True) -> FlowField:
    """Steepest-descent receivers (drop / distance, diagonals at sqrt(2)).

    Ties go to the first direction in E, SE, S, SW, W, NW, N, NE order. Cells
    with no lower neighbour are SINK unless ``resolve_flats`` routes them
    across an equal-elevation flat toward its nearest (breadth-first) drain;
    border and nodata-adjacent cells without descent always stay SINK.
    """
    dem = np.asarray(dem, dtype=np.float64)
    valid = _valid(dem)
    elev = np.where(valid, dem, 0.0)
    dirs = kernels.active.d8_flowdir(elev, valid)
    if resolve_flats:
        dirs = kernels.active.resolve_flats(elev, valid, dirs)
    return FlowField(dirs)


def flow_accumulation(flow: FlowField) -> np.ndarray:
    """Number of cells (itself included) draining through each cell; NaN on nodata."""
    acc = kernels.active.accumulate(flow.dirs, flow.order())
    acc[~flow.valid] = np.nan
    return acc


def drainage_basins(flow: FlowField, targets: np.ndarray | None = None) -> np.ndarray:
    """Label every valid cell by where its flow path ends.

    Without ``targets`` each cell gets ``1 + flat index`` of the sink it reaches.
    With a labeled ``targets`` raster each cell gets the code of the first
    target cell on its path (itself included), or 0 if it reaches a sink first.
    Nodata cells are 0.
    """
    if targets is not None:
        targets = np.asarray(targets)
        if targets.shape != flow.shape:
            raise ValueError(f"targets shape {targets.shape} != flow shape {flow.shape}")
        targets = np.where(flow.valid, targets, 0)
    return kernels.active.basins(flow.dirs, flow.order(), targets)
