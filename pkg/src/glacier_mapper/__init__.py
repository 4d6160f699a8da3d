"""Glacier outline refinement from segmentation masks, a DEM and multispectral bands."""

from .grid import Grid, MultiBandStack, read_grid, write_grid
from .kernels import BACKEND

__all__ = ["BACKEND", "Grid", "MultiBandStack", "read_grid", "write_grid"]
__version__ = "0.1.0"
