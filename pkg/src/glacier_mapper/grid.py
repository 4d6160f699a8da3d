"""Raster data model, file I/O, resampling, normalization and sliding-window tiling.

Library functions elsewhere in the package operate on plain numpy arrays in
which nodata is represented by NaN; :class:`Grid` carries the georeferencing
and the on-disk sentinel and converts at the I/O boundary.
"""

from __future__ import annotations

import json
import math
from collections.abc import Callable, Iterator
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DataError, ParseError, StructureError

ROLES = (
    "B1", "B2", "B3", "B4", "B5", "B6", "B7", "B8", "B9", "B10", "B11",
    "DEM", "SLOPE", "PROFC", "TANC", "UNSPH", "SAD",
)
FORMATS = ("esri_ascii", "raw_f32")
DEFAULT_NODATA = -9999.0


@dataclass
class Grid:
    """Single-band georeferenced raster.

    ``cells`` is a (height, width) array; row 0 is the northern edge.
    ``origin_x``/``origin_y`` give the lower-left corner in meters.
    """

    cells: np.ndarray
    cellsize: float
    origin_x: float = 0.0
    origin_y: float = 0.0
    nodata: float = DEFAULT_NODATA

    def __post_init__(self):
        self.cells = np.asarray(self.cells)
        if self.cells.ndim != 2 or self.cells.shape[0] < 1 or self.cells.shape[1] < 1:
            raise StructureError(f"grid cells must be a non-empty 2-D array, got shape {self.cells.shape}")
        if not self.cellsize > 0:
            raise StructureError(f"cellsize must be positive, got {self.cellsize}")

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    @property
    def valid(self) -> np.ndarray:
        return _valid(self.cells, self.nodata)

    def data(self) -> np.ndarray:
        """Cells as float64 with nodata replaced by NaN."""
        out = self.cells.astype(np.float64)
        out[~self.valid] = np.nan
        return out

    def with_data(self, values: np.ndarray) -> Grid:
        """New grid on the same georeferencing; NaN in ``values`` becomes nodata."""
        values = np.asarray(values)
        if values.shape != self.shape:
            raise StructureError(f"shape {values.shape} does not match grid {self.shape}")
        if values.dtype == bool:
            values = values.astype(np.float32)
        out = np.array(values, dtype=np.result_type(values.dtype, np.float32))
        out[np.isnan(out)] = self.nodata
        return replace(self, cells=out)

    def georef(self) -> tuple:
        return (self.width, self.height, float(self.cellsize), float(self.origin_x), float(self.origin_y))

    def aligned_with(self, other: Grid) -> bool:
        return self.georef() == other.georef()


def _valid(cells: np.ndarray, nodata: float) -> np.ndarray:
    if isinstance(nodata, float) and math.isnan(nodata):
        return ~np.isnan(cells)
    return (cells != nodata) & ~np.isnan(cells)


@dataclass
class MultiBandStack:
    """Aligned channels keyed by role (``B1``..``B11``, ``DEM``, terrain layers)."""

    channels: dict[str, Grid] = field(default_factory=dict)

    def __post_init__(self):
        items = list(self.channels.items())
        self.channels = {}
        for role, grid in items:
            self.add(role, grid)

    def add(self, role: str, grid: Grid) -> None:
        if role not in ROLES:
            raise StructureError(f"unknown channel role {role!r}")
        if role in self.channels:
            raise StructureError(f"channel role {role} appears twice")
        if self.channels:
            ref_role, ref = next(iter(self.channels.items()))
            if not grid.aligned_with(ref):
                raise StructureError(
                    f"channel {role} is misaligned with {ref_role}: {grid.georef()} != {ref.georef()}"
                )
        self.channels[role] = grid

    def __contains__(self, role: str) -> bool:
        return role in self.channels

    def __getitem__(self, role: str) -> Grid:
        return self.channels[role]

    def __len__(self) -> int:
        return len(self.channels)

    def roles(self) -> list[str]:
        return [r for r in ROLES if r in self.channels]

    def require(self, *roles: str) -> None:
        from .errors import ConfigError

        missing = [r for r in roles if r not in self.channels]
        if missing:
            raise ConfigError(f"stack is missing band role(s): {', '.join(missing)}")

    def data(self, role: str) -> np.ndarray:
        return self.channels[role].data()

    def array(self) -> np.ndarray:
        """(height, width, channels) float64 cube in canonical role order."""
        return np.stack([self.data(r) for r in self.roles()], axis=-1)

    @property
    def template(self) -> Grid:
        return next(iter(self.channels.values()))


# ---------------------------------------------------------------------------
# I/O

_ASCII_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")


def read_grid(path: str | Path, format: str | None = None) -> Grid:
    path = Path(path)
    format = format or _guess_format(path)
    if not path.exists():
        raise DataError(f"grid file not found: {path}")
    if format == "esri_ascii":
        return _read_ascii(path)
    if format == "raw_f32":
        return _read_raw(path)
    raise ParseError(f"unknown grid format {format!r}")


def write_grid(grid: Grid, path: str | Path, format: str | None = None) -> Path:
    path = Path(path)
    format = format or _guess_format(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if format == "esri_ascii":
        _write_ascii(grid, path)
    elif format == "raw_f32":
        _write_raw(grid, path)
    else:
        raise ParseError(f"unknown grid format {format!r}")
    return path


def _guess_format(path: Path) -> str:
    return "raw_f32" if path.suffix in (".f32", ".raw", ".bin") else "esri_ascii"


def _read_ascii(path: Path) -> Grid:
    header: dict[str, float] = {}
    with open(path) as fh:
        lines = fh.read().splitlines()
    lineno = 0
    while lineno < len(lines) and len(header) < 6:
        text = lines[lineno].strip()
        lineno += 1
        if not text:
            continue
        parts = text.split()
        key = parts[0].lower()
        if key not in _ASCII_KEYS:
            if not header:
                raise ParseError(f"{path}:{lineno}: expected header key, got {parts[0]!r}")
            lineno -= 1
            break
        if len(parts) != 2:
            raise ParseError(f"{path}:{lineno}: header field {parts[0]!r} needs exactly one value")
        try:
            header[key] = float(parts[1])
        except ValueError:
            raise ParseError(f"{path}:{lineno}: bad value {parts[1]!r} for header field {parts[0]!r}") from None
    for key in ("ncols", "nrows", "cellsize"):
        if key not in header:
            raise ParseError(f"{path}: missing header field {key!r}")
    ncols, nrows = header["ncols"], header["nrows"]
    if ncols != int(ncols) or nrows != int(nrows) or ncols < 1 or nrows < 1:
        raise ParseError(f"{path}: ncols/nrows must be positive integers")
    ncols, nrows = int(ncols), int(nrows)
    nodata = float(np.float32(header.get("nodata_value", DEFAULT_NODATA)))

    rows = [ln.split() for ln in lines[lineno:] if ln.strip()]
    if len(rows) != nrows:
        raise StructureError(f"{path}: header declares nrows {nrows} but {len(rows)} data rows found")
    cells = np.empty((nrows, ncols), dtype=np.float32)
    for i, row in enumerate(rows):
        if len(row) != ncols:
            raise StructureError(
                f"{path}:{lineno + i + 1}: header declares ncols {ncols} but row has {len(row)} values"
            )
        try:
            cells[i] = np.array([float(v) for v in row])
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno + i + 1}: {exc}") from None
    return Grid(
        cells=cells,
        cellsize=header["cellsize"],
        origin_x=header.get("xllcorner", 0.0),
        origin_y=header.get("yllcorner", 0.0),
        nodata=nodata,
    )


def _fmt(v: float) -> str:
    # float32 -> shortest repr that roundtrips through float32
    return np.format_float_positional(np.float32(v), unique=True, trim="-") if np.isfinite(v) else repr(float(v))


def _write_ascii(grid: Grid, path: Path) -> None:
    cells = grid.cells.astype(np.float32)
    with open(path, "w") as fh:
        fh.write(f"ncols {grid.width}\n")
        fh.write(f"nrows {grid.height}\n")
        fh.write(f"xllcorner {grid.origin_x!r}\n")
        fh.write(f"yllcorner {grid.origin_y!r}\n")
        fh.write(f"cellsize {float(grid.cellsize)!r}\n")
        fh.write(f"NODATA_value {_fmt(grid.nodata)}\n")
        for row in cells:
            fh.write(" ".join(_fmt(v) for v in row))
            fh.write("\n")


def _write_raw(grid: Grid, path: Path) -> None:
    grid.cells.astype("<f4").tofile(path)
    meta = {
        "width": grid.width,
        "height": grid.height,
        "cellsize": float(grid.cellsize),
        "xllcorner": float(grid.origin_x),
        "yllcorner": float(grid.origin_y),
        "nodata": float(np.float32(grid.nodata)),
    }
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=2))


def _read_raw(path: Path) -> Grid:
    sidecar = Path(str(path) + ".json")
    if not sidecar.exists():
        raise DataError(f"missing sidecar {sidecar}")
    try:
        meta = json.loads(sidecar.read_text())
        width, height = int(meta["width"]), int(meta["height"])
        cellsize = float(meta["cellsize"])
    except (ValueError, KeyError, TypeError) as exc:
        raise ParseError(f"{sidecar}: malformed sidecar ({exc})") from None
    cells = np.fromfile(path, dtype="<f4")
    if cells.size != width * height:
        raise StructureError(f"{path}: {cells.size} values but sidecar declares {width}x{height}")
    return Grid(
        cells=cells.reshape(height, width).astype(np.float32),
        cellsize=cellsize,
        origin_x=float(meta.get("xllcorner", 0.0)),
        origin_y=float(meta.get("yllcorner", 0.0)),
        nodata=float(meta.get("nodata", DEFAULT_NODATA)),
    )


# ---------------------------------------------------------------------------
# Resampling and normalization


def resample_nearest(grid: Grid, target_cellsize: float) -> Grid:
    """Nearest-neighbour resample anchored at the upper-left corner."""
    if not target_cellsize > 0:
        raise ValueError("target_cellsize must be positive")
    if target_cellsize == grid.cellsize:
        return replace(grid, cells=grid.cells.copy())
    out_w = max(1, int(round(grid.width * grid.cellsize / target_cellsize)))
    out_h = max(1, int(round(grid.height * grid.cellsize / target_cellsize)))
    cols = np.minimum(((np.arange(out_w) + 0.5) * target_cellsize // grid.cellsize).astype(int), grid.width - 1)
    rows = np.minimum(((np.arange(out_h) + 0.5) * target_cellsize // grid.cellsize).astype(int), grid.height - 1)
    top = grid.origin_y + grid.height * grid.cellsize
    return Grid(
        cells=grid.cells[np.ix_(rows, cols)],
        cellsize=target_cellsize,
        origin_x=grid.origin_x,
        origin_y=top - out_h * target_cellsize,
        nodata=grid.nodata,
    )


def normalize_channel(values: np.ndarray) -> np.ndarray:
    """Min-max scale valid (non-NaN) cells into [0, 1]; constant input maps to 0."""
    out = np.array(values, dtype=np.float64)
    ok = ~np.isnan(out)
    if not ok.any():
        return out
    lo, hi = out[ok].min(), out[ok].max()
    if hi > lo:
        out[ok] = (out[ok] - lo) / (hi - lo)
    else:
        out[ok] = 0.0
    return out


def normalize_stack(stack: MultiBandStack) -> MultiBandStack:
    if not len(stack):
        raise ValueError("cannot normalize an empty stack")
    return MultiBandStack({role: g.with_data(normalize_channel(g.data())) for role, g in stack.channels.items()})


# ---------------------------------------------------------------------------
# Tiling


@dataclass(frozen=True)
class Tile:
    row_off: int
    col_off: int
    height: int
    width: int

    @property
    def slices(self) -> tuple[slice, slice]:
        return slice(self.row_off, self.row_off + self.height), slice(self.col_off, self.col_off + self.width)


def _offsets(extent: int, window: int, stride: int) -> list[int]:
    offs = list(range(0, extent - window + 1, stride))
    if offs[-1] != extent - window:
        offs.append(extent - window)
    return offs


def iter_tiles(shape: tuple[int, int], window: int = 512, stride: int = 32) -> Iterator[Tile]:
    """Tiles left-to-right, top-to-bottom; a final window is clamped flush to each edge.

    A window larger than the grid is shrunk to the grid extent on that axis.
    """
    if stride < 1 or window < 1:
        raise ValueError("window and stride must be >= 1")
    h, w = shape
    wh, ww = min(window, h), min(window, w)
    for r in _offsets(h, wh, stride):
        for c in _offsets(w, ww, stride):
            yield Tile(r, c, wh, ww)


def tile_and_merge(
    data: np.ndarray,
    per_tile_fn: Callable[[np.ndarray], np.ndarray],
    window: int = 512,
    stride: int = 32,
    threads: int = 1,
) -> np.ndarray:
    """Apply ``per_tile_fn`` over sliding windows and merge binary outputs by majority vote.

    ``data`` is (H, W) or (H, W, C). Ties in the vote resolve to positive.
    Cells no tile covers (stride > window) stay negative. Vote counting is
    order independent, so ``threads`` never changes the result.
    """
    data = np.asarray(data)
    h, w = data.shape[:2]
    votes = np.zeros((h, w), dtype=np.int32)
    cover = np.zeros((h, w), dtype=np.int32)
    tiles = list(iter_tiles((h, w), window, stride))

    def run(tile: Tile) -> tuple[Tile, np.ndarray]:
        out = np.asarray(per_tile_fn(data[tile.slices]))
        if out.shape != (tile.height, tile.width):
            raise StructureError(f"per-tile output shape {out.shape} != tile shape {(tile.height, tile.width)}")
        return tile, out.astype(bool)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(threads) as pool:
            results = pool.map(run, tiles)
            for tile, out in results:
                votes[tile.slices] += out
                cover[tile.slices] += 1
    else:
        for tile in tiles:
            _, out = run(tile)
            votes[tile.slices] += out
            cover[tile.slices] += 1
    return (cover > 0) & (2 * votes >= cover)
