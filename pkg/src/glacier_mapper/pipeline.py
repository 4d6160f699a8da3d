"""Configuration loading and the staged batch pipeline.

Stages: data preparation (resample, terrain layers, optional normalization),
routing products, mask ingestion or baseline segmentation, terminus
refinement, accumulation-zone estimation, evaluation. Each stage is computed
lazily once and can be written out on its own.
"""

from __future__ import annotations

import configparser
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from . import evaluation, hydro, morphology, scaz, spectral, terminus
from .errors import ConfigError, DataError, StructureError
from .grid import FORMATS, ROLES, Grid, MultiBandStack, normalize_stack, read_grid, resample_nearest, tile_and_merge, write_grid
from .terrain import smooth_dem, terrain_params

log = logging.getLogger(__name__)

THREADS_ENV = "GLACIER_MAPPER_THREADS"
BAND_ROLES = tuple(r for r in ROLES if r.startswith("B"))
_SUFFIX = {"esri_ascii": ".asc", "raw_f32": ".f32"}


@dataclass
class PipelineConfig:
    # [inputs]
    dem: Path | None = None
    d1: Path | None = None
    d2: Path | None = None
    features: list[Path] = field(default_factory=list)
    reference_ablation: Path | None = None
    reference_full: Path | None = None
    # [stack]
    bands: dict[str, Path] = field(default_factory=dict)
    # [output]
    output_dir: Path = Path("out")
    output_format: str = "esri_ascii"
    write_normalized: bool = False
    # [grid]
    target_cellsize: float | None = None
    window: int = 512
    stride: int = 32
    # [terrain]
    smooth_radius: int = 1
    sad_radius: int = 5
    # [segment]
    baseline: bool = False
    baseline_snow_thresh: float = spectral.DEFAULT_SNOW_THRESH
    baseline_slope_max: float = 24.0
    # [postprocess]
    min_area: int = morphology.DEFAULT_MIN_AREA
    hole_max_area: int = morphology.DEFAULT_HOLE_MAX_AREA
    hole_max_slope: float = morphology.DEFAULT_HOLE_MAX_SLOPE
    water_removal: bool = False
    # [terminus]
    low_alt_fraction: float = 0.15
    iou_threshold: float = 0.7
    k: int = 5
    ring_width: int = 5
    box_pad: int = 10
    close_radius: int = morphology.DEFAULT_CLOSE_RADIUS
    veg_thresh: float = spectral.DEFAULT_VEG_THRESH
    # [scaz]
    snow_thresh: float = spectral.DEFAULT_SNOW_THRESH
    scaz_close_radius: int = morphology.DEFAULT_CLOSE_RADIUS
    min_isolated_area: int = morphology.DEFAULT_MIN_AREA
    # [evaluate]
    margin: int = evaluation.DEFAULT_MARGIN
    sus_elevation: float | None = None

    def knn_params(self) -> terminus.KnnParams:
        return terminus.KnnParams(
            k=self.k,
            ring_width=self.ring_width,
            iou_threshold=self.iou_threshold,
            low_alt_fraction=self.low_alt_fraction,
            box_pad=self.box_pad,
            close_radius=self.close_radius,
            veg_thresh=self.veg_thresh,
        )

    def scaz_params(self) -> scaz.ScazParams:
        return scaz.ScazParams(self.snow_thresh, self.scaz_close_radius, self.min_isolated_area)

    def as_dict(self) -> dict:
        def plain(v):
            if isinstance(v, Path):
                return str(v)
            if isinstance(v, dict):
                return {k: plain(x) for k, x in v.items()}
            if isinstance(v, list):
                return [plain(x) for x in v]
            return v

        return {k: plain(v) for k, v in asdict(self).items()}


# section -> key -> (attribute, parser)
_SCHEMA = {
    "output": {"dir": ("output_dir", "path"), "format": ("output_format", str), "write_normalized": ("write_normalized", bool)},
    "grid": {"target_cellsize": ("target_cellsize", float), "window": ("window", int), "stride": ("stride", int)},
    "terrain": {"smooth_radius": ("smooth_radius", int), "sad_radius": ("sad_radius", int)},
    "segment": {
        "baseline": ("baseline", bool),
        "snow_thresh": ("baseline_snow_thresh", float),
        "slope_max": ("baseline_slope_max", float),
    },
    "postprocess": {
        "min_area": ("min_area", int),
        "hole_max_area": ("hole_max_area", int),
        "hole_max_slope": ("hole_max_slope", float),
        "water_removal": ("water_removal", bool),
    },
    "terminus": {
        "low_alt_fraction": ("low_alt_fraction", float),
        "iou_threshold": ("iou_threshold", float),
        "k": ("k", int),
        "ring_width": ("ring_width", int),
        "box_pad": ("box_pad", int),
        "close_radius": ("close_radius", int),
        "veg_thresh": ("veg_thresh", float),
    },
    "scaz": {
        "snow_thresh": ("snow_thresh", float),
        "close_radius": ("scaz_close_radius", int),
        "min_isolated_area": ("min_isolated_area", int),
    },
    "evaluate": {"margin": ("margin", int), "sus_elevation": ("sus_elevation", float)},
}
_INPUT_KEYS = ("dem", "d1", "d2", "reference_ablation", "reference_full")


def load_config(path: str | Path) -> PipelineConfig:
    """Parse an INI-style config; relative paths resolve against the config's directory."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    base = path.parent
    cfg = PipelineConfig()

    def resolve(value: str) -> Path:
        p = Path(value).expanduser()
        return p if p.is_absolute() else (base / p)

    known = {"inputs", "stack", *_SCHEMA}
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"{path}: unknown section [{section}]")

    if parser.has_section("inputs"):
        for key, value in parser.items("inputs"):
            if not value:
                continue
            if key in _INPUT_KEYS:
                setattr(cfg, key, resolve(value))
            elif key == "features":
                cfg.features = [resolve(v) for v in value.split()]
            else:
                raise ConfigError(f"{path}: unknown key {key!r} in [inputs]")
    if parser.has_section("stack"):
        for role, value in parser.items("stack"):
            if role not in ROLES:
                raise ConfigError(f"{path}: unknown channel role {role!r} in [stack]")
            if value:
                cfg.bands[role] = resolve(value)
    for section, keys in _SCHEMA.items():
        if not parser.has_section(section):
            continue
        for key, value in parser.items(section):
            if key not in keys:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            attr, kind = keys[key]
            if value == "":
                continue
            try:
                if kind is bool:
                    parsed = parser.getboolean(section, key)
                elif kind == "path":
                    parsed = resolve(value)
                else:
                    parsed = kind(value)
            except ValueError:
                raise ConfigError(f"{path}: bad value {value!r} for {section}.{key}") from None
            setattr(cfg, attr, parsed)
    validate(cfg)
    return cfg


def validate(cfg: PipelineConfig) -> None:
    if cfg.dem is None:
        raise ConfigError("inputs.dem is required")
    for name in _INPUT_KEYS:
        p = getattr(cfg, name)
        if p is not None and not p.exists():
            raise ConfigError(f"inputs.{name}: file not found: {p}")
    for p in cfg.features:
        if not p.exists():
            raise ConfigError(f"inputs.features: file not found: {p}")
    for role, p in cfg.bands.items():
        if not p.exists():
            raise ConfigError(f"stack.{role}: file not found: {p}")
    if cfg.output_format not in FORMATS:
        raise ConfigError(f"output.format must be one of {FORMATS}")
    checks = [
        (cfg.window >= 1 and cfg.stride >= 1, "grid.window and grid.stride must be >= 1"),
        (cfg.target_cellsize is None or cfg.target_cellsize > 0, "grid.target_cellsize must be > 0"),
        (cfg.smooth_radius >= 0 and cfg.sad_radius >= 0, "terrain radii must be >= 0"),
        (cfg.min_area >= 0 and cfg.hole_max_area >= 0, "postprocess areas must be >= 0"),
        (0 < cfg.low_alt_fraction < 1, "terminus.low_alt_fraction must lie in (0, 1)"),
        (0 < cfg.iou_threshold < 1, "terminus.iou_threshold must lie in (0, 1)"),
        (cfg.k >= 1, "terminus.k must be >= 1"),
        (cfg.ring_width >= 1, "terminus.ring_width must be >= 1"),
        (cfg.box_pad >= 0 and cfg.close_radius >= 0, "terminus.box_pad and close_radius must be >= 0"),
        (-1 < cfg.veg_thresh < 1, "terminus.veg_thresh must lie in (-1, 1)"),
        (-1 < cfg.snow_thresh < 1, "scaz.snow_thresh must lie in (-1, 1)"),
        (-1 < cfg.baseline_snow_thresh < 1, "segment.snow_thresh must lie in (-1, 1)"),
        (cfg.scaz_close_radius >= 0 and cfg.min_isolated_area >= 0, "scaz parameters must be >= 0"),
        (cfg.margin >= 0, "evaluate.margin must be >= 0"),
    ]
    for ok, message in checks:
        if not ok:
            raise ConfigError(message)
    if (cfg.d1 is None or cfg.d2 is None) and not cfg.baseline:
        raise ConfigError("inputs.d1 and inputs.d2 are required unless segment.baseline = true")


def resolve_threads(flag: int | None) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    return 1


class Pipeline:
    """Lazily evaluated stages over one loaded configuration."""

    def __init__(self, cfg: PipelineConfig, threads: int = 1):
        self.cfg = cfg
        self.threads = threads
        self.outputs: dict[str, str] = {}

    # -- inputs -------------------------------------------------------------

    def _load(self, path: Path, name: str) -> Grid:
        grid = read_grid(path)
        if self.cfg.target_cellsize and grid.cellsize != self.cfg.target_cellsize:
            grid = resample_nearest(grid, self.cfg.target_cellsize)
        if name != "DEM" and not grid.aligned_with(self.dem_grid):
            raise StructureError(f"{name} ({path}) is misaligned with the DEM: {grid.georef()} != {self.dem_grid.georef()}")
        return grid

    @cached_property
    def dem_grid(self) -> Grid:
        grid = read_grid(self.cfg.dem)
        if self.cfg.target_cellsize and grid.cellsize != self.cfg.target_cellsize:
            grid = resample_nearest(grid, self.cfg.target_cellsize)
        return grid

    @property
    def template(self) -> Grid:
        return self.dem_grid

    @cached_property
    def dem(self) -> np.ndarray:
        return self.dem_grid.data()

    @cached_property
    def smoothed_dem(self) -> np.ndarray:
        return smooth_dem(self.dem, self.cfg.smooth_radius)

    @cached_property
    def terrain(self):
        return terrain_params(self.smoothed_dem, self.dem_grid.cellsize, self.cfg.sad_radius)

    @cached_property
    def stack(self) -> MultiBandStack:
        stack = MultiBandStack()
        for role in BAND_ROLES:
            if role in self.cfg.bands:
                stack.add(role, self._load(self.cfg.bands[role], role))
        stack.add("DEM", self.dem_grid)
        for role, values in self.terrain.as_dict().items():
            stack.add(role, self.dem_grid.with_data(values))
        return stack

    @cached_property
    def normalized(self) -> MultiBandStack:
        return normalize_stack(self.stack)

    # -- routing ------------------------------------------------------------

    @cached_property
    def filled(self) -> np.ndarray:
        return hydro.fill_sinks(self.smoothed_dem)

    @cached_property
    def flow(self) -> hydro.FlowField:
        return hydro.flow_direction_d8(self.filled)

    @cached_property
    def accumulation(self) -> np.ndarray:
        return hydro.flow_accumulation(self.flow)

    @cached_property
    def basins(self) -> np.ndarray:
        return hydro.drainage_basins(self.flow)

    # -- masks --------------------------------------------------------------

    @cached_property
    def baseline(self) -> np.ndarray:
        self.stack.require("B3", "B6")
        cube = np.stack([self.stack.data("B3"), self.stack.data("B6"), self.stack.data("SLOPE")], axis=-1)
        thresh, slope_max = self.cfg.baseline_snow_thresh, self.cfg.baseline_slope_max

        def per_tile(tile: np.ndarray) -> np.ndarray:
            index = spectral.normalized_difference(tile[..., 1], tile[..., 0])
            return spectral.segment_arrays(index, tile[..., 2], thresh, slope_max)

        return tile_and_merge(cube, per_tile, self.cfg.window, self.cfg.stride, self.threads)

    def _mask(self, name: str) -> np.ndarray:
        path = getattr(self.cfg, name)
        if path is None:
            if not self.cfg.baseline:
                raise ConfigError(f"inputs.{name} missing and baseline segmentation disabled")
            return self.baseline
        grid = self._load(path, name)
        return grid.valid & (grid.cells != 0)

    def _postprocess(self, mask: np.ndarray) -> np.ndarray:
        if self.cfg.water_removal:
            log.warning("postprocess.water_removal is reserved and has no effect")
        mask = morphology.remove_small_regions(mask, self.cfg.min_area)
        return morphology.fill_holes(mask, self.terrain.slope, self.cfg.hole_max_area, self.cfg.hole_max_slope)

    @cached_property
    def d1(self) -> np.ndarray:
        return self._postprocess(self._mask("d1"))

    @cached_property
    def d2(self) -> np.ndarray:
        return self._postprocess(self._mask("d2"))

    @cached_property
    def features(self) -> np.ndarray:
        if self.cfg.features:
            layers = [self._load(p, p.name).data() for p in self.cfg.features]
            return np.nan_to_num(np.stack(layers, axis=-1), nan=0.0)
        return terminus.build_features(self.stack.array())

    @cached_property
    def ndvi(self) -> np.ndarray:
        return spectral.ndvi(self.stack)

    @cached_property
    def refined(self) -> tuple[np.ndarray, list]:
        return terminus.refine_termini(
            self.d1, self.d2, self.smoothed_dem, self.features, self.ndvi, self.cfg.knn_params(), self.threads
        )

    @cached_property
    def full_glacier(self) -> np.ndarray:
        mask, _ = self.refined
        return scaz.estimate_scaz(mask, self.d1, self.smoothed_dem, spectral.snow_index(self.stack), self.cfg.scaz_params())

    # -- writing ------------------------------------------------------------

    def write(self, name: str, values: np.ndarray) -> Path:
        values = np.asarray(values)
        if values.dtype == bool:
            values = np.where(self.dem_grid.valid, values.astype(np.float32), np.nan)
        path = self.cfg.output_dir / (name + _SUFFIX[self.cfg.output_format])
        write_grid(self.template.with_data(values.astype(np.float32)), path, self.cfg.output_format)
        self.outputs[name] = str(path)
        return path

    def run_terrain(self) -> None:
        self.write("terrain/dem_smoothed", self.smoothed_dem)
        for role, values in self.terrain.as_dict().items():
            self.write(f"terrain/{role.lower()}", values)
        if self.cfg.write_normalized:
            for role in self.normalized.roles():
                self.write(f"normalized/{role}", self.normalized.data(role))

    def run_hydro(self) -> None:
        self.write("hydro/filled", self.filled)
        self.write("hydro/flowdir", np.where(self.flow.valid, self.flow.dirs, np.nan))
        self.write("hydro/accumulation", self.accumulation)
        self.write("hydro/basins", np.where(self.flow.valid, self.basins, np.nan))

    def run_segment(self) -> None:
        self.write("masks/baseline", self.baseline)

    def run_refine(self) -> None:
        self.write("masks/d1_post", self.d1)
        self.write("masks/d2_post", self.d2)
        self.write("masks/ablation_refined", self.refined[0])

    def run_scaz(self) -> None:
        self.run_refine()
        self.write("masks/glacier_full", self.full_glacier)

    def run_evaluate(self, from_disk: bool = False) -> None:
        if self.cfg.reference_ablation is None and self.cfg.reference_full is None:
            raise ConfigError("evaluate needs inputs.reference_ablation or inputs.reference_full")
        pairs = [("ablation", self.cfg.reference_ablation, "masks/ablation_refined"),
                 ("full", self.cfg.reference_full, "masks/glacier_full")]
        for label, ref_path, pred_name in pairs:
            if ref_path is None:
                continue
            if from_disk:
                path = self.cfg.output_dir / (pred_name + _SUFFIX[self.cfg.output_format])
                if not path.exists():
                    raise DataError(f"prediction {path} not found; run the producing stage first")
                grid = read_grid(path)
                pred = grid.valid & (grid.cells != 0)
            else:
                pred = self.refined[0] if label == "ablation" else self.full_glacier
            ref_grid = self._load(ref_path, f"reference_{label}")
            ref = ref_grid.valid & (ref_grid.cells != 0)
            sus = self.cfg.sus_elevation if label == "ablation" else None
            report = evaluation.evaluate(pred, ref, self.cfg.margin, sus, self.smoothed_dem, self.dem_grid.valid)
            out = self.cfg.output_dir / "metrics" / f"{label}.txt"
            out.parent.mkdir(parents=True, exist_ok=True)
            report.write(out)
            self.outputs[f"metrics/{label}"] = str(out)

    def run_all(self) -> None:
        self.run_terrain()
        self.run_hydro()
        if self.cfg.d1 is None or self.cfg.d2 is None:
            self.run_segment()
        self.run_scaz()
        if self.cfg.reference_ablation is not None or self.cfg.reference_full is not None:
            self.run_evaluate()

    def write_manifest(self, command: str) -> Path:
        path = self.cfg.output_dir / "manifest.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        manifest = {
            "command": command,
            "config": self.cfg.as_dict(),
            "outputs": dict(sorted(self.outputs.items())),
        }
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return path
