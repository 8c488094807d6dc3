"""Plain-text run configuration: INI parsing, validation, named presets.

One file describes a full pipeline run: path rosette geometry, dynamic
bounds, discretization, collision-index parameters, planner weights, and
simulator settings.  Every key has a default equal to the shipped benchmark
setup, so an empty file (or no file at all) reproduces the stock pipeline.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import ConfigError
from .topp import Bounds

__all__ = [
    "LibraryConfig",
    "IndexConfig",
    "RunConfig",
    "PRESET_NAMES",
    "preset_text",
    "load_config",
    "parse_config",
    "resolve_config",
]


@dataclass(frozen=True)
class LibraryConfig:
    """Everything `generate-library` needs."""

    radii: Tuple[float, ...] = (6.0, 8.0, 12.0, 20.0, 36.0, 78.0, math.inf)
    start_angles_deg: Tuple[float, ...] = (0.0, -10.0, -20.0, 0.0, -10.0, -20.0, 0.0)
    rotation_step_deg: float = 30.0
    length_m: float = 5.0
    v_min: Tuple[float, float, float] = (-3.0, -3.0, -3.0)
    v_max: Tuple[float, float, float] = (3.0, 3.0, 3.0)
    a_min: Tuple[float, float, float] = (-6.0, -6.0, -6.0)
    a_max: Tuple[float, float, float] = (6.0, 6.0, 6.0)
    v_norm: float = 3.0
    speed_step: float = 0.1
    sample_step: float = 0.01
    n_stages: int = 1000

    def bounds(self) -> Bounds:
        return Bounds(
            v_min=np.array(self.v_min, dtype=float),
            v_max=np.array(self.v_max, dtype=float),
            a_min=np.array(self.a_min, dtype=float),
            a_max=np.array(self.a_max, dtype=float),
            v_norm=float(self.v_norm),
        )

    def echo(self) -> Dict[str, str]:
        return {
            "radii": ",".join(repr(r) for r in self.radii),
            "start_angles_deg": ",".join(repr(a) for a in self.start_angles_deg),
            "rotation_step_deg": repr(self.rotation_step_deg),
            "length_m": repr(self.length_m),
        }


@dataclass(frozen=True)
class IndexConfig:
    """Everything `build-index` needs beyond the library itself."""

    voxel_size_m: float = 0.05
    r_inflated_m: float = 0.05
    robot_radius_m: float = 0.2
    # When set, overrides the derived clearance distance entirely.
    clearance_m: Optional[float] = None


@dataclass(frozen=True)
class RunConfig:
    """Full pipeline configuration (library + index + episode settings)."""

    library: LibraryConfig = field(default_factory=LibraryConfig)
    index: IndexConfig = field(default_factory=IndexConfig)
    # Episode-level settings; keys mirror simulator.EpisodeConfig.
    episode: Dict[str, object] = field(default_factory=dict)

    def episode_config(self, seed: int, n_obs: Optional[int] = None, **overrides):
        """Build a simulator.EpisodeConfig; explicit arguments win over file values."""
        from .simulator import EpisodeConfig

        merged = dict(self.episode)
        merged.update(overrides)
        file_n_obs = merged.pop("n_obs", None)
        if n_obs is None:
            n_obs = file_n_obs if file_n_obs is not None else 200
        return EpisodeConfig(seed=seed, n_obs=int(n_obs), **merged)


# ---------------------------------------------------------------------------
# Parsing


def _parse_float(raw: str, where: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{where}: expected a number, got {raw!r}") from None


def _parse_int(raw: str, where: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{where}: expected an integer, got {raw!r}") from None


def _parse_floats(raw: str, where: str) -> Tuple[float, ...]:
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    if not parts:
        raise ConfigError(f"{where}: expected a comma-separated list, got {raw!r}")
    return tuple(_parse_float(p, where) for p in parts)


def _parse_vec3(raw: str, where: str) -> Tuple[float, float, float]:
    vals = _parse_floats(raw, where)
    if len(vals) != 3:
        raise ConfigError(f"{where}: expected 3 components, got {len(vals)}")
    return vals  # type: ignore[return-value]


# section -> key -> (parser, target)
# target is ("library", field) | ("index", field) | ("episode", key)
_SCHEMA: Dict[str, Dict[str, Tuple[object, Tuple[str, str]]]] = {
    "paths": {
        "radii": (_parse_floats, ("library", "radii")),
        "start_angles_deg": (_parse_floats, ("library", "start_angles_deg")),
        "rotation_step_deg": (_parse_float, ("library", "rotation_step_deg")),
        "length_m": (_parse_float, ("library", "length_m")),
    },
    "dynamics": {
        "v_min": (_parse_vec3, ("library", "v_min")),
        "v_max": (_parse_vec3, ("library", "v_max")),
        "a_min": (_parse_vec3, ("library", "a_min")),
        "a_max": (_parse_vec3, ("library", "a_max")),
        "v_norm": (_parse_float, ("library", "v_norm")),
    },
    "discretization": {
        "speed_step": (_parse_float, ("library", "speed_step")),
        "sample_step": (_parse_float, ("library", "sample_step")),
        "n_stages": (_parse_int, ("library", "n_stages")),
    },
    "index": {
        "voxel_size_m": (_parse_float, ("index", "voxel_size_m")),
        "r_inflated_m": (_parse_float, ("index", "r_inflated_m")),
        "robot_radius_m": (_parse_float, ("index", "robot_radius_m")),
        "clearance_m": (_parse_float, ("index", "clearance_m")),
    },
    "planner": {
        "tick_s": (_parse_float, ("episode", "tick")),
        "lambda_goal": (_parse_float, ("episode", "lambda_goal")),
        "lambda_bound": (_parse_float, ("episode", "lambda_bound")),
        "bound_penalty": (_parse_float, ("episode", "bound_penalty")),
        "goal_tolerance_m": (_parse_float, ("episode", "goal_tolerance")),
        "bounds_margin_m": (_parse_float, ("episode", "bounds_margin")),
        "z_band_m": (lambda r, w: tuple(_parse_floats(r, w)), ("episode", "z_band")),
    },
    "simulator": {
        "n_obs": (_parse_int, ("episode", "n_obs")),
        "r_obs_mean_m": (_parse_float, ("episode", "r_obs_mean")),
        "extent_m": (lambda r, w: tuple(_parse_floats(r, w)), ("episode", "extent")),
        "start": (_parse_vec3, ("episode", "start")),
        "goal": (_parse_vec3, ("episode", "goal")),
        "robot_radius_m": (_parse_float, ("episode", "robot_radius")),
        "timeout_s": (_parse_float, ("episode", "timeout_s")),
        "n_pc": (_parse_int, ("episode", "n_pc")),
        "n_frames": (_parse_int, ("episode", "n_frames")),
        "sensor_range_m": (_parse_float, ("episode", "sensor_range")),
        "sensor_fov_deg": (_parse_float, ("episode", "sensor_fov_deg")),
        "sensor_res_deg": (_parse_float, ("episode", "sensor_res_deg")),
        "sensor_hz": (_parse_float, ("episode", "sensor_hz")),
        "sensor_z_levels": (_parse_floats, ("episode", "sensor_z_levels")),
        "dedup_voxel_m": (_parse_float, ("episode", "dedup_voxel")),
        "rest_scan_after": (_parse_int, ("episode", "rest_scan_after")),
    },
}

def parse_config(text: str, source: str = "<string>") -> RunConfig:
    """Parse INI text into a validated RunConfig.

    Unknown sections or keys are rejected with a message naming them, so a
    typo cannot silently fall back to a default.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None

    lib_kwargs: Dict[str, object] = {}
    idx_kwargs: Dict[str, object] = {}
    episode: Dict[str, object] = {}
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(
                f"{source}: unknown section [{section}] "
                f"(expected one of {sorted(_SCHEMA)})"
            )
        for key, raw in cp.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(
                    f"{source}: unknown key {key!r} in section [{section}] "
                    f"(expected one of {sorted(_SCHEMA[section])})"
                )
            parser, (kind, name) = _SCHEMA[section][key]
            value = parser(raw, f"{source} [{section}] {key}")  # type: ignore[operator]
            if kind == "library":
                lib_kwargs[name] = value
            elif kind == "index":
                idx_kwargs[name] = value
            else:
                episode[name] = value

    library = LibraryConfig(**lib_kwargs)  # type: ignore[arg-type]
    index = IndexConfig(**idx_kwargs)  # type: ignore[arg-type]
    _validate(library, index, episode, source)
    return RunConfig(library=library, index=index, episode=episode)


def _validate(
    lib: LibraryConfig, idx: IndexConfig, episode: Dict[str, object], source: str
) -> None:
    if len(lib.radii) != len(lib.start_angles_deg):
        raise ConfigError(
            f"{source}: radii has {len(lib.radii)} entries but start_angles_deg "
            f"has {len(lib.start_angles_deg)}; they pair up elementwise"
        )
    for r in lib.radii:
        if not (r > 0):
            raise ConfigError(f"{source}: radii must be positive (or inf), got {r}")
    if lib.rotation_step_deg <= 0 or lib.rotation_step_deg > 360:
        raise ConfigError(
            f"{source}: rotation_step_deg must be in (0, 360], got {lib.rotation_step_deg}"
        )
    turns = 360.0 / lib.rotation_step_deg
    if abs(turns - round(turns)) > 1e-9:
        raise ConfigError(
            f"{source}: rotation_step_deg must divide 360 evenly, got {lib.rotation_step_deg}"
        )
    if lib.length_m <= 0:
        raise ConfigError(f"{source}: length_m must be positive, got {lib.length_m}")
    if lib.speed_step <= 0:
        raise ConfigError(f"{source}: speed_step must be positive, got {lib.speed_step}")
    if lib.sample_step <= 0:
        raise ConfigError(f"{source}: sample_step must be positive, got {lib.sample_step}")
    if lib.n_stages < 2:
        raise ConfigError(f"{source}: n_stages must be at least 2, got {lib.n_stages}")
    if lib.v_norm <= 0:
        raise ConfigError(f"{source}: v_norm must be positive, got {lib.v_norm}")
    for name, vec, sign in (
        ("v_min", lib.v_min, -1),
        ("v_max", lib.v_max, +1),
        ("a_min", lib.a_min, -1),
        ("a_max", lib.a_max, +1),
    ):
        for c in vec:
            if sign > 0 and c <= 0:
                raise ConfigError(f"{source}: {name} components must be positive, got {c}")
            if sign < 0 and c >= 0:
                raise ConfigError(f"{source}: {name} components must be negative, got {c}")
    if idx.voxel_size_m <= 0:
        raise ConfigError(f"{source}: voxel_size_m must be positive, got {idx.voxel_size_m}")
    if idx.r_inflated_m < 0:
        raise ConfigError(f"{source}: r_inflated_m must be >= 0, got {idx.r_inflated_m}")
    if idx.robot_radius_m <= 0:
        raise ConfigError(
            f"{source}: robot_radius_m must be positive, got {idx.robot_radius_m}"
        )
    if idx.clearance_m is not None and idx.clearance_m <= 0:
        raise ConfigError(f"{source}: clearance_m must be positive, got {idx.clearance_m}")
    band = episode.get("z_band")
    if band is not None:
        if len(band) != 2 or not (band[0] < band[1]):  # type: ignore[arg-type,index]
            raise ConfigError(f"{source}: z_band_m must be 'low, high' with low < high")
    extent = episode.get("extent")
    if extent is not None and len(extent) != 2:  # type: ignore[arg-type]
        raise ConfigError(f"{source}: extent_m must be 'width, height'")
    for key in ("tick", "timeout_s", "sensor_range", "sensor_hz", "dedup_voxel"):
        val = episode.get(key)
        if val is not None and val <= 0:  # type: ignore[operator]
            raise ConfigError(f"{source}: {key} must be positive, got {val}")
    for key in ("n_pc", "n_frames"):
        val = episode.get(key)
        if val is not None and val < 1:  # type: ignore[operator]
            raise ConfigError(f"{source}: {key} must be at least 1, got {val}")


def load_config(path) -> RunConfig:
    """Load and validate an INI config file."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    return parse_config(text, source=str(p))


# ---------------------------------------------------------------------------
# Presets

_PRESETS: Dict[str, str] = {
    # 2 finite radii x 12 rolls + straight = 25 paths
    "low": """\
[paths]
radii = 8, 20, inf
start_angles_deg = 0, 0, 0
rotation_step_deg = 30
length_m = 5
""",
    # 3 finite radii x 12 rolls + straight = 37 paths
    "medium": """\
[paths]
radii = 6, 12, 36, inf
start_angles_deg = 0, 0, 0, 0
rotation_step_deg = 30
length_m = 5
""",
    # 6 finite radii x 12 rolls + straight = 73 paths
    "high": """\
[paths]
radii = 6, 8, 12, 20, 36, 78, inf
start_angles_deg = 0, -10, -20, 0, -10, -20, 0
rotation_step_deg = 30
length_m = 5
""",
    # 9 finite radii x 12 rolls + straight = 109 paths; short, slow segments
    # sized for tight indoor flight.
    "realworld": """\
[paths]
radii = 2, 3, 4, 6, 8, 12, 20, 36, 78, inf
start_angles_deg = 0, 0, 0, 0, 0, 0, 0, 0, 0, 0
rotation_step_deg = 30
length_m = 3

[dynamics]
v_min = -2, -2, -2
v_max = 2, 2, 2
v_norm = 2
""",
}

PRESET_NAMES: Tuple[str, ...] = tuple(sorted(_PRESETS))


def preset_text(name: str) -> str:
    """Return the INI text of a named preset."""
    try:
        return _PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r} (available: {', '.join(PRESET_NAMES)})"
        ) from None


def resolve_config(spec: Optional[str]) -> RunConfig:
    """Turn a --config value into a RunConfig.

    Accepts ``preset:<name>``, a bare preset name (when no file of that name
    exists), or a path to an INI file.  ``None`` yields all defaults.
    """
    if spec is None:
        return RunConfig()
    if spec.startswith("preset:"):
        return parse_config(preset_text(spec[len("preset:"):]), source=spec)
    path = Path(spec)
    if not path.exists() and spec in _PRESETS:
        return parse_config(preset_text(spec), source=f"preset:{spec}")
    return load_config(path)
