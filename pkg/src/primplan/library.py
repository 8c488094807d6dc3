"""Speed-indexed primitive library: build, query helpers, serialization.

A library holds one time-optimal trajectory per (path, start-speed slice)
pair, every trajectory braking to rest by the path end.  Start speeds run
from zero to the velocity cap in fixed steps.  Pairs whose start speed is
not reachable are skipped and recorded, never silently dropped.

The on-disk format is line-oriented text (header ``PPLIB v1``).  Floats are
written with ``repr``, i.e. shortest round-trip form, so serialize ->
deserialize -> serialize reproduces identical bytes.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, FormatError
from .paths import ArcSpec, GeometricPath, generate_arc
from .topp import (
    FEASIBILITY_SLACK,
    Bounds,
    InfeasibleStartError,
    Trajectory,
    _assemble_trajectory,
    backward_pass,
    formulate_stages,
    forward_pass,
)

_HEADER = "PPLIB v1"


class LibraryFormatError(FormatError):
    """Corrupt, truncated, or wrong-version library data."""


def _fmt(x: float) -> str:
    return repr(float(x))


def _fmt_vec(v) -> str:
    return ",".join(_fmt(x) for x in np.asarray(v).ravel())


@dataclass
class PrimitiveLibrary:
    """The built library plus everything needed to rebuild or bind to it."""

    paths: List[GeometricPath]
    speed_grid: np.ndarray
    primitives: Dict[Tuple[int, int], Trajectory]
    bounds: Bounds
    speed_step: float
    sample_step: float
    n_stages: int
    infeasible: List[Tuple[int, int]]
    coverage_lo: np.ndarray
    coverage_hi: np.ndarray
    config_echo: Dict[str, str] = field(default_factory=dict)

    _keys: Optional[List[Tuple[int, int]]] = None
    _slices: Optional[Dict[int, np.ndarray]] = None
    _end_points: Optional[np.ndarray] = None
    _curvatures: Optional[np.ndarray] = None

    @property
    def n_paths(self) -> int:
        return len(self.paths)

    @property
    def n_slices(self) -> int:
        return len(self.speed_grid)

    @property
    def n_primitives(self) -> int:
        return len(self.primitives)

    def primitive_keys(self) -> List[Tuple[int, int]]:
        """(path_id, speed_index) pairs in dense-id order."""
        if self._keys is None:
            self._keys = sorted(self.primitives.keys())
        return self._keys

    def slice_paths(self, speed_index: int) -> np.ndarray:
        """Sorted path ids feasible at one speed slice."""
        if self._slices is None:
            slices: Dict[int, list] = {k: [] for k in range(self.n_slices)}
            for pid, k in self.primitive_keys():
                slices[k].append(pid)
            self._slices = {k: np.array(v, dtype=np.int64) for k, v in slices.items()}
        return self._slices[speed_index]

    def path_end_points(self) -> np.ndarray:
        """(n_paths, 3) end points of the underlying geometric paths."""
        if self._end_points is None:
            self._end_points = np.array([p.end_point for p in self.paths])
        return self._end_points

    def path_curvatures(self) -> np.ndarray:
        if self._curvatures is None:
            self._curvatures = np.array([p.curvature for p in self.paths])
        return self._curvatures

    def speed_index(self, speed: float) -> int:
        """Nearest slice for a speed; ties round down, result clamped."""
        k = math.ceil(speed / self.speed_step - 0.5)
        return min(max(k, 0), self.n_slices - 1)

    def content_hash(self) -> str:
        """Digest over all structural data; stable across save/load."""
        h = hashlib.sha256()
        h.update(_HEADER.encode())
        for p in self.paths:
            h.update(
                f"{p.path_id} {_fmt(p.spec.radius)} {_fmt(p.spec.length)} "
                f"{_fmt(p.spec.start_angle)} {_fmt(p.spec.rotation_step)} "
                f"{_fmt(p.roll)} {len(p.s)}".encode()
            )
        h.update(self.speed_grid.tobytes())
        for name in ("v_min", "v_max", "a_min", "a_max"):
            h.update(getattr(self.bounds, name).tobytes())
        h.update(_fmt(self.bounds.v_norm).encode())
        h.update(_fmt(self.sample_step).encode())
        h.update(str(self.n_stages).encode())
        for key in self.primitive_keys():
            tr = self.primitives[key]
            h.update(repr(key).encode())
            h.update(tr.t.tobytes())
            h.update(np.ascontiguousarray(tr.position).tobytes())
            h.update(np.ascontiguousarray(tr.velocity).tobytes())
            h.update(np.ascontiguousarray(tr.acceleration).tobytes())
        h.update(repr(sorted(self.infeasible)).encode())
        return h.hexdigest()


def build_library(
    paths: Sequence[GeometricPath],
    bounds: Bounds,
    speed_step: float = 0.1,
    sample_step: float = 0.01,
    n_stages: int = 1000,
    config_echo: Optional[Dict[str, str]] = None,
) -> PrimitiveLibrary:
    """Parameterize every (path, start speed) pair that admits a profile.

    The backward sweep depends only on the path and the (zero) end speed,
    so it runs once per path and is shared across all start-speed slices.
    Raises ``ConfigError`` if some slice ends up with no feasible path at
    all, since the planner could then never move at that speed.
    """
    if speed_step <= 0:
        raise ConfigError(f"speed_step must be positive, got {speed_step}")
    for i, p in enumerate(paths):
        if p.path_id != i:
            raise ConfigError(f"path ids must be dense, got {p.path_id} at slot {i}")

    top = min(bounds.v_norm, float(bounds.v_max[0]))
    n_slices = int(math.floor(top / speed_step + 1e-9)) + 1
    speed_grid = np.arange(n_slices) * speed_step

    primitives: Dict[Tuple[int, int], Trajectory] = {}
    infeasible: List[Tuple[int, int]] = []
    for path in paths:
        stages = formulate_stages(path, bounds, n_stages)
        control_sets = backward_pass(stages, 0.0)
        scale = math.sqrt(stages[0].b_norm)
        for k in range(n_slices):
            v0 = float(speed_grid[k])
            try:
                x = forward_pass(stages, control_sets, (v0 / scale) ** 2)
            except InfeasibleStartError:
                infeasible.append((path.path_id, k))
                continue
            primitives[(path.path_id, k)] = _assemble_trajectory(
                path, stages, x, v0, 0.0, sample_step
            )

    for k in range(n_slices):
        if not any(key[1] == k for key in primitives):
            raise ConfigError(
                f"speed slice {k} ({speed_grid[k]:.3g} m/s) has no feasible paths"
            )

    lo = np.full(3, np.inf)
    hi = np.full(3, -np.inf)
    for tr in primitives.values():
        lo = np.minimum(lo, tr.position.min(axis=0))
        hi = np.maximum(hi, tr.position.max(axis=0))

    return PrimitiveLibrary(
        paths=list(paths),
        speed_grid=speed_grid,
        primitives=primitives,
        bounds=bounds,
        speed_step=float(speed_step),
        sample_step=float(sample_step),
        n_stages=int(n_stages),
        infeasible=infeasible,
        coverage_lo=lo,
        coverage_hi=hi,
        config_echo=dict(config_echo or {}),
    )


def serialize_library(lib: PrimitiveLibrary) -> bytes:
    lines = [_HEADER]
    lines.append(f"n_paths = {lib.n_paths}")
    lines.append(f"n_slices = {lib.n_slices}")
    lines.append(f"n_primitives = {lib.n_primitives}")
    lines.append(f"speed_step = {_fmt(lib.speed_step)}")
    lines.append(f"sample_step = {_fmt(lib.sample_step)}")
    lines.append(f"n_stages = {lib.n_stages}")
    for name in ("v_min", "v_max", "a_min", "a_max"):
        lines.append(f"{name} = {_fmt_vec(getattr(lib.bounds, name))}")
    lines.append(f"v_norm = {_fmt(lib.bounds.v_norm)}")
    lines.append(f"speed_grid = {_fmt_vec(lib.speed_grid)}")
    lines.append(f"coverage_lo = {_fmt_vec(lib.coverage_lo)}")
    lines.append(f"coverage_hi = {_fmt_vec(lib.coverage_hi)}")
    lines.append(
        "infeasible = " + ";".join(f"{p}:{k}" for p, k in sorted(lib.infeasible))
    )
    for key, value in sorted(lib.config_echo.items()):
        lines.append(f"meta.{key} = {value}")
    for p in lib.paths:
        lines.append(
            f"path {p.path_id} {_fmt(p.spec.radius)} {_fmt(p.spec.length)} "
            f"{_fmt(p.spec.start_angle)} {_fmt(p.spec.rotation_step)} "
            f"{_fmt(p.roll)} {len(p.s)}"
        )
    for key in lib.primitive_keys():
        tr = lib.primitives[key]
        lines.append(f"({key[0]}, {key[1]})")
        block = np.column_stack([tr.t, tr.position, tr.velocity, tr.acceleration])
        for row in block:
            lines.append(" ".join(repr(float(v)) for v in row))
    lines.append("")
    return "\n".join(lines).encode()


def _parse_float(text: str, offset: int, what: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise LibraryFormatError(f"bad float {text!r} in {what}", offset) from None


def _parse_vec(text: str, offset: int, what: str, n: int = 3) -> np.ndarray:
    parts = text.split(",") if text else []
    if len(parts) != n:
        raise LibraryFormatError(
            f"expected {n} comma-separated values in {what}, got {len(parts)}", offset
        )
    return np.array([_parse_float(p, offset, what) for p in parts])


def deserialize_library(data: bytes) -> PrimitiveLibrary:
    """Strict parse; any structural problem raises with a byte offset."""
    if not data:
        raise LibraryFormatError("empty byte stream", 0)
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise LibraryFormatError("not valid UTF-8 text", exc.start) from None

    lines = text.split("\n")
    offsets = np.cumsum([0] + [len(line.encode()) + 1 for line in lines[:-1]])

    if lines[0] != _HEADER:
        raise LibraryFormatError(
            f"unsupported header {lines[0][:30]!r}, expected {_HEADER!r}", 0
        )

    manifest: Dict[str, Tuple[str, int]] = {}
    i = 1
    while i < len(lines) and not lines[i].startswith("path ") and lines[i].strip():
        line = lines[i]
        if " = " not in line:
            raise LibraryFormatError(f"bad manifest line {line!r}", int(offsets[i]))
        key, value = line.split(" = ", 1)
        manifest[key] = (value, int(offsets[i]))
        i += 1

    def need(key: str) -> Tuple[str, int]:
        if key not in manifest:
            raise LibraryFormatError(f"missing manifest key {key!r}", 0)
        return manifest[key]

    def need_int(key: str) -> int:
        value, off = need(key)
        try:
            return int(value)
        except ValueError:
            raise LibraryFormatError(f"bad integer for {key!r}: {value!r}", off) from None

    n_paths = need_int("n_paths")
    n_slices = need_int("n_slices")
    n_primitives = need_int("n_primitives")
    speed_step = _parse_float(*need("speed_step"), "speed_step")
    sample_step = _parse_float(*need("sample_step"), "sample_step")
    n_stages = need_int("n_stages")
    bounds = Bounds(
        v_min=_parse_vec(*need("v_min"), "v_min"),
        v_max=_parse_vec(*need("v_max"), "v_max"),
        a_min=_parse_vec(*need("a_min"), "a_min"),
        a_max=_parse_vec(*need("a_max"), "a_max"),
        v_norm=_parse_float(*need("v_norm"), "v_norm"),
    )
    grid_text, grid_off = need("speed_grid")
    speed_grid = _parse_vec(grid_text, grid_off, "speed_grid", n_slices)
    coverage_lo = _parse_vec(*need("coverage_lo"), "coverage_lo")
    coverage_hi = _parse_vec(*need("coverage_hi"), "coverage_hi")

    infeasible: List[Tuple[int, int]] = []
    inf_text, inf_off = need("infeasible")
    if inf_text:
        for item in inf_text.split(";"):
            try:
                p, k = item.split(":")
                infeasible.append((int(p), int(k)))
            except ValueError:
                raise LibraryFormatError(
                    f"bad infeasible pair {item!r}", inf_off
                ) from None

    config_echo = {
        key[len("meta.") :]: value
        for key, (value, _) in manifest.items()
        if key.startswith("meta.")
    }

    paths: List[GeometricPath] = []
    while i < len(lines) and lines[i].startswith("path "):
        parts = lines[i].split()
        if len(parts) != 8:
            raise LibraryFormatError(
                f"path line needs 8 fields, got {len(parts)}", int(offsets[i])
            )
        pid = int(parts[1])
        spec = ArcSpec(
            radius=_parse_float(parts[2], int(offsets[i]), "path radius"),
            length=_parse_float(parts[3], int(offsets[i]), "path length"),
            start_angle=_parse_float(parts[4], int(offsets[i]), "path start_angle"),
            rotation_step=_parse_float(parts[5], int(offsets[i]), "path rotation_step"),
        )
        roll = _parse_float(parts[6], int(offsets[i]), "path roll")
        paths.append(generate_arc(spec, roll, int(parts[7]), path_id=pid))
        i += 1
    if len(paths) != n_paths:
        raise LibraryFormatError(
            f"manifest claims {n_paths} paths, found {len(paths)}",
            int(offsets[min(i, len(lines) - 1)]),
        )

    primitives: Dict[Tuple[int, int], Trajectory] = {}
    while i < len(lines):
        line = lines[i]
        if not line.strip():
            i += 1
            continue
        if not (line.startswith("(") and line.endswith(")")):
            raise LibraryFormatError(
                f"expected primitive key line, got {line[:40]!r}", int(offsets[i])
            )
        try:
            pid_s, k_s = line[1:-1].split(",")
            pid, k = int(pid_s), int(k_s)
        except ValueError:
            raise LibraryFormatError(
                f"bad primitive key {line!r}", int(offsets[i])
            ) from None
        if not (0 <= pid < n_paths and 0 <= k < n_slices):
            raise LibraryFormatError(
                f"primitive key {line!r} out of range", int(offsets[i])
            )
        key_off = int(offsets[i])
        i += 1
        rows = []
        while i < len(lines) and lines[i] and not lines[i].startswith("("):
            parts = lines[i].split()
            if len(parts) != 10:
                raise LibraryFormatError(
                    f"knot row needs 10 fields, got {len(parts)}", int(offsets[i])
                )
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                raise LibraryFormatError("bad float in knot row", int(offsets[i])) from None
            i += 1
        if len(rows) < 2:
            raise LibraryFormatError(
                f"primitive ({pid}, {k}) has fewer than 2 knots", key_off
            )
        block = np.array(rows)
        primitives[(pid, k)] = Trajectory(
            path_id=pid,
            v_start=float(speed_grid[k]),
            v_end=0.0,
            t=np.ascontiguousarray(block[:, 0]),
            position=np.ascontiguousarray(block[:, 1:4]),
            velocity=np.ascontiguousarray(block[:, 4:7]),
            acceleration=np.ascontiguousarray(block[:, 7:10]),
            sample_step=sample_step,
        )

    if len(primitives) != n_primitives:
        raise LibraryFormatError(
            f"manifest claims {n_primitives} primitives, found {len(primitives)}", 0
        )

    lib = PrimitiveLibrary(
        paths=paths,
        speed_grid=speed_grid,
        primitives=primitives,
        bounds=bounds,
        speed_step=speed_step,
        sample_step=sample_step,
        n_stages=n_stages,
        infeasible=infeasible,
        coverage_lo=coverage_lo,
        coverage_hi=coverage_hi,
        config_echo=config_echo,
    )
    _validate_loaded(lib)
    return lib


def _validate_loaded(lib: PrimitiveLibrary) -> None:
    """Re-check dynamic feasibility and coverage of everything loaded."""
    b = lib.bounds
    slack = 1.0 + FEASIBILITY_SLACK
    v_cap = b.v_norm * slack
    for key, tr in lib.primitives.items():
        if np.any(np.diff(tr.t) <= 0):
            raise LibraryFormatError(f"primitive {key} has non-increasing times", 0)
        speed = np.linalg.norm(tr.velocity, axis=1)
        if speed.max() > v_cap:
            raise LibraryFormatError(
                f"primitive {key} violates the speed cap: {speed.max():.4f}", 0
            )
        if np.any(tr.velocity > b.v_max * slack) or np.any(tr.velocity < b.v_min * slack):
            raise LibraryFormatError(f"primitive {key} violates velocity bounds", 0)
        if np.any(tr.acceleration > b.a_max * slack) or np.any(
            tr.acceleration < b.a_min * slack
        ):
            raise LibraryFormatError(f"primitive {key} violates acceleration bounds", 0)
        if np.any(tr.position < lib.coverage_lo) or np.any(
            tr.position > lib.coverage_hi
        ):
            raise LibraryFormatError(f"primitive {key} escapes the coverage box", 0)


def save_library(lib: PrimitiveLibrary, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_library(lib))


def load_library(path) -> PrimitiveLibrary:
    with open(path, "rb") as fh:
        return deserialize_library(fh.read())
