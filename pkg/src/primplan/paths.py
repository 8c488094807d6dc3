"""Geometric path library: fixed-length planar arcs swept around the x-axis.

Every path starts at the origin with tangent +x and is parameterized by a
unitless coordinate u in [0, 1].  A library is a rosette of such arcs:
each finite turn radius is swept through a full revolution of roll angles,
an infinite radius contributes the single straight segment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .errors import ConfigError

# Two generated paths whose end points land closer than this are treated as
# the same path and rejected.
_DUPLICATE_END_TOL = 1e-6

_DEG = math.pi / 180.0


@dataclass(frozen=True)
class ArcSpec:
    """Shape of one planar arc before any roll is applied.

    ``radius`` is the turn radius in meters (``math.inf`` for a straight
    segment), ``length`` the arc length in meters.  ``start_angle`` is a roll
    offset in degrees applied before the sweep; ``rotation_step`` the sweep
    increment in degrees.
    """

    radius: float
    length: float
    start_angle: float = 0.0
    rotation_step: float = 30.0

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError(f"arc length must be positive, got {self.length}")
        if not self.radius > 0:
            raise ValueError(f"turn radius must be positive, got {self.radius}")
        if math.isfinite(self.radius) and self.length / self.radius >= math.pi:
            raise ValueError(
                "arc sweeps half a circle or more "
                f"(length {self.length} m at radius {self.radius} m); "
                "paths must stay in the forward half-space"
            )
        if not self.rotation_step > 0:
            raise ValueError(f"rotation step must be positive, got {self.rotation_step}")
        turns = 360.0 / self.rotation_step
        if abs(turns - round(turns)) > 1e-9:
            raise ValueError(
                f"rotation step {self.rotation_step} deg must divide 360"
            )

    @property
    def is_straight(self) -> bool:
        return math.isinf(self.radius)


def _roll_matrix(angle_deg: float) -> np.ndarray:
    """Rotation about the +x axis."""
    c = math.cos(angle_deg * _DEG)
    s = math.sin(angle_deg * _DEG)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


@dataclass
class GeometricPath:
    """One sampled path with analytic derivatives.

    ``samples`` are taken on a uniform grid of the path parameter; the
    derivative columns are with respect to that parameter, not arc length.
    ``q_prime`` has constant norm equal to the arc length.
    """

    path_id: int
    spec: ArcSpec
    roll: float  # sweep roll in degrees, on top of spec.start_angle
    s: np.ndarray  # (n,)
    q: np.ndarray  # (n, 3)
    q_prime: np.ndarray  # (n, 3)
    q_second: np.ndarray  # (n, 3)

    def evaluate(self, u) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Analytic position and first two parameter derivatives at u.

        Accepts a scalar or 1-D array in [0, 1]; returns (n, 3) arrays.
        """
        u = np.atleast_1d(np.asarray(u, dtype=float))
        L = self.spec.length
        if self.spec.is_straight:
            zeros = np.zeros_like(u)
            q = np.column_stack([L * u, zeros, zeros])
            qp = np.column_stack([np.full_like(u, L), zeros, zeros])
            qpp = np.zeros((u.size, 3))
        else:
            r = self.spec.radius
            theta = u * (L / r)
            sin_t, cos_t = np.sin(theta), np.cos(theta)
            q = np.column_stack([r * sin_t, r * (1.0 - cos_t), np.zeros_like(u)])
            qp = np.column_stack([L * cos_t, L * sin_t, np.zeros_like(u)])
            k = L * L / r
            qpp = np.column_stack([-k * sin_t, k * cos_t, np.zeros_like(u)])
        rot = _roll_matrix(self.spec.start_angle + self.roll)
        return q @ rot.T, qp @ rot.T, qpp @ rot.T

    @property
    def length(self) -> float:
        return self.spec.length

    @property
    def curvature(self) -> float:
        return 0.0 if self.spec.is_straight else 1.0 / self.spec.radius

    @property
    def end_point(self) -> np.ndarray:
        return self.q[-1]

    def polyline_length(self) -> float:
        return float(np.linalg.norm(np.diff(self.q, axis=0), axis=1).sum())


def generate_arc(
    spec: ArcSpec, roll: float = 0.0, n_samples: int = 1001, path_id: int = 0
) -> GeometricPath:
    """Sample one arc at `n_samples` uniform parameter values.

    ``roll`` rotates the arc plane about +x in degrees; it adds to
    ``spec.start_angle``.
    """
    if n_samples < 2:
        raise ValueError(f"need at least 2 samples, got {n_samples}")
    path = GeometricPath(
        path_id=path_id,
        spec=spec,
        roll=float(roll),
        s=np.linspace(0.0, 1.0, n_samples),
        q=np.empty(0),
        q_prime=np.empty(0),
        q_second=np.empty(0),
    )
    path.q, path.q_prime, path.q_second = path.evaluate(path.s)
    return path


def build_path_library(
    radii: Sequence[float],
    start_angles: Sequence[float],
    rotation_step: float,
    length: float,
    n_samples: int = 1001,
) -> List[GeometricPath]:
    """Generate the full rosette with dense path ids.

    ``radii`` and ``start_angles`` pair up elementwise; the angle paired
    with an infinite radius is ignored (a straight segment is roll
    invariant and contributes exactly one path).
    """
    if len(radii) != len(start_angles):
        raise ConfigError(
            f"radii ({len(radii)}) and start_angles ({len(start_angles)}) "
            "must have equal length"
        )
    n_rolls = int(round(360.0 / rotation_step))
    paths: List[GeometricPath] = []
    for radius, angle in zip(radii, start_angles):
        if math.isinf(radius):
            spec = ArcSpec(radius, length, 0.0, rotation_step)
            paths.append(generate_arc(spec, 0.0, n_samples, path_id=len(paths)))
            continue
        spec = ArcSpec(radius, length, angle, rotation_step)
        for k in range(n_rolls):
            paths.append(
                generate_arc(spec, k * rotation_step, n_samples, path_id=len(paths))
            )
    _reject_duplicates(paths)
    return paths


def _reject_duplicates(paths: List[GeometricPath]) -> None:
    ends = np.array([p.end_point for p in paths])
    for i in range(len(paths)):
        d = np.linalg.norm(ends[i + 1 :] - ends[i], axis=1)
        hits = np.nonzero(d < _DUPLICATE_END_TOL)[0]
        if hits.size:
            j = int(hits[0]) + i + 1
            raise ConfigError(
                f"paths {i} and {j} are duplicates (end points coincide within "
                f"{_DUPLICATE_END_TOL}); check radii/start_angles for repeats"
            )
