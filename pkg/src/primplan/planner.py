"""Receding-horizon primitive selection in a velocity-aligned frame.

Each tick the planner rebuilds the frame whose x-axis points along the
current velocity, expresses the sampled obstacle cloud in that frame,
masks unsafe primitives through the voxel index, and picks the surviving
primitive whose end point makes the most progress toward the goal.  When
nothing survives it hands back a straight-line braking trajectory.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .collision import CollisionIndex, check
from .library import PrimitiveLibrary
from .topp import Bounds, Trajectory, _sample_times

# Below this speed the velocity direction is considered unreliable and the
# frame is aimed at the goal instead.
EPS_SPEED = 0.05

# Frames within this cone of vertical reuse the previous frame's y-axis to
# keep the lateral axes from spinning.
_VERTICAL_COS = math.cos(math.radians(1.0))


class NoHeadingError(RuntimeError):
    """Neither the velocity nor the goal direction defines a heading."""


@dataclass(frozen=True)
class VelocityFrame:
    """Right-handed frame with x along the reference direction."""

    rotation: np.ndarray  # (3, 3), columns are the frame axes in world
    translation: np.ndarray  # (3,)

    def to_world(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points) @ self.rotation.T + self.translation

    def to_local(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points) - self.translation) @ self.rotation


def _normalize(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def velocity_frame(
    v_current: np.ndarray,
    p_start: np.ndarray,
    p_goal: Optional[np.ndarray] = None,
    prev_frame: Optional[VelocityFrame] = None,
    eps_v: float = EPS_SPEED,
) -> VelocityFrame:
    """Frame with x along velocity, y horizontal, z completing the triad.

    Near-zero velocity falls back to a horizontal heading toward the goal;
    near-vertical velocity reuses the previous frame's y-axis so that the
    lateral axes stay continuous.
    """
    v = np.asarray(v_current, dtype=float).reshape(3)
    p = np.asarray(p_start, dtype=float).reshape(3)
    speed = float(np.linalg.norm(v))
    if speed < eps_v:
        if p_goal is None:
            raise NoHeadingError("velocity is near zero and no goal was given")
        heading = np.asarray(p_goal, dtype=float).reshape(3) - p
        heading[2] = 0.0
        norm = float(np.linalg.norm(heading))
        if norm < 1e-9:
            raise NoHeadingError(
                "velocity is near zero and the goal sits directly above/below"
            )
        x = heading / norm
    else:
        x = v / speed

    if abs(x[2]) > _VERTICAL_COS:
        prev_y = prev_frame.rotation[:, 1] if prev_frame is not None else np.array([0.0, 1.0, 0.0])
        y = _normalize(np.cross(x, prev_y))
    else:
        y = _normalize(np.cross(x, np.array([0.0, 0.0, -1.0])))
    z = np.cross(x, y)
    rotation = np.column_stack([x, y, z])
    return VelocityFrame(rotation=rotation, translation=p.copy())


@dataclass
class PlannerState:
    """Mutable planner inputs owned by the caller (usually the simulator)."""

    position: np.ndarray
    velocity: np.ndarray
    goal: np.ndarray
    bounds_lo: np.ndarray  # selection box: end points outside are penalized
    bounds_hi: np.ndarray
    lambda_goal: float = 1.0
    lambda_bound: float = 1.0
    bound_penalty: float = 100.0
    active: Optional[Trajectory] = None
    active_since: float = 0.0
    prev_frame: Optional[VelocityFrame] = None

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self.velocity = np.asarray(self.velocity, dtype=float).reshape(3)
        self.goal = np.asarray(self.goal, dtype=float).reshape(3)
        self.bounds_lo = np.asarray(self.bounds_lo, dtype=float).reshape(3)
        self.bounds_hi = np.asarray(self.bounds_hi, dtype=float).reshape(3)


def select_trajectory(
    safe_mask: np.ndarray,
    lib: PrimitiveLibrary,
    speed_index: int,
    frame: VelocityFrame,
    state: PlannerState,
) -> Optional[int]:
    """Cheapest safe path id in the slice, or None when nothing is safe.

    Cost is the change in goal distance from start to primitive end, plus a
    flat penalty for ending outside the selection box.  Ties break toward
    straighter paths, then smaller path id, so selection is deterministic.
    """
    members = lib.slice_paths(speed_index)
    safe = members[safe_mask[members]]
    if safe.size == 0:
        return None
    ends_world = lib.path_end_points()[safe] @ frame.rotation.T + frame.translation
    d_start = float(np.linalg.norm(state.position - state.goal))
    c_goal = np.linalg.norm(ends_world - state.goal, axis=1) - d_start
    outside = np.any(
        (ends_world < state.bounds_lo) | (ends_world > state.bounds_hi), axis=1
    )
    cost = state.lambda_goal * c_goal + state.lambda_bound * state.bound_penalty * outside
    order = np.lexsort((safe, lib.path_curvatures()[safe], cost))
    return int(safe[order[0]])


def emergency_stop(
    state: PlannerState, bounds: Bounds, sample_step: float = 0.01
) -> Trajectory:
    """Straight-line brake to rest along the current velocity direction.

    Deceleration is the largest magnitude that respects every componentwise
    acceleration bound regardless of direction.
    """
    v = state.velocity
    speed = float(np.linalg.norm(v))
    a_stop = float(np.minimum(bounds.a_max, -bounds.a_min).min())
    if speed < 1e-12:
        return Trajectory(
            path_id=-1,
            v_start=0.0,
            v_end=0.0,
            t=np.array([0.0]),
            position=state.position[None, :].copy(),
            velocity=np.zeros((1, 3)),
            acceleration=np.zeros((1, 3)),
            sample_step=sample_step,
        )
    direction = v / speed
    duration = speed / a_stop
    ts = _sample_times(duration, sample_step)
    sp = np.maximum(speed - a_stop * ts, 0.0)
    dist = speed * ts - 0.5 * a_stop * ts * ts
    return Trajectory(
        path_id=-1,
        v_start=speed,
        v_end=0.0,
        t=ts,
        position=state.position + direction * dist[:, None],
        velocity=direction * sp[:, None],
        acceleration=np.where(sp[:, None] > 0.0, -a_stop * direction, 0.0),
        sample_step=sample_step,
    )


@dataclass(frozen=True)
class PlanResult:
    """One replan outcome: the new active trajectory plus bookkeeping."""

    trajectory: Trajectory
    path_id: Optional[int]  # None when braking
    emergency: bool
    frame: Optional[VelocityFrame]
    check_us: float
    select_us: float
    n_safe: int


def _transform_trajectory(tr: Trajectory, frame: VelocityFrame) -> Trajectory:
    rot_t = frame.rotation.T
    return Trajectory(
        path_id=tr.path_id,
        v_start=tr.v_start,
        v_end=tr.v_end,
        t=tr.t,
        position=tr.position @ rot_t + frame.translation,
        velocity=tr.velocity @ rot_t,
        acceleration=tr.acceleration @ rot_t,
        sample_step=tr.sample_step,
    )


def _yaw_matrix(angle_deg: float) -> np.ndarray:
    a = math.radians(angle_deg)
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def replan(
    state: PlannerState,
    cloud_sample: np.ndarray,
    lib: PrimitiveLibrary,
    index: CollisionIndex,
    eps_v: float = EPS_SPEED,
    heading_offset_deg: float = 0.0,
) -> PlanResult:
    """One planning tick: frame, mask, select, transform to world.

    Never mutates ``state``; the caller decides when to adopt the result.
    The returned trajectory starts exactly at ``state.position`` with the
    velocity direction preserved and the magnitude snapped to the slice.
    ``heading_offset_deg`` yaws the frame, letting a stationary caller
    sweep the primitive fan across other headings when the default one is
    fully blocked.

    Points almost touching the current position are pushed radially out to
    just beyond the masking reach before the check: every candidate starts
    at the current position, so such a point would veto the entire fan at
    every heading and the vehicle could never move again.  Where the
    vehicle already is, the point is an unavoidable constraint; pushing it
    outward (rather than dropping it) keeps it blocking candidates that
    would steer back toward its surface.
    """
    frame = velocity_frame(state.velocity, state.position, state.goal, state.prev_frame, eps_v)
    if heading_offset_deg != 0.0:
        frame = VelocityFrame(
            rotation=_yaw_matrix(heading_offset_deg) @ frame.rotation,
            translation=frame.translation,
        )
    speed = float(np.linalg.norm(state.velocity))
    speed_index = lib.speed_index(speed)
    points = np.asarray(cloud_sample, dtype=float).reshape(-1, 3)
    if points.shape[0]:
        # A voxelized point can veto the origin knot from up to half a voxel
        # diagonal beyond the query distance; clamp to just past that reach.
        veto_reach = index.query_distance + (math.sqrt(3.0) / 2.0) * index.voxel_size
        rel = points - state.position
        dist = np.linalg.norm(rel, axis=1)
        near = dist < veto_reach
        if near.any():
            points = points.copy()
            safe_dist = np.maximum(dist[near], 1e-12)
            points[near] = state.position + rel[near] * (
                (veto_reach + 1e-3) / safe_dist
            )[:, None]
    points_local = frame.to_local(points)

    t0 = time.perf_counter_ns()
    mask = check(index, points_local, speed_index)
    t1 = time.perf_counter_ns()
    path_id = select_trajectory(mask, lib, speed_index, frame, state)
    t2 = time.perf_counter_ns()

    if path_id is None:
        trajectory = emergency_stop(state, lib.bounds, lib.sample_step)
        emergency = True
    else:
        trajectory = _transform_trajectory(lib.primitives[(path_id, speed_index)], frame)
        emergency = False
    return PlanResult(
        trajectory=trajectory,
        path_id=path_id,
        emergency=emergency,
        frame=frame,
        check_us=(t1 - t0) / 1000.0,
        select_us=(t2 - t1) / 1000.0,
        n_safe=int(mask.sum()),
    )
