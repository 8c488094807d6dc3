"""Time-optimal path parameterization over a fixed stage grid.

The path parameter s in [0, 1] is discretized into N stages.  Decision
variables per stage are the squared path speed x = (ds/dt)^2 and the path
acceleration u = d2s/dt2, linked by x_{i+1} = x_i + 2*delta*u_i.  Velocity
and acceleration limits become halfplanes in (x, u), so each stage reduces
to a pair of tiny exact linear programs:

* a backward sweep propagates the interval of squared speeds from which the
  end speed is still reachable (one interval per stage),
* a forward sweep greedily maximizes the squared speed inside those
  intervals, which yields the time-optimal profile.

Stage times come from the average-speed rule, which is exact for a profile
with constant path acceleration per stage.  Output trajectories are sampled
from a clamped cubic spline through the stage positions; accelerations are
evaluated from the profile dynamics rather than the spline's second
derivative, which rings at switching points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from .paths import GeometricPath

# LP tolerances: absolute slack on halfplane satisfaction; interval widths
# below _POINT_TOL collapse to a point, below -_EMPTY_TOL count as empty.
_FEAS_TOL = 1e-10
_POINT_TOL = 1e-12
_EMPTY_TOL = 1e-10

# Internal bounding box for the incremental solve.  A solution this large
# means the user forgot a box constraint.
_BOX = 1e12
_UNBOUNDED_AT = 1e11

_BOX_ROWS = (
    (1.0, 0.0, _BOX),
    (-1.0, 0.0, _BOX),
    (0.0, 1.0, _BOX),
    (0.0, -1.0, _BOX),
)

# Profiles whose average stage speed drops below this stall (zero time scale).
_STALL_TOL = 1e-9

# Relative slack on the feasibility of sampled trajectories; the stage
# discretization satisfies constraints up to O(delta^2) between grid points.
FEASIBILITY_SLACK = 0.02


class UnboundedLPError(RuntimeError):
    """The LP had no finite optimum; some box constraint is missing."""


class InfeasibleProfileError(RuntimeError):
    """No speed profile satisfies the constraints.

    ``stage`` is the grid index at which propagation failed.
    """

    def __init__(self, stage: int, message: str):
        super().__init__(f"stage {stage}: {message}")
        self.stage = stage


class InfeasibleStartError(InfeasibleProfileError):
    """The requested start speed is outside the reachable set at stage 0."""

    def __init__(self, start_speed_sq: float, control_set: "ControlSet"):
        super().__init__(
            0,
            f"start squared speed {start_speed_sq:.6g} outside reachable "
            f"interval [{control_set.lo:.6g}, {control_set.hi:.6g}]",
        )
        self.start_speed_sq = start_speed_sq
        self.control_set = control_set


class StalledProfileError(RuntimeError):
    """The speed profile reached zero away from the endpoints."""


@dataclass(frozen=True)
class Bounds:
    """Componentwise velocity/acceleration limits plus a speed-norm cap."""

    v_min: np.ndarray
    v_max: np.ndarray
    a_min: np.ndarray
    a_max: np.ndarray
    v_norm: float

    def __post_init__(self):
        for name in ("v_min", "v_max", "a_min", "a_max"):
            arr = np.asarray(getattr(self, name), dtype=float).reshape(3)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "v_norm", float(self.v_norm))
        if not (np.all(self.v_min < 0) and np.all(self.v_max > 0)):
            raise ValueError("velocity bounds must straddle zero componentwise")
        if not (np.all(self.a_min < 0) and np.all(self.a_max > 0)):
            raise ValueError("acceleration bounds must straddle zero componentwise")
        if not self.v_norm > 0:
            raise ValueError(f"v_norm must be positive, got {self.v_norm}")

    @classmethod
    def symmetric(cls, v: float = 3.0, a: float = 6.0, v_norm: Optional[float] = None) -> "Bounds":
        vv = np.full(3, float(v))
        aa = np.full(3, float(a))
        return cls(-vv, vv, -aa, aa, v_norm if v_norm is not None else v)


@dataclass
class StageConstraints:
    """Halfplane data for one grid point.

    The acceleration limits take the form F @ (a*u + b_acc*x + c) <= g with
    F = [I; -I] and g = [a_max; -a_min].  ``sdot_sq_max`` is the componentwise
    velocity limit reduced to a cap on x; the norm limit is kept as its own
    row b_norm * x <= v_norm^2.
    """

    s: float
    a: np.ndarray  # dq/ds at this stage, (3,)
    b_acc: np.ndarray  # d2q/ds2 at this stage, (3,)
    b_norm: float  # squared norm of dq/ds
    c: np.ndarray  # constant term, zeros here
    F: np.ndarray  # (6, 3)
    g: np.ndarray  # (6,)
    sdot_sq_max: float
    delta: float
    v_norm_sq: float = 0.0
    _rows: Optional[List[Tuple[float, float, float]]] = None

    def rows(self) -> List[Tuple[float, float, float]]:
        """Stage halfplanes as (n_x, n_u, offset) triples, fixed order."""
        if self._rows is None:
            rows = [
                (-1.0, 0.0, 0.0),
                (1.0, 0.0, self.sdot_sq_max),
                (self.b_norm, 0.0, self.v_norm_sq),
            ]
            nx = self.F @ self.b_acc
            nu = self.F @ self.a
            d = self.g - self.F @ self.c
            rows.extend(zip(nx.tolist(), nu.tolist(), d.tolist()))
            self._rows = rows
        return self._rows


@dataclass(frozen=True)
class ControlSet:
    """Closed interval of squared path speeds reachable at one stage."""

    lo: float
    hi: float

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def is_point(self) -> bool:
        return self.width < _POINT_TOL

    def contains(self, x: float, tol: float = 1e-9) -> bool:
        return self.lo - tol <= x <= self.hi + tol


@dataclass(frozen=True)
class LPResult:
    status: str  # "optimal" or "infeasible"
    x: float
    u: float
    value: float

    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"


def _seidel(rows, cx: float, cu: float) -> Tuple[int, float, float]:
    """Incremental exact solve of max cx*x + cu*u s.t. n . z <= d.

    ``rows`` is a sequence of (n_x, n_u, d) triples, processed in order after
    an implicit bounding box.  Returns (status, x, u) with status 0 optimal,
    1 infeasible, 2 unbounded.  Deterministic: no randomized insertion.
    """
    x = _BOX if cx > 0.0 else (-_BOX if cx < 0.0 else 0.0)
    u = _BOX if cu > 0.0 else (-_BOX if cu < 0.0 else 0.0)
    allrows = list(_BOX_ROWS)
    allrows.extend(rows)
    n = len(allrows)
    for idx in range(4, n):
        nx, nu, d = allrows[idx]
        if nx * x + nu * u <= d + _FEAS_TOL:
            continue
        nn = nx * nx + nu * nu
        if nn == 0.0:
            return 1, 0.0, 0.0  # 0 <= d known false
        # Move onto the violated line n . z = d and optimize along it.
        scale = d / nn
        px = nx * scale
        pu = nu * scale
        dx = -nu
        du = nx
        lo = -math.inf
        hi = math.inf
        for j in range(idx):
            mx, mu, e = allrows[j]
            coef = mx * dx + mu * du
            rhs = e - (mx * px + mu * pu)
            if coef > 1e-14:
                t = rhs / coef
                if t < hi:
                    hi = t
            elif coef < -1e-14:
                t = rhs / coef
                if t > lo:
                    lo = t
            elif rhs < -_FEAS_TOL:
                return 1, 0.0, 0.0
        if hi - lo < -_EMPTY_TOL:
            return 1, 0.0, 0.0
        if hi - lo < _POINT_TOL:
            t = 0.5 * (lo + hi)
        else:
            slope = cx * dx + cu * du
            if slope > 1e-14:
                t = hi
            elif slope < -1e-14:
                t = lo
            else:
                # Objective flat along the line: stay near the projection
                # point so the bounding box never leaks into the result.
                t = lo if lo > 0.0 else (hi if hi < 0.0 else 0.0)
        x = px + dx * t
        u = pu + du * t
    if abs(x) >= _UNBOUNDED_AT or abs(u) >= _UNBOUNDED_AT:
        return 2, x, u
    return 0, x, u


def solve_lp_2d(objective: Sequence[float], halfplanes) -> LPResult:
    """Maximize objective . (x, u) subject to halfplanes n . (x, u) <= d.

    ``halfplanes`` is an iterable of ((n_x, n_u), d) pairs or flat
    (n_x, n_u, d) triples, processed in the given order.  Infeasible
    problems return a result with that status; an unbounded problem raises
    ``UnboundedLPError`` since every well-posed caller supplies a box.
    """
    cx, cu = float(objective[0]), float(objective[1])
    rows = []
    for hp in halfplanes:
        if len(hp) == 2:
            (nx, nu), d = hp
        else:
            nx, nu, d = hp
        rows.append((float(nx), float(nu), float(d)))
    status, x, u = _seidel(rows, cx, cu)
    if status == 2:
        raise UnboundedLPError(
            f"objective ({cx}, {cu}) unbounded over {len(rows)} halfplanes"
        )
    if status == 1:
        return LPResult(LPResult.INFEASIBLE, math.nan, math.nan, math.nan)
    return LPResult(LPResult.OPTIMAL, x, u, cx * x + cu * u)


def formulate_stages(
    path: GeometricPath, bounds: Bounds, n_stages: int
) -> List[StageConstraints]:
    """Evaluate constraint data on a uniform grid of n_stages + 1 points."""
    if n_stages < 2:
        raise ValueError(f"need at least 2 stages, got {n_stages}")
    grid = np.linspace(0.0, 1.0, n_stages + 1)
    _, qp, qpp = path.evaluate(grid)
    norms_sq = np.einsum("ij,ij->i", qp, qp)
    if np.min(norms_sq) < 1e-12:
        bad = int(np.argmin(norms_sq))
        raise ValueError(f"degenerate path derivative at stage {bad}")

    # Componentwise speed limit: moving forward along the path, component j
    # runs into v_max when dq_j/ds > 0 and into v_min when it is negative.
    with np.errstate(divide="ignore"):
        cap_hi = np.where(qp > 1e-12, bounds.v_max / np.where(qp > 1e-12, qp, 1.0), np.inf)
        cap_lo = np.where(qp < -1e-12, bounds.v_min / np.where(qp < -1e-12, qp, 1.0), np.inf)
    sdot_max = np.minimum(cap_hi, cap_lo).min(axis=1)
    sdot_sq_max = sdot_max * sdot_max

    F = np.vstack([np.eye(3), -np.eye(3)])
    g = np.concatenate([bounds.a_max, -bounds.a_min])
    c = np.zeros(3)
    delta = 1.0 / n_stages
    v_norm_sq = bounds.v_norm * bounds.v_norm

    stages = []
    for i in range(n_stages + 1):
        stages.append(
            StageConstraints(
                s=float(grid[i]),
                a=qp[i],
                b_acc=qpp[i],
                b_norm=float(norms_sq[i]),
                c=c,
                F=F,
                g=g,
                sdot_sq_max=float(sdot_sq_max[i]),
                delta=delta,
                v_norm_sq=v_norm_sq,
            )
        )
    return stages


def backward_pass(
    stages: Sequence[StageConstraints], end_speed_sq: float
) -> List[ControlSet]:
    """Propagate reachable squared-speed intervals from the path end.

    Raises ``InfeasibleProfileError`` with the failing stage index if any
    interval comes back empty.
    """
    if end_speed_sq < 0:
        raise ValueError(f"end squared speed must be >= 0, got {end_speed_sq}")
    n = len(stages) - 1
    last = stages[n]
    last_rows = last.rows()
    if end_speed_sq > last_rows[1][2] + 1e-9:
        raise InfeasibleProfileError(
            n, f"end squared speed {end_speed_sq:.6g} exceeds stage cap"
        )
    if last.b_norm * end_speed_sq > last_rows[2][2] + 1e-9:
        raise InfeasibleProfileError(
            n, f"end squared speed {end_speed_sq:.6g} violates the norm row"
        )

    control_sets: List[Optional[ControlSet]] = [None] * (n + 1)
    control_sets[n] = ControlSet(end_speed_sq, end_speed_sq)
    for i in range(n - 1, -1, -1):
        nxt = control_sets[i + 1]
        td = 2.0 * stages[i].delta
        rows = list(stages[i].rows())
        rows.append((1.0, td, nxt.hi))
        rows.append((-1.0, -td, -nxt.lo))
        status_hi, hi, _ = _seidel(rows, 1.0, 0.0)
        if status_hi == 2:
            raise UnboundedLPError(f"stage {i}: backward sweep unbounded")
        if status_hi == 1:
            raise InfeasibleProfileError(i, "empty reachable interval")
        status_lo, lo, _ = _seidel(rows, -1.0, 0.0)
        if status_lo != 0:
            raise InfeasibleProfileError(i, "empty reachable interval")
        width = hi - lo
        if width < -_EMPTY_TOL:
            raise InfeasibleProfileError(i, "empty reachable interval")
        if width < _POINT_TOL:
            lo = hi = 0.5 * (lo + hi)
        control_sets[i] = ControlSet(max(lo, 0.0), max(hi, 0.0))
    return control_sets


def forward_pass(
    stages: Sequence[StageConstraints],
    control_sets: Sequence[ControlSet],
    start_speed_sq: float,
) -> np.ndarray:
    """Greedy forward sweep: maximize each stage's squared speed.

    Returns the squared-speed profile (n_stages + 1 values).  The start
    value must lie in the stage-0 control set.
    """
    if start_speed_sq < 0:
        raise ValueError(f"start squared speed must be >= 0, got {start_speed_sq}")
    k0 = control_sets[0]
    if not k0.contains(start_speed_sq):
        raise InfeasibleStartError(start_speed_sq, k0)
    n = len(stages) - 1
    x = np.empty(n + 1)
    x[0] = min(max(start_speed_sq, k0.lo), k0.hi)
    xprev = x[0]
    for i in range(1, n + 1):
        ki = control_sets[i]
        td = 2.0 * stages[i - 1].delta
        rows = list(stages[i - 1].rows())
        rows.append((1.0, td, ki.hi))
        rows.append((-1.0, -td, -ki.lo))
        rows.append((1.0, 0.0, xprev))
        rows.append((-1.0, 0.0, -xprev))
        status, _, u = _seidel(rows, 1.0, td)
        if status == 2:
            raise UnboundedLPError(f"stage {i}: forward sweep unbounded")
        if status == 1:
            raise InfeasibleProfileError(i, "forward step infeasible")
        xi = xprev + td * u
        xi = min(max(xi, ki.lo), ki.hi)
        x[i] = xi
        xprev = xi
    return x


@dataclass
class Trajectory:
    """A time-parameterized path sampled at a fixed step.

    Knot k is (t[k], position[k], velocity[k], acceleration[k]); the final
    knot lands exactly on the duration.
    """

    path_id: int
    v_start: float
    v_end: float
    t: np.ndarray  # (n,)
    position: np.ndarray  # (n, 3)
    velocity: np.ndarray  # (n, 3)
    acceleration: np.ndarray  # (n, 3)
    sample_step: float

    @property
    def duration(self) -> float:
        return float(self.t[-1])

    @property
    def end_position(self) -> np.ndarray:
        return self.position[-1]

    def state_at(self, tau: float) -> Tuple[np.ndarray, np.ndarray]:
        """Position and velocity at time tau, clamped to [0, duration]."""
        t = self.t
        if tau <= t[0]:
            return self.position[0], self.velocity[0]
        if tau >= t[-1]:
            return self.position[-1], self.velocity[-1]
        i = int(np.searchsorted(t, tau, side="right")) - 1
        if tau - t[i] < 1e-9:
            return self.position[i], self.velocity[i]
        if t[i + 1] - tau < 1e-9:
            return self.position[i + 1], self.velocity[i + 1]
        w = (tau - t[i]) / (t[i + 1] - t[i])
        pos = self.position[i] * (1.0 - w) + self.position[i + 1] * w
        vel = self.velocity[i] * (1.0 - w) + self.velocity[i + 1] * w
        return pos, vel


def _sample_times(duration: float, step: float) -> np.ndarray:
    n_full = int(math.floor(duration / step + 1e-12))
    ts = np.arange(n_full + 1) * step
    if duration - ts[-1] > 1e-9:
        ts = np.append(ts, duration)
    else:
        ts[-1] = duration
    return ts


def _assemble_trajectory(
    path: GeometricPath,
    stages: Sequence[StageConstraints],
    x: np.ndarray,
    v_start: float,
    v_end: float,
    sample_step: float,
) -> Trajectory:
    n = len(x) - 1
    delta = stages[0].delta
    sdot = np.sqrt(np.maximum(x, 0.0))
    avg = 0.5 * (sdot[:-1] + sdot[1:])
    if np.min(avg) < _STALL_TOL:
        bad = int(np.argmin(avg))
        raise StalledProfileError(
            f"speed profile stalls near stage {bad}; no finite time scale"
        )
    t_knots = np.concatenate([[0.0], np.cumsum(delta / avg)])
    grid = np.linspace(0.0, 1.0, n + 1)
    q_grid, _, _ = path.evaluate(grid)

    tangent0 = stages[0].a / math.sqrt(stages[0].b_norm)
    tangent_n = stages[n].a / math.sqrt(stages[n].b_norm)
    spline = CubicSpline(
        t_knots, q_grid, bc_type=((1, v_start * tangent0), (1, v_end * tangent_n))
    )

    ts = _sample_times(float(t_knots[-1]), sample_step)
    pos = spline(ts)
    vel = spline(ts, 1)

    # Accelerations from the profile dynamics.  Within a stage the path
    # acceleration is constant, so s advances quadratically in local time.
    u_prof = np.diff(x) / (2.0 * delta)
    idx = np.clip(np.searchsorted(t_knots, ts, side="right") - 1, 0, n - 1)
    tau = ts - t_knots[idx]
    s_tau = np.clip(grid[idx] + sdot[idx] * tau + 0.5 * u_prof[idx] * tau * tau, 0.0, 1.0)
    sdot_tau = sdot[idx] + u_prof[idx] * tau
    _, qp_tau, qpp_tau = path.evaluate(s_tau)
    acc = qpp_tau * (sdot_tau * sdot_tau)[:, None] + qp_tau * u_prof[idx][:, None]

    return Trajectory(
        path_id=path.path_id,
        v_start=float(v_start),
        v_end=float(v_end),
        t=ts,
        position=pos,
        velocity=vel,
        acceleration=acc,
        sample_step=float(sample_step),
    )


def parameterize(
    path: GeometricPath,
    v_start: float,
    v_end: float,
    bounds: Bounds,
    n_stages: int = 1000,
    sample_step: float = 0.01,
) -> Trajectory:
    """Time-optimal trajectory along ``path`` between boundary speeds.

    Raises ``InfeasibleStartError`` when v_start cannot be slowed to v_end
    within the path, ``InfeasibleProfileError`` when the constraint set is
    empty at some stage, and ``StalledProfileError`` when the optimal
    profile has zero speed away from the endpoints.
    """
    if v_start < 0 or v_end < 0:
        raise ValueError("boundary speeds must be non-negative")
    if sample_step <= 0:
        raise ValueError(f"sample step must be positive, got {sample_step}")
    stages = formulate_stages(path, bounds, n_stages)
    end_sq = (v_end / math.sqrt(stages[-1].b_norm)) ** 2
    start_sq = (v_start / math.sqrt(stages[0].b_norm)) ** 2
    control_sets = backward_pass(stages, end_sq)
    x = forward_pass(stages, control_sets, start_sq)
    return _assemble_trajectory(path, stages, x, v_start, v_end, sample_step)
