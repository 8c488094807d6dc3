"""Rolling stack of sensor frames with fixed-size uniform downsampling.

The stack keeps the newest N_f frames of world-frame points.  Sampling
draws a fixed-size subset uniformly without replacement in a single pass
over the stored points, using skip-based reservoir sampling, so the
planner's input size is constant regardless of how much the sensor saw.
"""

from __future__ import annotations

import math
from collections import deque
from typing import Deque, Optional, Tuple

import numpy as np


class CloudStack:
    """FIFO of at most ``n_frames`` point arrays."""

    def __init__(self, n_frames: int = 5, rng_seed: Optional[int] = None):
        if n_frames < 1:
            raise ValueError(f"need at least one frame slot, got {n_frames}")
        self.n_frames = int(n_frames)
        self.rng_seed = rng_seed
        self._rng = np.random.default_rng(rng_seed)
        self._frames: Deque[Tuple[np.ndarray, np.ndarray]] = deque()
        self._total = 0

    def __len__(self) -> int:
        """Total stored point count; maintained incrementally, O(1)."""
        return self._total

    @property
    def frame_count(self) -> int:
        return len(self._frames)

    def push_frame(self, points: np.ndarray, pose: np.ndarray) -> None:
        """Append one frame, evicting the oldest beyond the frame budget.

        Empty frames are retained: an empty scan still means the sensor ran.
        """
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        pose = np.asarray(pose, dtype=float).reshape(3)
        self._frames.append((points, pose))
        self._total += points.shape[0]
        while len(self._frames) > self.n_frames:
            old, _ = self._frames.popleft()
            self._total -= old.shape[0]

    def sample_fixed(
        self, n_points: int, rng: Optional[np.random.Generator] = None
    ) -> np.ndarray:
        """Uniform without-replacement sample of at most ``n_points``.

        When the stack holds no more than ``n_points`` points they are all
        returned (stable frame order).  Otherwise a single skip-based pass
        selects exactly ``n_points`` of them; each stored point is touched
        at most once.
        """
        if n_points < 0:
            raise ValueError(f"sample size must be >= 0, got {n_points}")
        rng = rng if rng is not None else self._rng
        total = self._total
        if total == 0 or n_points == 0:
            return np.empty((0, 3))
        arrays = [pts for pts, _ in self._frames if pts.shape[0]]
        if total <= n_points:
            return np.concatenate(arrays, axis=0)

        picks = _reservoir_indices(total, n_points, rng)

        # Map flat indices into per-frame slices with one gather per frame.
        starts = np.cumsum([0] + [a.shape[0] for a in arrays])
        out = np.empty((n_points, 3))
        frame_of = np.searchsorted(starts, picks, side="right") - 1
        for f, arr in enumerate(arrays):
            sel = frame_of == f
            if np.any(sel):
                out[sel] = arr[picks[sel] - starts[f]]
        return out


def _unit_open(rng: np.random.Generator) -> float:
    """A draw from the open interval (0, 1); log never sees zero."""
    u = rng.random()
    return u if u > 0.0 else 5e-324


def _reservoir_indices(total: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Indices of a uniform k-subset of range(total), one skip-based pass.

    Classic reservoir scheme: seed the reservoir with the first k indices,
    then jump ahead by geometrically growing skips, replacing a random slot
    at each accepted index.  Expected O(k log(total/k)) random draws.
    """
    reservoir = np.arange(k, dtype=np.int64)
    w = math.exp(math.log(_unit_open(rng)) / k)
    i = k - 1
    while True:
        i += int(math.log(_unit_open(rng)) / math.log(1.0 - w)) + 1
        if i >= total:
            break
        reservoir[rng.integers(0, k)] = i
        w *= math.exp(math.log(_unit_open(rng)) / k)
    return reservoir
