"""Shared fixtures: preset libraries and indexes, cached on disk.

Building a full preset library takes tens of seconds, so artifacts are
kept under ``tests/.cache`` between runs.  Every build is deterministic,
and an index refuses to bind to a library with a different content hash,
so a stale or corrupt cache entry is rebuilt rather than trusted.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from primplan import (
    Bounds,
    build_index,
    build_library,
    build_path_library,
    load_index,
    load_library,
    resolve_config,
    save_index,
    save_library,
)
from primplan.collision import LibraryMismatchError
from primplan.errors import FormatError

CACHE = Path(__file__).parent / ".cache"


def _preset_library(name: str):
    CACHE.mkdir(exist_ok=True)
    path = CACHE / f"{name}.pplib"
    if path.exists():
        try:
            return load_library(path)
        except (FormatError, ValueError):
            path.unlink()
    lc = resolve_config(f"preset:{name}").library
    paths = build_path_library(
        list(lc.radii), list(lc.start_angles_deg), lc.rotation_step_deg, lc.length_m
    )
    lib = build_library(
        paths,
        lc.bounds(),
        speed_step=lc.speed_step,
        sample_step=lc.sample_step,
        n_stages=lc.n_stages,
        config_echo=lc.echo(),
    )
    save_library(lib, path)
    return lib


def _preset_index(name: str, lib):
    path = CACHE / f"{name}.ppidx"
    if path.exists():
        try:
            return load_index(path, lib)
        except (FormatError, LibraryMismatchError, ValueError):
            path.unlink()
    index = build_index(lib)
    save_index(index, path)
    index.bind(lib)
    return index


@pytest.fixture(scope="session")
def lib25():
    return _preset_library("low")


@pytest.fixture(scope="session")
def lib37():
    return _preset_library("medium")


@pytest.fixture(scope="session")
def lib73():
    return _preset_library("high")


@pytest.fixture(scope="session")
def idx25(lib25):
    return _preset_index("low", lib25)


@pytest.fixture(scope="session")
def idx37(lib37):
    return _preset_index("medium", lib37)


@pytest.fixture(scope="session")
def idx73(lib73):
    return _preset_index("high", lib73)


@pytest.fixture(scope="session")
def mini_lib():
    """Small library for unit tests: one curved radius plus the straight
    path, coarse speed grid (4 slices)."""
    CACHE.mkdir(exist_ok=True)
    path = CACHE / "mini.pplib"
    if path.exists():
        try:
            return load_library(path)
        except (FormatError, ValueError):
            path.unlink()
    paths = build_path_library([6.0, math.inf], [0.0, 0.0], 30.0, 5.0)
    lib = build_library(paths, Bounds.symmetric(3.0, 6.0), speed_step=1.0)
    save_library(lib, path)
    return lib


@pytest.fixture(scope="session")
def mini_idx(mini_lib):
    return _preset_index("mini", mini_lib)


@pytest.fixture(scope="session")
def default_bounds():
    return Bounds.symmetric(3.0, 6.0)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
