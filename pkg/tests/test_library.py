"""Primitive library: slice structure, dynamic feasibility, serialization."""

import math

import numpy as np
import pytest

from primplan import (
    Bounds,
    ConfigError,
    build_library,
    build_path_library,
    deserialize_library,
    serialize_library,
)
from primplan.library import LibraryFormatError


def test_mini_library_structure(mini_lib):
    # 12 rolls of the r=6 arc plus the straight path; speed_step 1 -> 4 slices.
    assert len(mini_lib.paths) == 13
    assert mini_lib.n_slices == 4
    assert np.allclose(mini_lib.speed_grid, [0.0, 1.0, 2.0, 3.0])
    assert len(mini_lib.primitives) + len(mini_lib.infeasible) == 13 * 4
    for k in range(mini_lib.n_slices):
        assert mini_lib.slice_paths(k).size > 0


def test_primitive_boundary_speeds_match_slices(mini_lib):
    for (pid, k), tr in mini_lib.primitives.items():
        v0 = mini_lib.speed_grid[k]
        assert np.linalg.norm(tr.velocity[0]) == pytest.approx(v0, abs=1e-9)
        assert np.linalg.norm(tr.velocity[-1]) == pytest.approx(0.0, abs=1e-9)
        assert np.allclose(tr.position[0], 0.0, atol=1e-12)


def test_full_library_counts(lib73):
    assert len(lib73.paths) == 73
    assert lib73.n_slices == 31
    assert len(lib73.primitives) == 2263
    assert not lib73.infeasible


def test_speed_index_nearest_ties_down(lib73):
    assert lib73.speed_index(0.0) == 0
    assert lib73.speed_index(0.14) == 1
    assert lib73.speed_index(0.16) == 2
    # Exact midpoint rounds toward the lower slice.
    assert lib73.speed_index(0.15) == 1
    assert lib73.speed_index(2.9501) == 30
    assert lib73.speed_index(99.0) == 30
    assert lib73.speed_index(-1.0) == 0


def test_round_trip_bytes_identical(mini_lib):
    blob = serialize_library(mini_lib)
    clone = deserialize_library(blob)
    assert serialize_library(clone) == blob
    assert clone.content_hash() == mini_lib.content_hash()


def test_round_trip_preserves_knots(mini_lib):
    clone = deserialize_library(serialize_library(mini_lib))
    key = sorted(mini_lib.primitives)[0]
    a, b = mini_lib.primitives[key], clone.primitives[key]
    assert np.array_equal(a.t, b.t)
    assert np.array_equal(a.position, b.position)
    assert np.array_equal(a.velocity, b.velocity)
    assert np.array_equal(a.acceleration, b.acceleration)


def test_corrupt_header_rejected(mini_lib):
    blob = bytearray(serialize_library(mini_lib))
    blob[:8] = b"GARBAGE!"
    with pytest.raises(LibraryFormatError):
        deserialize_library(bytes(blob))


def test_truncated_file_rejected(mini_lib):
    blob = serialize_library(mini_lib)
    with pytest.raises(LibraryFormatError):
        deserialize_library(blob[: len(blob) // 2])


def test_tampered_knot_row_rejected(mini_lib):
    blob = serialize_library(mini_lib).decode()
    lines = blob.splitlines(keepends=True)
    for i, line in enumerate(lines):
        if line[0].isdigit() or line.startswith("-"):
            lines[i] = "not a number\n"
            break
    with pytest.raises(LibraryFormatError) as err:
        deserialize_library("".join(lines).encode())
    assert err.value.offset > 0


def test_infeasible_slice_build_rejected():
    # With a tiny acceleration bound nothing can brake from the top slice,
    # and the top slice ends up empty, which must fail the build.
    paths = build_path_library([math.inf], [0.0], 30.0, 2.0)
    with pytest.raises(ConfigError, match="no feasible"):
        build_library(paths, Bounds.symmetric(3.0, 0.5), speed_step=1.0)


def test_coverage_bounds_enclose_all_knots(lib73):
    lo, hi = lib73.coverage_lo, lib73.coverage_hi
    for tr in lib73.primitives.values():
        assert np.all(tr.position >= lo - 1e-12)
        assert np.all(tr.position <= hi + 1e-12)
