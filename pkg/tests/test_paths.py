"""Arc geometry and rosette generation."""

import math

import numpy as np
import pytest

from primplan import ArcSpec, ConfigError, build_path_library, generate_arc


def test_straight_segment_end_point_and_derivative():
    path = generate_arc(ArcSpec(math.inf, 5.0, 0.0, 30.0))
    assert np.allclose(path.q[-1], [5.0, 0.0, 0.0])
    assert np.allclose(path.q_prime, np.tile([5.0, 0.0, 0.0], (len(path.s), 1)))
    assert np.allclose(path.q_second, 0.0)


def test_arc_end_point_closed_form():
    # r*sin(L/r), r*(1-cos(L/r)) for the in-plane arc.
    path = generate_arc(ArcSpec(6.0, 5.0, 0.0, 30.0))
    expected = np.array(
        [6.0 * math.sin(5.0 / 6.0), 6.0 * (1.0 - math.cos(5.0 / 6.0)), 0.0]
    )
    assert np.allclose(path.q[-1], expected, atol=1e-12)
    assert np.allclose(path.q[-1][:2], [4.4406, 1.9657], atol=5e-4)


def test_roll_by_180_negates_y_and_z():
    up = generate_arc(ArcSpec(6.0, 5.0, 0.0, 30.0), roll=0.0)
    down = generate_arc(ArcSpec(6.0, 5.0, 0.0, 30.0), roll=180.0)
    flipped = up.q * np.array([1.0, -1.0, -1.0])
    assert np.allclose(down.q, flipped, atol=1e-12)


def test_start_angle_composes_with_roll():
    a = generate_arc(ArcSpec(6.0, 5.0, -20.0, 30.0), roll=50.0)
    b = generate_arc(ArcSpec(6.0, 5.0, 30.0, 30.0), roll=0.0)
    assert np.allclose(a.q, b.q, atol=1e-12)


def test_constant_parameter_speed():
    rng = np.random.default_rng(7)
    for _ in range(10):
        radius = float(rng.uniform(2.0, 80.0))
        roll = float(rng.uniform(0.0, 360.0))
        path = generate_arc(ArcSpec(radius, 5.0, 0.0, 30.0), roll=roll)
        norms = np.linalg.norm(path.q_prime, axis=1)
        assert np.allclose(norms, norms[0], rtol=1e-9)
        # Arc length equals the requested length.
        assert norms[0] == pytest.approx(5.0, rel=1e-9)


def test_all_points_forward_and_within_length_sphere():
    paths = build_path_library(
        [6.0, 8.0, 12.0, 20.0, 36.0, 78.0, math.inf],
        [0.0, -10.0, -20.0, 0.0, -10.0, -20.0, 0.0],
        30.0,
        5.0,
    )
    for path in paths:
        assert path.q[:, 0].min() >= -1e-9
        assert np.linalg.norm(path.q, axis=1).max() <= 5.0 + 1e-9


@pytest.mark.parametrize(
    "radii,angles,expected",
    [
        (
            [8.0, 20.0, math.inf],
            [0.0, 0.0, 0.0],
            25,
        ),
        (
            [6.0, 12.0, 36.0, math.inf],
            [0.0, 0.0, 0.0, 0.0],
            37,
        ),
        (
            [6.0, 8.0, 12.0, 20.0, 36.0, 78.0, math.inf],
            [0.0, -10.0, -20.0, 0.0, -10.0, -20.0, 0.0],
            73,
        ),
    ],
)
def test_rosette_counts(radii, angles, expected):
    paths = build_path_library(radii, angles, 30.0, 5.0)
    assert len(paths) == expected
    finite = sum(1 for r in radii if math.isfinite(r))
    assert expected == finite * 12 + 1
    assert [p.path_id for p in paths] == list(range(expected))


def test_short_rosette_count_formula():
    paths = build_path_library(
        [2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 20.0, 36.0, 78.0, math.inf],
        [0.0] * 10,
        30.0,
        3.0,
    )
    assert len(paths) == 109


def test_duplicate_radius_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        build_path_library([6.0, 6.0], [0.0, 0.0], 30.0, 5.0)


def test_mismatched_angle_list_rejected():
    with pytest.raises(ConfigError, match="equal length"):
        build_path_library([6.0, math.inf], [0.0], 30.0, 5.0)


def test_too_few_samples_rejected():
    with pytest.raises(ValueError, match="at least 2"):
        generate_arc(ArcSpec(6.0, 5.0, 0.0, 30.0), n_samples=1)


def test_straight_path_is_roll_invariant_single_copy():
    paths = build_path_library([math.inf], [0.0], 30.0, 5.0)
    assert len(paths) == 1
