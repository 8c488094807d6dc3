"""Acceptance gate: each numbered requirement prints one PASS/FAIL line.

The benchmark grid (20 seeds x 3 libraries x 3 densities) runs once at
module scope and backs the success-rate, flight-time, and smoothness
criteria together.
"""

import math
import time

import numpy as np
import pytest
import scipy.stats

from primplan import (
    Bounds,
    backward_pass,
    build_path_library,
    check,
    deserialize_index,
    deserialize_library,
    formulate_stages,
    forward_pass,
    generate_arc,
    generate_map,
    parameterize,
    run_grid,
    sense,
    serialize_index,
    serialize_library,
    velocity_frame,
)
from primplan.cloud import _reservoir_indices
from primplan.config import resolve_config
from primplan.paths import ArcSpec


@pytest.fixture
def report(capsys):
    """One visible PASS/FAIL line per criterion, then the assertion."""

    def _report(num: int, ok: bool, detail: str) -> None:
        line = f"[criterion {num:>2}] {'PASS' if ok else 'FAIL'} - {detail}"
        with capsys.disabled():
            print(f"\n{line}", flush=True)
        assert ok, line

    return _report


# ---------------------------------------------------------------------------
# 1. Path-library sizes per preset


def test_criterion_01_path_counts(report):
    expected = {"low": 25, "medium": 37, "high": 73, "realworld": 109}
    t0 = time.perf_counter()
    counts = {}
    for name in expected:
        lc = resolve_config(f"preset:{name}").library
        paths = build_path_library(
            lc.radii, lc.start_angles_deg, lc.rotation_step_deg, lc.length_m
        )
        counts[name] = len(paths)
    dt = time.perf_counter() - t0
    ok = counts == expected and dt < 1.0
    report(1, ok, f"path counts {counts} expected {expected} in {dt:.3f}s (<1s)")


# ---------------------------------------------------------------------------
# 2. Time parameterization against the straight-line closed form


def _bang_bang_time(length, v0, v_cap, accel):
    v_peak = math.sqrt((2.0 * accel * accel * length + accel * v0 * v0) / (2.0 * accel))
    if v_peak <= v_cap:
        return (v_peak - v0) / accel + v_peak / accel
    d_up = (v_cap * v_cap - v0 * v0) / (2.0 * accel)
    d_down = v_cap * v_cap / (2.0 * accel)
    return (v_cap - v0) / accel + v_cap / accel + (length - d_up - d_down) / v_cap


def test_criterion_02_straight_line_durations(report):
    rng = np.random.default_rng(20240815)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(20):
        length = float(rng.uniform(1.0, 10.0))
        accel = float(rng.uniform(2.0, 9.0))
        v_cap = float(rng.uniform(1.0, 4.0))
        v0 = float(rng.uniform(0.0, min(v_cap, 0.95 * math.sqrt(2.0 * accel * length))))
        path = generate_arc(ArcSpec(math.inf, length, 0.0, 30.0))
        tr = parameterize(path, v0, 0.0, Bounds.symmetric(v_cap, accel), n_stages=1000)
        analytic = _bang_bang_time(length, v0, v_cap, accel)
        worst = max(worst, abs(tr.duration - analytic) / analytic)
    dt = time.perf_counter() - t0
    ok = worst <= 0.02 and dt < 10.0
    report(2, ok, f"20 instances, worst closed-form error {worst * 100:.3f}% "
                   f"(<=2%) in {dt:.2f}s (<10s)")


# ---------------------------------------------------------------------------
# 3. Dynamic feasibility of every stored primitive


def test_criterion_03_dynamic_feasibility(report, lib73):
    t0 = time.perf_counter()
    v_worst = 0.0
    a_worst = 0.0
    for tr in lib73.primitives.values():
        v_worst = max(v_worst, float(np.linalg.norm(tr.velocity, axis=1).max()))
        a_worst = max(a_worst, float(np.abs(tr.acceleration).max()))
    dt = time.perf_counter() - t0
    ok = v_worst <= 3.0 * 1.02 and a_worst <= 6.0 * 1.02 and dt < 30.0
    report(3, ok, f"{len(lib73.primitives)} primitives: max speed "
                   f"{v_worst:.4f} (<=3.06), max |accel| {a_worst:.4f} "
                   f"(<=6.12) in {dt:.2f}s (<30s)")


# ---------------------------------------------------------------------------
# 4. Reachability passes: membership and monotonicity


def test_criterion_04_control_set_properties(report):
    rng = np.random.default_rng(77)
    member_ok = True
    superset_ok = True
    for _ in range(5):
        radius = float(rng.uniform(4.0, 80.0))
        roll = float(rng.uniform(0.0, 360.0))
        path = generate_arc(ArcSpec(radius, 5.0, 0.0, 30.0), roll=roll)
        stages = formulate_stages(path, Bounds.symmetric(3.0, 6.0), 1000)
        sets = backward_pass(stages, 0.0)
        x = forward_pass(stages, sets, sets[0].hi)
        lo = np.array([c.lo for c in sets])
        hi = np.array([c.hi for c in sets])
        member_ok &= bool(np.all(x >= lo) and np.all(x <= hi))

        loose = backward_pass(
            formulate_stages(path, Bounds.symmetric(4.0, 8.0), 1000), 0.0
        )
        superset_ok &= all(
            b.lo <= a.lo + 1e-12 and b.hi >= a.hi - 1e-12
            for a, b in zip(sets, loose)
        )
    ok = member_ok and superset_ok
    report(4, ok, f"5 random paths: forward speeds inside control sets "
                   f"(exact)={member_ok}, loosened bounds give supersets="
                   f"{superset_ok}")


# ---------------------------------------------------------------------------
# 5. Collision masks against a per-point membership oracle


def _oracle_mask(lib, index, points, k):
    keys = sorted(lib.primitives)
    blocked = set()
    for p in points:
        cell = np.floor((p - index.origin) / index.voxel_size).astype(np.int64)
        if np.any(cell < 0) or np.any(cell >= index.dims):
            continue
        flat = (cell[0] * index.dims[1] + cell[1]) * index.dims[2] + cell[2]
        for dense_id in index.ids[index.offsets[flat] : index.offsets[flat + 1]]:
            pid, slice_k = keys[dense_id]
            if slice_k == k:
                blocked.add(pid)
    expected = np.zeros(len(lib.paths), dtype=bool)
    for pid in lib.slice_paths(k):
        expected[pid] = (pid, k) in lib.primitives and pid not in blocked
    return expected


def test_criterion_05_mask_oracle_equivalence(report, lib73, idx73):
    rng = np.random.default_rng(550)
    matched = 0
    n_scenes = 100
    for _ in range(n_scenes):
        world = generate_map(
            int(rng.integers(0, 100_000)),
            int(rng.integers(20, 200)),
            r_obs_mean=float(rng.uniform(0.05, 0.6)),
        )
        pos = np.array([rng.uniform(-12, 12), rng.uniform(-9, 9), rng.uniform(0.6, 1.4)])
        speed = float(rng.uniform(0.0, 3.0))
        ang = float(rng.uniform(0.0, 2.0 * math.pi))
        vel = speed * np.array([math.cos(ang), math.sin(ang), 0.0])
        heading = vel[:2] if speed > 0.05 else np.array([1.0, 0.0])
        pts = sense(world, pos, heading)
        frame = velocity_frame(vel, pos, p_goal=pos + np.array([10.0, 0.0, 0.0]))
        local = frame.to_local(pts) if pts.shape[0] else np.empty((0, 3))
        k = lib73.speed_index(speed)
        mask = check(idx73, local, k)
        if np.array_equal(mask, _oracle_mask(lib73, idx73, local, k)):
            matched += 1
    ok = matched == n_scenes
    report(5, ok, f"{matched}/{n_scenes} random (map, pose) scenes match the "
                   f"per-point voxel-membership oracle exactly")


# ---------------------------------------------------------------------------
# 6. Deterministic-time property of the precomputed index


def test_criterion_06_deterministic_time(report, lib25, idx25, lib37, idx37, lib73, idx73):
    rng = np.random.default_rng(66)
    triples = [(lib25, idx25), (lib37, idx37), (lib73, idx73)]

    # Cloud inside every grid: the lookup count must equal the point count
    # for all three library sizes.
    lo = np.max([i.origin for _, i in triples], axis=0) + 1e-6
    hi = np.min([i.origin + i.dims * i.voxel_size for _, i in triples], axis=0) - 1e-6
    inner = rng.uniform(lo, hi, size=(2000, 3))
    counts_match = True
    for lib, idx in triples:
        stats = {}
        check(idx, inner, lib.speed_index(3.0), stats_out=stats)
        counts_match &= stats["voxel_lookups"] == 2000 == stats["in_grid_points"]

    # Cloud spilling outside: lookups must equal the per-index in-grid count.
    outer = rng.uniform(lo - 2.0, hi + 2.0, size=(2000, 3))
    for lib, idx in triples:
        inside = np.all(
            (outer >= idx.origin) & (outer < idx.origin + idx.dims * idx.voxel_size),
            axis=1,
        )
        stats = {}
        check(idx, outer, lib.speed_index(3.0), stats_out=stats)
        counts_match &= stats["voxel_lookups"] == int(inside.sum())

    # Median wall-clock time is flat in library size.
    medians = []
    for lib, idx in triples:
        k = lib.speed_index(3.0)
        for _ in range(20):  # warm-up
            check(idx, inner, k)
        samples = []
        for _ in range(300):
            t0 = time.perf_counter_ns()
            check(idx, inner, k)
            samples.append(time.perf_counter_ns() - t0)
        medians.append(np.median(samples) / 1e6)
    spread = (max(medians) - min(medians)) / min(medians)
    ok = counts_match and spread <= 0.25
    report(6, ok, f"lookups == in-grid points for 25/37/73 paths: "
                   f"{counts_match}; median check times "
                   f"{[f'{m:.3f}ms' for m in medians]} spread "
                   f"{spread * 100:.1f}% (<=25%)")


# ---------------------------------------------------------------------------
# Shared benchmark grid for the episode-level criteria


@pytest.fixture(scope="module")
def grid(lib25, idx25, lib37, idx37, lib73, idx73):
    report = run_grid(
        [(lib25, idx25), (lib37, idx37), (lib73, idx73)],
        n_obs_list=[100, 150, 200],
        seeds=range(20),
        workers=1,
    )
    return report


def _cell_rate(report, n_paths, n_obs):
    group = [r for r in report.results if r.n_paths == n_paths and r.n_obs == n_obs]
    return float(np.mean([r.success for r in group]))


def test_criterion_07_success_rates(report, grid):
    rate_73_200 = _cell_rate(grid, 73, 200)
    monotone = True
    cells = {}
    for n_obs in (100, 150, 200):
        rates = [_cell_rate(grid, n, n_obs) for n in (25, 37, 73)]
        cells[n_obs] = [f"{r:.0%}" for r in rates]
        monotone &= rates[1] >= rates[0] - 0.15 and rates[2] >= rates[1] - 0.15
    ok = rate_73_200 >= 0.95 and monotone
    report(7, ok, f"73-path @200 obstacles {rate_73_200:.0%} (>=95%); "
                   f"rates by density (25/37/73 paths) {cells}, "
                   f"non-decreasing within 15pp: {monotone}")


def test_criterion_08_flight_time_and_distance(report, grid):
    dense = [r for r in grid.results
             if r.n_paths == 73 and r.n_obs == 200 and r.seed < 10]
    succ = [r for r in dense if r.success]
    t_mean = float(np.mean([r.t_total for r in succ]))
    d_mean = float(np.mean([r.d_total for r in succ]))
    t_ok = abs(t_mean - 13.479) <= 0.20 * 13.479
    d_ok = abs(d_mean - 41.336) <= 0.15 * 41.336
    ok = len(succ) == len(dense) == 10 and t_ok and d_ok
    report(8, ok, f"10 dense seeds ({len(succ)} succeeded): mean flight time "
                   f"{t_mean:.3f}s vs 13.479s +-20% [{0.8 * 13.479:.2f}, "
                   f"{1.2 * 13.479:.2f}], mean distance {d_mean:.3f}m vs "
                   f"41.336m +-15% [{0.85 * 41.336:.2f}, {1.15 * 41.336:.2f}]")


def test_criterion_09_replan_smoothness(report, grid):
    dense = [r for r in grid.results if r.n_paths == 73 and r.n_obs == 200]
    pos_jump = max(r.max_pos_jump for r in dense)
    dir_jump = max(r.max_dir_jump_rad for r in dense)
    ok = pos_jump == 0.0 and dir_jump <= 1e-6
    report(9, ok, f"over {len(dense)} dense episodes: max position jump "
                   f"{pos_jump} (== 0), max direction jump {dir_jump:.2e} rad "
                   f"(<= 1e-6)")


# ---------------------------------------------------------------------------
# 10. Serialization round-trips and sampler uniformity


def test_criterion_10_roundtrip_and_sampler(report, lib37, idx37):
    b1 = serialize_library(lib37)
    b2 = serialize_library(deserialize_library(b1))
    lib_ok = b1 == b2
    i1 = serialize_index(idx37)
    i2 = serialize_index(deserialize_index(i1))
    idx_ok = i1 == i2

    rng = np.random.default_rng(1010)
    total, k, trials = 400, 80, 1000
    hits = np.zeros(total)
    for _ in range(trials):
        hits[_reservoir_indices(total, k, rng)] += 1
    expected = trials * k / total
    chi2 = float(((hits - expected) ** 2 / expected).sum())
    p = float(scipy.stats.chi2.sf(chi2, total - 1))
    ok = lib_ok and idx_ok and p > 0.01
    report(10, ok, f"library bytes round-trip={lib_ok}, index bytes "
                    f"round-trip={idx_ok}; sampler chi-square p={p:.4f} "
                    f"(>0.01, {trials} trials)")
