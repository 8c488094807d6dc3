"""Sliding frame stack and fixed-size reservoir sampling."""

import numpy as np
import pytest
from scipy import stats

from primplan import CloudStack


def _frame(tag, n):
    pts = np.zeros((n, 3))
    pts[:, 0] = tag
    pts[:, 1] = np.arange(n)
    return pts


def test_fifo_eviction():
    stack = CloudStack(n_frames=3)
    for tag in range(5):
        stack.push_frame(_frame(tag, 4), np.zeros(3))
    assert stack.frame_count == 3
    assert len(stack) == 12
    out = stack.sample_fixed(100)
    # Frames 0 and 1 were evicted; 2, 3, 4 remain in order.
    assert sorted(set(out[:, 0])) == [2.0, 3.0, 4.0]


def test_empty_frames_count_toward_budget():
    stack = CloudStack(n_frames=2)
    stack.push_frame(_frame(0, 5), np.zeros(3))
    stack.push_frame(np.empty((0, 3)), np.zeros(3))
    stack.push_frame(np.empty((0, 3)), np.zeros(3))
    assert stack.frame_count == 2
    assert len(stack) == 0
    assert stack.sample_fixed(10).shape == (0, 3)


def test_under_budget_returns_everything():
    stack = CloudStack(n_frames=5)
    stack.push_frame(_frame(0, 700), np.zeros(3))
    stack.push_frame(_frame(1, 800), np.zeros(3))
    out = stack.sample_fixed(2000)
    assert out.shape == (1500, 3)
    assert np.array_equal(out[:700], _frame(0, 700))
    assert np.array_equal(out[700:], _frame(1, 800))


def test_over_budget_returns_exact_count_without_replacement():
    stack = CloudStack(n_frames=5)
    for tag in range(5):
        stack.push_frame(_frame(tag, 2000), np.zeros(3))
    out = stack.sample_fixed(2000, np.random.default_rng(0))
    assert out.shape == (2000, 3)
    seen = {(row[0], row[1]) for row in out}
    assert len(seen) == 2000  # no duplicates


def test_deterministic_given_seed():
    stack = CloudStack(n_frames=2)
    stack.push_frame(_frame(0, 5000), np.zeros(3))
    a = stack.sample_fixed(1000, np.random.default_rng(123))
    b = stack.sample_fixed(1000, np.random.default_rng(123))
    assert np.array_equal(a, b)


def test_sample_size_always_min_total_budget():
    stack = CloudStack(n_frames=3)
    rng = np.random.default_rng(1)
    totals = [0, 10, 50, 99, 100, 101, 500]
    for i, n in enumerate(np.diff([0] + totals)):
        stack.push_frame(_frame(i, int(n)), np.zeros(3))
        expected = min(len(stack), 100)
        assert stack.sample_fixed(100, rng).shape == (expected, 3)


def test_uniform_inclusion_chi_square():
    """Every stored point must be included with probability k/n = 0.2."""
    total, k, trials = 10000, 2000, 1000
    stack = CloudStack(n_frames=1)
    stack.push_frame(_frame(0, total), np.zeros(3))
    rng = np.random.default_rng(77)
    counts = np.zeros(total)
    for _ in range(trials):
        out = stack.sample_fixed(k, rng)
        counts[out[:, 1].astype(int)] += 1
    expected = trials * k / total
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    p = stats.chi2.sf(chi2, df=total - 1)
    assert p > 0.01
