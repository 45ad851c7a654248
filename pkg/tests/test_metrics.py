import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twf.metrics import align, dist, relative_error


def grid_dist(z, x, points=10_000):
    """Brute-force min over equispaced phases of ||e^{-i phi} z - x||."""
    phis = np.arange(points) * (2 * np.pi / points)
    rotated = np.exp(-1j * phis)[:, None] * z[None, :]
    return float(np.min(np.linalg.norm(rotated - x[None, :], axis=1)))


def test_dist_sign_ambiguity():
    x = np.array([1.0, -2.0, 3.0])
    assert dist(x, x) == 0
    assert dist(-x, x) == 0


def test_dist_worked_example():
    z = np.array([3.0, 6.0])
    x = np.array([2.7, 8.0])
    # ||z - x|| = sqrt(0.09 + 4), ||z + x|| = sqrt(32.49 + 196)
    assert dist(z, x) == pytest.approx(math.sqrt(4.09), rel=1e-14)
    assert dist(z, x) == pytest.approx(2.02237, abs=1e-5)
    assert np.linalg.norm(z + x) == pytest.approx(15.12, abs=0.01)


def test_relative_error_examples():
    x = np.array([2.7, 8.0])
    assert relative_error(x, x) == 0
    assert relative_error(np.zeros(2), x) == 1.0
    assert relative_error(np.array([3.0, 6.0]), x) == pytest.approx(0.23952, abs=1e-5)
    with pytest.raises(ValueError):
        relative_error(x, np.zeros(2))


def test_mismatch_rejected():
    with pytest.raises(ValueError):
        dist(np.ones(3), np.ones(2))
    with pytest.raises(ValueError):
        dist(np.ones(2, dtype=complex), np.ones(2))


def test_align_real_flip():
    x = np.array([1.0, 2.0])
    a = align(-x, x)
    assert np.array_equal(a.z_aligned, x)
    assert a.distance == 0 and a.phase == pytest.approx(np.pi)


def test_align_real_tie_keeps_sign():
    x = np.array([1.0, 0.0])
    z = np.array([0.0, 1.0])  # ||z - x|| == ||z + x||
    a = align(z, x)
    assert a.phase == 0.0 and np.array_equal(a.z_aligned, z)


def test_align_complex_pure_phase():
    x = np.array([1 + 2j, -0.5j, 3.0])
    a = align(1j * x, x)
    assert np.allclose(a.z_aligned, x, atol=1e-12)
    assert a.phase == pytest.approx(np.pi / 2)


def test_align_orthogonal_pair():
    x = np.array([1.0 + 0j, 0.0])
    z = np.array([0.0, 1.0 + 0j])
    a = align(z, x)
    assert a.phase == 0.0
    assert a.distance == pytest.approx(math.sqrt(2), rel=1e-15)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(1, 6), theta=st.floats(0, 2 * np.pi))
def test_complex_dist_properties(seed, n, theta):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    d = dist(z, x)
    assert d == pytest.approx(dist(x, z), abs=1e-12)
    assert d == pytest.approx(dist(np.exp(1j * theta) * z, x), abs=1e-10)
    assert d <= np.linalg.norm(z - x) + 1e-12
    a = align(z, x)
    assert np.linalg.norm(a.z_aligned - x) == pytest.approx(d, abs=1e-10)
    assert np.linalg.norm(a.z_aligned) == pytest.approx(np.linalg.norm(z), rel=1e-12)
    assert 0 <= a.phase < 2 * np.pi


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(1, 6))
def test_real_dist_properties(seed, n):
    rng = np.random.default_rng(seed)
    z, x = rng.standard_normal(n), rng.standard_normal(n)
    assert dist(z, x) == dist(-z, x) == dist(x, z)
    assert dist(z, x) <= np.linalg.norm(z - x)
    a = align(z, x)
    assert np.linalg.norm(a.z_aligned - x) == dist(z, x)


def test_closed_form_matches_phase_grid():
    rng = np.random.default_rng(2024)
    for _ in range(20):
        n = int(rng.integers(1, 8))
        z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        assert abs(dist(z, x) - grid_dist(z, x)) <= 1e-6 * max(1.0, np.linalg.norm(z))
