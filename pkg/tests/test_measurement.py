import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twf.measurement import (
    CDP_SYMBOLS,
    MeasurementEnsemble,
    dense_ensemble,
    sample_cdp_ensemble,
    sample_gaussian_ensemble,
)


def rand_vec(rng, n, complex_field):
    v = rng.standard_normal(n)
    if complex_field:
        v = v + 1j * rng.standard_normal(n)
    return v


def test_gaussian_real_shape_and_mean():
    e = sample_gaussian_ensemble(4, 8, "real", seed=1)
    assert e.rows.shape == (8, 4)
    assert abs(e.rows.mean()) <= 1.2


def test_gaussian_complex_second_moment():
    e = sample_gaussian_ensemble(2, 2, "complex", seed=7)
    assert e.is_complex
    second = np.mean(np.abs(e.rows) ** 2)
    assert np.isfinite(second) and second > 0


def test_complex_entries_have_unit_variance_on_average():
    e = sample_gaussian_ensemble(50, 400, "complex", seed=3)
    assert np.mean(np.abs(e.rows) ** 2) == pytest.approx(1.0, abs=0.03)
    assert np.var(e.rows.real) == pytest.approx(0.5, abs=0.02)


@pytest.mark.parametrize("field", ["real", "complex"])
def test_gaussian_is_deterministic(field):
    a = sample_gaussian_ensemble(5, 9, field, seed=11)
    b = sample_gaussian_ensemble(5, 9, field, seed=11)
    assert np.array_equal(a.rows, b.rows)


@pytest.mark.parametrize("n,m", [(0, 3), (3, 0)])
def test_gaussian_rejects_empty(n, m):
    with pytest.raises(ValueError):
        sample_gaussian_ensemble(n, m)


def test_cdp_support_and_size():
    e = sample_cdp_ensemble(4, 1, seed=3)
    assert e.masks.shape == (1, 4)
    assert np.all(np.isin(e.masks, CDP_SYMBOLS))
    assert sample_cdp_ensemble(8, 3, seed=9).m == 24


def test_cdp_rejects_empty():
    with pytest.raises(ValueError):
        sample_cdp_ensemble(0, 2)
    with pytest.raises(ValueError):
        sample_cdp_ensemble(3, 0)


def _binomial_two_sided_tail(N, p, half_width):
    """P(|K/N - p| > half_width) for K ~ Bin(N, p), by summing the pmf exactly."""
    total = 0.0
    for k in range(N + 1):
        if abs(k / N - p) > half_width:
            logpmf = (math.lgamma(N + 1) - math.lgamma(k + 1) - math.lgamma(N - k + 1)
                      + k * math.log(p) + (N - k) * math.log(1 - p))
            total += math.exp(logpmf)
    return total


def test_cdp_symbol_frequencies():
    # a correct sampler leaves the band with probability ~2.1e-10 per symbol
    assert _binomial_two_sided_tail(3072, 0.25, 0.05) < 1e-9
    e = sample_cdp_ensemble(256, 12, seed=0)
    draws = e.masks.ravel()
    for sym in CDP_SYMBOLS:
        assert abs(np.mean(draws == sym) - 0.25) <= 0.05


def test_cdp_deterministic():
    assert np.array_equal(sample_cdp_ensemble(16, 3, 5).masks, sample_cdp_ensemble(16, 3, 5).masks)


def test_identity_forward_and_adjoint():
    e = dense_ensemble(np.eye(3))
    z = np.array([1.0, -2.0, 0.5])
    assert np.array_equal(e.forward(z), z)
    assert np.array_equal(e.adjoint(z), z)
    assert np.array_equal(e.adjoint(np.zeros(3)), np.zeros(3))


def test_cdp_delta_gives_flat_spectrum():
    ones = MeasurementEnsemble("cdp", 6, 6, masks=np.ones((1, 6), dtype=complex))
    out = ones.forward(np.eye(6)[0].astype(complex))
    assert np.allclose(out, np.ones(6))


def test_dense_forward_matches_row_loop():
    rng = np.random.default_rng(0)
    rows = rng.standard_normal((3, 2))
    e = dense_ensemble(rows)
    z = np.array([1.0, 1.0])
    naive = np.array([sum(rows[i, j] * z[j] for j in range(2)) for i in range(3)])
    assert np.allclose(e.forward(z), naive, rtol=0, atol=1e-14)
    assert np.allclose(e.forward(z), rows.sum(axis=1))


def test_cdp_forward_matches_materialized_rows():
    e = sample_cdp_ensemble(5, 3, seed=2)
    rng = np.random.default_rng(1)
    z = rand_vec(rng, 5, True)
    assert np.allclose(e.forward(z), e.dense() @ z, atol=1e-12)
    v = rand_vec(rng, 15, True)
    assert np.allclose(e.adjoint(v), e.dense().conj().T @ v, atol=1e-12)


def test_cdp_adjoint_identity_100_pairs():
    e = sample_cdp_ensemble(4, 2, seed=5)
    rng = np.random.default_rng(99)
    for _ in range(100):
        z = rand_vec(rng, 4, True)
        v = rand_vec(rng, 8, True)
        lhs = np.vdot(v, e.forward(z))  # <Az, v> with the same conjugation on both sides
        rhs = np.vdot(e.adjoint(v), z)
        assert abs(lhs - rhs) <= 1e-10 * np.linalg.norm(z) * np.linalg.norm(v)


def test_intensities_examples():
    assert np.array_equal(dense_ensemble(np.eye(2)).intensities(np.array([3.0, -4.0])), [9.0, 16.0])
    assert dense_ensemble([[1.0, 2.0]]).intensities(np.array([2.0, 1.0]))[0] == 16.0
    e = sample_gaussian_ensemble(3, 5, seed=0)
    assert np.array_equal(e.intensities(np.zeros(3)), np.zeros(5))


def test_row_norms():
    assert np.array_equal(dense_ensemble(np.eye(3)).row_norms(), np.ones(3))
    assert np.array_equal(sample_cdp_ensemble(9, 2, seed=1).row_norms(), np.full(18, 3.0))
    assert np.allclose(dense_ensemble([[3.0, 4.0], [0.0, 1.0]]).row_norms(), [5.0, 1.0])


def test_cdp_row_norms_match_materialized_rows():
    e = sample_cdp_ensemble(7, 2, seed=4)
    assert np.allclose(np.linalg.norm(e.dense(), axis=1), e.row_norms(), rtol=1e-14)


def test_dimension_mismatch():
    e = sample_gaussian_ensemble(3, 4)
    with pytest.raises(ValueError):
        e.forward(np.ones(4))
    with pytest.raises(ValueError):
        e.adjoint(np.ones(3))
    c = sample_cdp_ensemble(3, 2)
    with pytest.raises(ValueError):
        c.forward(np.ones(4))


def test_ensemble_is_read_only():
    e = sample_gaussian_ensemble(3, 4)
    with pytest.raises(ValueError):
        e.rows[0, 0] = 1.0


def test_bad_mask_symbols_rejected():
    with pytest.raises(ValueError):
        MeasurementEnsemble("cdp", 2, 2, masks=np.array([[1.0, 0.5]], dtype=complex))


ensembles = st.sampled_from([
    ("gaussian-real", 6, 20),
    ("gaussian-complex", 5, 17),
    ("cdp", 8, 3),
])


def build(kind, n, k, seed):
    if kind == "cdp":
        return sample_cdp_ensemble(n, k, seed)
    return sample_gaussian_ensemble(n, k, "complex" if kind == "gaussian-complex" else "real", seed)


@settings(max_examples=40, deadline=None)
@given(spec=ensembles, seed=st.integers(0, 2**32 - 1), alpha=st.floats(-3, 3))
def test_operator_properties(spec, seed, alpha):
    e = build(*spec, seed)
    rng = np.random.default_rng(seed)
    cplx = e.is_complex
    z1, z2 = rand_vec(rng, e.n, cplx), rand_vec(rng, e.n, cplx)
    v = rand_vec(rng, e.m, cplx)
    # adjoint identity
    assert abs(np.vdot(v, e.forward(z1)) - np.vdot(e.adjoint(v), z1)) <= (
        1e-10 * np.linalg.norm(z1) * np.linalg.norm(v)
    )
    # linearity
    lhs = e.forward(alpha * z1 + z2)
    rhs = alpha * e.forward(z1) + e.forward(z2)
    assert np.linalg.norm(lhs - rhs) <= 1e-12 * (abs(alpha) * np.linalg.norm(e.forward(z1)) + np.linalg.norm(e.forward(z2))) + 1e-300
    # intensities are |forward|^2
    assert np.allclose(e.intensities(z1), np.abs(e.forward(z1)) ** 2, rtol=1e-12, atol=0)
    # determinism
    again = build(*spec, seed)
    assert np.array_equal(again.forward(z1), e.forward(z1))


def test_cdp_row_norm_exact_for_many_sizes():
    for n in (1, 2, 9, 16, 31):
        assert np.all(sample_cdp_ensemble(n, 2, 0).row_norms() == math.sqrt(n))
