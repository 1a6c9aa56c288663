import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_psd
from umppi.dynamics import step_array
from umppi.unscented import (
    FactorizationError,
    UtParams,
    matrix_sqrt,
    propagate_sigma,
    psd_cholesky,
    reconstruct_moments,
    sigma_points,
    unscented_transform,
    ut_weights,
)


def test_default_weights_by_hand():
    # alpha=1, k=0.5, n=3: lambda = 0.5, n + lambda = 3.5
    p = UtParams()
    assert p.lambda_sigma == pytest.approx(0.5)
    w = ut_weights(p)
    assert w.w_mean[0] == pytest.approx(0.5 / 3.5)
    assert w.w_cov[0] == pytest.approx(0.5 / 3.5 + 2.0)
    assert np.allclose(w.w_mean[1:], 1.0 / 7.0)
    assert np.allclose(w.w_cov[1:], 1.0 / 7.0)


@given(st.floats(0.05, 1.0), st.floats(0.0, 5.0), st.floats(0.0, 4.0))
def test_mean_weights_sum_to_one(alpha, k, beta):
    p = UtParams(alpha, k, beta)
    w = ut_weights(p)
    assert w.w_mean.sum() == pytest.approx(1.0, abs=1e-9)
    assert w.w_cov.sum() == pytest.approx(2.0 - alpha**2 + beta, abs=1e-9)


@pytest.mark.parametrize("kw", [{"alpha": 0.0}, {"alpha": 1.5}, {"k_sigma": -1.0}, {"n_x": 0}])
def test_invalid_params_rejected(kw):
    with pytest.raises(ValueError):
        UtParams(**kw)


def test_zero_covariance_gives_identical_points():
    s = sigma_points(np.array([1.0, 2.0, 0.3]), np.zeros((3, 3)), UtParams())
    assert np.array_equal(s.points, np.tile([1.0, 2.0, 0.3], (7, 1)))
    m, c = reconstruct_moments(s.points, ut_weights(UtParams()))
    assert np.array_equal(m, [1.0, 2.0, 0.3])
    assert np.array_equal(c, np.zeros((3, 3)))


def test_identity_covariance_offsets():
    s = sigma_points(np.zeros(3), np.eye(3), UtParams())
    r = np.sqrt(3.5)
    assert np.allclose(s.points[1:4], r * np.eye(3))
    assert np.allclose(s.points[4:], -r * np.eye(3))


@given(st.integers(0, 10_000))
def test_round_trip_identity_map(seed):
    rng = np.random.default_rng(seed)
    mean = rng.normal(size=3)
    cov = random_psd(rng)
    m, c = unscented_transform(lambda x: x, mean, cov, UtParams())
    assert np.allclose(m, mean, atol=1e-12)
    assert np.allclose(c, cov, atol=1e-10 * max(1.0, np.abs(cov).max()))


@given(st.integers(0, 10_000))
def test_affine_exactness(seed):
    rng = np.random.default_rng(seed)
    A, b = rng.normal(size=(3, 3)), rng.normal(size=3)
    mean, cov = rng.normal(size=3), random_psd(rng)
    m, c = unscented_transform(lambda x: x @ A.T + b, mean, cov, UtParams())
    assert np.allclose(m, A @ mean + b, atol=1e-9)
    assert np.allclose(c, A @ cov @ A.T, atol=1e-9)


@given(st.integers(0, 10_000))
def test_reconstructed_covariance_is_psd(seed):
    rng = np.random.default_rng(seed)
    s = sigma_points(rng.normal(size=3), random_psd(rng, scale=0.3), UtParams())
    pts = propagate_sigma(s.points, np.array([1.5, 0.7]), 0.1)
    _, c = reconstruct_moments(pts, ut_weights(UtParams()))
    assert np.allclose(c, c.T)
    assert np.linalg.eigvalsh(c).min() >= -1e-12


def test_propagation_uses_shared_control():
    s = sigma_points(np.zeros(3), 0.01 * np.eye(3), UtParams())
    w = np.array([1.0, 0.5])
    assert np.array_equal(propagate_sigma(s.points, w, 0.1), step_array(s.points, np.tile(w, (7, 1)), 0.1))


def test_psd_cholesky_singular_and_negative():
    a = np.diag([4.0, 0.0, 1.0])
    L = psd_cholesky(a)
    assert np.allclose(L @ L.T, a)
    with pytest.raises(FactorizationError):
        psd_cholesky(np.diag([1.0, -1.0, 1.0]))


def test_matrix_sqrt_jitter_then_failure():
    a = np.diag([1.0, -1e-9 * 5, 1.0])  # slightly indefinite, fixed by 1e-8 jitter
    L = matrix_sqrt(a)
    assert np.allclose(L @ L.T, a, atol=1e-7)
    with pytest.raises(FactorizationError):
        matrix_sqrt(np.diag([1.0, -1e-3, 1.0]))


@given(st.integers(0, 1000))
def test_low_rank_covariance_factorizes(seed):
    rng = np.random.default_rng(seed)
    cov = random_psd(rng, rank=1)
    L = matrix_sqrt(cov)
    assert np.allclose(L @ L.T, cov, atol=1e-7 * max(1, np.abs(cov).max()))
