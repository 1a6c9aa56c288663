"""Unscented transform: sigma points, weights and moment reconstruction."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dynamics import step_array

PSD_TOL = 1e-9
JITTER_START = 1e-12
JITTER_MAX = 1e-6


class FactorizationError(np.linalg.LinAlgError):
    """Raised when a covariance cannot be factored even after jitter."""


@dataclass(frozen=True)
class UtParams:
    """Scaling parameters of the scaled unscented transform.

    ``alpha`` and ``k_sigma`` set the spread of the points around the mean,
    ``beta`` folds prior knowledge of the distribution into the zeroth
    covariance weight (2 is optimal for Gaussians).
    """

    alpha: float = 1.0
    k_sigma: float = 0.5
    beta: float = 2.0
    n_x: int = 3

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if self.k_sigma < 0:
            raise ValueError("k_sigma must be non-negative")
        if self.n_x < 1:
            raise ValueError("n_x must be at least 1")

    @property
    def lambda_sigma(self) -> float:
        return self.alpha**2 * (self.n_x + self.k_sigma) - self.n_x

    @property
    def n_sigma(self) -> int:
        return 2 * self.n_x + 1


@dataclass(frozen=True)
class UtWeights:
    w_mean: np.ndarray
    w_cov: np.ndarray

    @property
    def n_sigma(self) -> int:
        return len(self.w_mean)


@dataclass
class SigmaSet:
    points: np.ndarray  # (n_sigma, n_x), row 0 is the mean
    source_mean: np.ndarray
    source_cov: np.ndarray


@dataclass
class SigmaBatch:
    """Per-step sigma sets, covariances and the noise column of one batch."""

    sigma_sets: list[SigmaSet] = field(default_factory=list)
    covariances: list[np.ndarray] = field(default_factory=list)
    noise: np.ndarray | None = None


def ut_weights(p: UtParams) -> UtWeights:
    scale = p.n_x + p.lambda_sigma
    if scale <= 0:
        raise ValueError(f"n_x + lambda_sigma = {scale} must be positive")
    w_mean = np.full(p.n_sigma, 1.0 / (2.0 * scale))
    w_mean[0] = p.lambda_sigma / scale
    w_cov = w_mean.copy()
    w_cov[0] += 1.0 - p.alpha**2 + p.beta
    return UtWeights(w_mean, w_cov)


def psd_cholesky(a: np.ndarray, tol: float = PSD_TOL) -> np.ndarray:
    """Lower-triangular factor ``L`` with ``L @ L.T == a`` for PSD ``a``.

    Unlike :func:`numpy.linalg.cholesky` this accepts singular matrices:
    a pivot within ``tol`` of zero zeroes its column. A pivot below
    ``-tol`` raises :class:`FactorizationError`.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    L = np.zeros_like(a)
    for j in range(n):
        d = a[j, j] - L[j, :j] @ L[j, :j]
        if d > tol:
            L[j, j] = np.sqrt(d)
            for i in range(j + 1, n):
                L[i, j] = (a[i, j] - L[i, :j] @ L[j, :j]) / L[j, j]
        elif d < -tol:
            raise FactorizationError(f"negative pivot {d:.3e} in column {j}")
        else:
            # singular direction; a PSD matrix has (numerically) zero coupling here
            for i in range(j + 1, n):
                r = a[i, j] - L[i, :j] @ L[j, :j]
                if abs(r) > np.sqrt(tol):
                    raise FactorizationError(f"zero pivot with coupling {r:.3e}")
    return L


def matrix_sqrt(cov: np.ndarray) -> np.ndarray:
    """PSD factor of ``cov`` with jitter escalation 1e-12 .. 1e-6 on failure."""
    cov = np.asarray(cov, dtype=float)
    try:
        return psd_cholesky(cov)
    except FactorizationError:
        pass
    eye = np.eye(cov.shape[0])
    jitter = JITTER_START
    while jitter <= JITTER_MAX * (1 + 1e-9):
        try:
            return psd_cholesky(cov + jitter * eye)
        except FactorizationError:
            jitter *= 10.0
    raise FactorizationError("covariance is not PSD even with 1e-6 jitter")


def sigma_points(mean, cov, p: UtParams) -> SigmaSet:
    """Deterministic ``2 n_x + 1`` points around ``mean``.

    Offsets are the columns of the lower-triangular factor of
    ``(n_x + lambda_sigma) * cov``.
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    n = p.n_x
    if mean.shape != (n,) or cov.shape != (n, n):
        raise ValueError("mean/cov shape does not match n_x")
    L = matrix_sqrt((n + p.lambda_sigma) * cov)
    pts = np.empty((2 * n + 1, n))
    pts[0] = mean
    pts[1 : n + 1] = mean + L.T
    pts[n + 1 :] = mean - L.T
    return SigmaSet(pts, mean, cov)


def reconstruct_moments(points: np.ndarray, w: UtWeights) -> tuple[np.ndarray, np.ndarray]:
    """Weighted mean and (symmetrised) covariance of a sigma-point cloud."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] != w.n_sigma:
        raise ValueError(f"expected {w.n_sigma} points, got {points.shape[0]}")
    # anchor at point 0 so that identical points give exactly zero spread
    rel = points - points[0]
    mean = points[0] + w.w_mean @ rel
    d = points - mean
    cov = (w.w_cov[:, None] * d).T @ d
    cov = 0.5 * (cov + cov.T)
    if np.linalg.eigvalsh(cov).min() < -PSD_TOL * max(1.0, np.abs(cov).max()):
        raise FactorizationError("reconstructed covariance is not PSD")
    return mean, cov


def propagate_sigma(points: np.ndarray, w, dt: float) -> np.ndarray:
    """Apply one dynamics step to every point with the same (clamped) control."""
    return step_array(points, np.broadcast_to(np.asarray(w, dtype=float), points.shape[:-1] + (2,)), dt)


def unscented_transform(
    f: Callable[[np.ndarray], np.ndarray], mean, cov, p: UtParams
) -> tuple[np.ndarray, np.ndarray]:
    """Push ``N(mean, cov)`` through a pointwise map ``f`` (rows in, rows out)."""
    s = sigma_points(mean, cov, p)
    return reconstruct_moments(f(s.points), ut_weights(p))
