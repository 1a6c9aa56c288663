"""Trajectory cost terms for MPPI and the risk-sensitive U-MPPI evaluation.

The risk-sensitive cost replaces the expected quadratic tracking cost with
the exponential-quadratic (Whittle) form. Under a Gaussian state it has the
closed form ``(1/gamma) log det(I + gamma Q Sigma) + |x - x_f|^2_{Q_rs}`` with
``Q_rs = (Q^-1 + gamma Sigma)^-1``; :func:`mc_rs_oracle` evaluates the
defining expectation by sampling instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .dynamics import RobotState, wrap_angle

GAMMA_ZERO = 1e-8
EIG_FLOOR = 1e-6


def _diag(values) -> np.ndarray:
    a = np.asarray(values, dtype=float)
    return np.diag(a) if a.ndim == 1 else a


@dataclass(frozen=True)
class CostParams:
    """Weights of the navigation cost.

    ``Q`` and ``R`` accept either a vector of diagonal entries or a full
    matrix. ``lam`` is the inverse temperature of the weighted update.
    ``heading_index`` names the state component that is an angle (wrapped
    when forming the error); ``None`` disables wrapping.
    """

    Q: np.ndarray = field(default_factory=lambda: np.diag([2.5, 2.5, 2.0]))
    gamma: float = 1.0
    w_crash: float = 1e3
    R: np.ndarray = field(default_factory=lambda: default_R(0.572, (0.023, 0.028)))
    nu: float = 1200.0
    lam: float = 0.572
    goal: np.ndarray = field(default_factory=lambda: np.zeros(3))
    heading_index: int | None = 2

    def __post_init__(self):
        Q = _diag(self.Q)
        R = _diag(self.R)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        goal = self.goal.as_array() if isinstance(self.goal, RobotState) else self.goal
        object.__setattr__(self, "goal", np.atleast_1d(np.asarray(goal, dtype=float)))
        if not np.allclose(Q, np.diag(np.diag(Q))) or np.any(np.diag(Q) <= 0):
            raise ValueError("Q must be diagonal with positive entries")
        if np.any(np.linalg.eigvalsh(0.5 * (R + R.T)) <= 0):
            raise ValueError("R must be positive definite")
        if self.nu < 1:
            raise ValueError("nu must be >= 1")
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.w_crash < 0:
            raise ValueError("w_crash must be non-negative")
        if self.goal.shape[0] != Q.shape[0]:
            raise ValueError("goal dimension does not match Q")

    @property
    def gamma_u(self) -> float:
        return (self.nu - 1.0) / (2.0 * self.nu)

    def with_goal(self, goal) -> "CostParams":
        from dataclasses import replace

        return replace(self, goal=goal)


def default_R(lam: float, sigma_u_diag) -> np.ndarray:
    """Control weighting ``lam * Sigma_u^(-1/2)`` for a diagonal noise covariance."""
    return lam * np.diag(1.0 / np.sqrt(np.asarray(sigma_u_diag, dtype=float)))


def state_error(x, params: CostParams) -> np.ndarray:
    x = x.as_array() if isinstance(x, RobotState) else np.asarray(x, dtype=float)
    e = np.atleast_1d(x - params.goal).astype(float)
    h = params.heading_index
    if h is not None and h < e.shape[-1]:
        e[..., h] = wrap_angle(e[..., h])
    return e


def quadratic_state_cost(x, params: CostParams) -> float:
    e = state_error(x, params)
    return float(e @ params.Q @ e)


class RiskTerms(NamedTuple):
    logdet_term: float
    Q_rs: np.ndarray
    clamped: bool


def risk_terms(Sigma, params: CostParams) -> RiskTerms:
    """Uncertainty-dependent pieces of the risk-sensitive cost.

    Returns ``(1/gamma) log det(I + gamma Q Sigma)``, the adaptive weight
    ``Q_rs`` and whether the eigenvalue floor had to be applied (only
    possible for ``gamma < 0``).
    """
    Q = params.Q
    gamma = params.gamma
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    if abs(gamma) < GAMMA_ZERO:
        return RiskTerms(float(np.trace(Q @ Sigma)), Q.copy(), False)
    if not np.any(Sigma):
        return RiskTerms(0.0, Q.copy(), False)
    q_diag = np.diag(Q)
    M = np.diag(1.0 / q_diag) + gamma * Sigma
    M = 0.5 * (M + M.T)
    logdet_Q = float(np.sum(np.log(q_diag)))
    try:
        L = np.linalg.cholesky(M)
        logdet = logdet_Q + 2.0 * float(np.sum(np.log(np.diag(L))))
        Linv = np.linalg.inv(L)
        Q_rs = Linv.T @ Linv
        clamped = False
    except np.linalg.LinAlgError:
        evals, evecs = np.linalg.eigh(M)
        evals = np.maximum(evals, EIG_FLOOR)
        logdet = logdet_Q + float(np.sum(np.log(evals)))
        Q_rs = (evecs / evals) @ evecs.T
        clamped = True
    return RiskTerms(logdet / gamma, 0.5 * (Q_rs + Q_rs.T), clamped)


def rs_weight_matrix(Sigma, params: CostParams) -> np.ndarray:
    """``(Q^-1 + gamma Sigma)^-1`` with eigenvalue flooring when it is not PD."""
    return risk_terms(Sigma, params).Q_rs


def risk_sensitive_cost(point, Sigma, params: CostParams) -> float:
    """Risk-sensitive state cost of one (sigma) point under covariance ``Sigma``.

    For ``|gamma| < 1e-8`` the limit ``trace(Q Sigma) + |e|^2_Q`` is used.
    """
    t = risk_terms(Sigma, params)
    e = state_error(point, params)
    return t.logdet_term + float(e @ t.Q_rs @ e)


def mc_rs_oracle(mean, Sigma, params: CostParams, n_samples: int, seed: int = 0) -> float:
    """Monte-Carlo estimate of ``-(2/gamma) log E[exp(-gamma/2 |x - x_f|^2_Q)]``.

    Samples ``x ~ N(mean, Sigma)`` with a private seeded generator.
    """
    if abs(params.gamma) < GAMMA_ZERO:
        raise ValueError("the oracle is undefined at gamma = 0")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    if not np.any(Sigma):
        return quadratic_state_cost(mean, params)
    rng = np.random.default_rng(seed)
    x = rng.multivariate_normal(mean, Sigma, size=n_samples, method="eigh")
    e = state_error(x, params)
    q = np.einsum("ni,ij,nj->n", e, params.Q, e)
    w = np.exp(-0.5 * params.gamma * q)
    m = w.mean()
    if m == 0.0 or not np.isfinite(m):
        raise FloatingPointError(
            "exponential weights under/overflowed; gamma, Q and Sigma scales are mismatched"
        )
    return float(-2.0 / params.gamma * np.log(m))


def crash_cost(x, world, w_crash: float, robot_radius: float = 0.0) -> float:
    """``w_crash`` if ``x`` collides in ``world`` (obstacle map or costmap), else 0."""
    from .world import is_collision

    return float(w_crash) if is_collision(world, x, robot_radius) else 0.0


def control_cost(u, du, params: CostParams) -> float:
    """``gamma_u du'R du + u'R du + 1/2 u'R u``."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    du = np.atleast_1d(np.asarray(du, dtype=float))
    R = params.R
    return float(params.gamma_u * du @ R @ du + u @ R @ du + 0.5 * u @ R @ u)
