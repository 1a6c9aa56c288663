"""Sampling-based MPC: MPPI and its unscented (sigma-point) variant.

One control iteration draws a noise tensor, rolls out every perturbed
control sequence (or, in the unscented modes, a cone of sigma-point
trajectories per noise column), reweights the perturbations by their
exponentiated cost, smooths the result and applies the first control.

Two rollout paths exist. :func:`rollout_batch` is a readable reference
built from the module-level dynamics, unscented and cost functions; it is
what the tests compare against. :func:`rollout_all` runs the compiled
kernel in :mod:`umppi._rollout` and is used by :class:`Controller`.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import _rollout
from .costs import CostParams, control_cost, crash_cost, risk_terms, quadratic_state_cost, state_error
from .dynamics import CONTROL_DIM, STATE_DIM, ControlBounds, ControlInput, RobotState, clamp_array, step_array
from .unscented import (
    FactorizationError,
    SigmaBatch,
    UtParams,
    propagate_sigma,
    reconstruct_moments,
    sigma_points,
    ut_weights,
)
from .world import Costmap


class NoFeasibleRollout(RuntimeError):
    """Every sampled rollout had an infinite cost."""


SIGMA_REDUCTIONS = ("sample", "mean")


class Mode(str, enum.Enum):
    MPPI = "mppi"
    UMPPI_SM0 = "umppi-sm0"
    UMPPI_SM1 = "umppi-sm1"

    @property
    def kernel_code(self) -> int:
        return {Mode.MPPI: _rollout.MODE_MPPI, Mode.UMPPI_SM0: _rollout.MODE_SM0, Mode.UMPPI_SM1: _rollout.MODE_SM1}[self]


@dataclass(frozen=True)
class ControllerConfig:
    """Everything the optimizer needs; defaults are the navigation settings.

    ``Sigma_u`` and ``Sigma_0`` accept a vector of diagonal entries or a
    matrix. ``Sigma_u`` must be diagonal.

    ``sigma_reduction`` decides how the SM1 costs of one noise column enter
    the update: ``"sample"`` treats every sigma trajectory as its own sample,
    ``"mean"`` averages the column's sigma costs into one sample.
    """

    N: int = 240
    M: int = 2499
    mode: Mode = Mode.UMPPI_SM1
    Sigma_u: np.ndarray = field(default_factory=lambda: np.diag([0.023, 0.028]))
    Sigma_0: np.ndarray = field(default_factory=lambda: 0.001 * np.eye(3))
    dt: float = 1.0 / 30.0
    ut: UtParams = field(default_factory=UtParams)
    cost: CostParams = field(default_factory=CostParams)
    bounds: ControlBounds = field(default_factory=ControlBounds)
    sg_window: int = 61
    sg_order: int = 5
    seed: int = 0
    sigma_reduction: str = "sample"

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        Su = np.asarray(self.Sigma_u, dtype=float)
        Su = np.diag(Su) if Su.ndim == 1 else Su
        S0 = np.asarray(self.Sigma_0, dtype=float)
        S0 = np.diag(S0) if S0.ndim == 1 else S0
        object.__setattr__(self, "Sigma_u", Su)
        object.__setattr__(self, "Sigma_0", S0)
        if self.N < 0 or self.M < 1:
            raise ValueError("need N >= 0 and M >= 1")
        if Su.shape != (CONTROL_DIM, CONTROL_DIM) or np.any(Su != np.diag(np.diag(Su))) or np.any(np.diag(Su) < 0):
            raise ValueError("Sigma_u must be a non-negative diagonal 2x2 matrix")
        if S0.shape != (STATE_DIM, STATE_DIM) or np.any(np.linalg.eigvalsh(0.5 * (S0 + S0.T)) < -1e-12):
            raise ValueError("Sigma_0 must be a PSD 3x3 matrix")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.sg_window < 1 or self.sg_window % 2 == 0 or not 0 <= self.sg_order < self.sg_window:
            raise ValueError("sg_window must be odd and sg_order < sg_window")
        if self.ut.n_x != STATE_DIM:
            raise ValueError("UtParams.n_x must equal the state dimension")
        if self.sigma_reduction not in SIGMA_REDUCTIONS:
            raise ValueError(f"sigma_reduction must be one of {SIGMA_REDUCTIONS}")
        if self.mode is Mode.UMPPI_SM1 and self.M < self.ut.n_sigma:
            raise ValueError("SM1 needs M >= n_sigma")

    @property
    def n_eval(self) -> int:
        return self.ut.n_sigma if self.mode is Mode.UMPPI_SM1 else 1

    @property
    def m_sigma(self) -> int:
        """Number of noise columns (batches) per iteration."""
        if self.mode is Mode.UMPPI_SM1:
            return self.M // self.ut.n_sigma
        return self.M

    def replace(self, **kw) -> "ControllerConfig":
        return replace(self, **kw)


@dataclass
class Diagnostics:
    iteration: int
    t_exec_ms: float
    s_min: float
    ess: float
    v: float
    omega: float
    n_rs_clamped: int = 0


def sample_noise(cfg: ControllerConfig, iteration: int = 0) -> np.ndarray:
    """Noise tensor ``(N, M_sigma, 2)`` drawn from ``N(0, Sigma_u)``.

    One generator per iteration, keyed by ``(seed, iteration)``; the tensor
    is filled before any rollout starts, so the draw is independent of how
    rollouts are scheduled.
    """
    rng = np.random.default_rng([cfg.seed, iteration])
    std = np.sqrt(np.diag(cfg.Sigma_u))
    return rng.standard_normal((cfg.N, cfg.m_sigma, CONTROL_DIM)) * std


def _state_cost(x, cfg: ControllerConfig, world, risk) -> float:
    """Running state cost (risk-sensitive when ``risk`` is given) plus crash term."""
    if risk is None:
        c = quadratic_state_cost(x, cfg.cost)
    else:
        e = state_error(x, cfg.cost)
        c = risk.logdet_term + float(e @ risk.Q_rs @ e)
    return c + crash_cost(x, world, cfg.cost.w_crash)


def rollout_batch(start_mean, start_cov, U, noise_col, cfg: ControllerConfig, world=None):
    """Reference cost-to-go of one noise column.

    Returns ``(costs, batch)`` where ``costs`` has one entry in MPPI and
    SM0 mode and ``n_sigma`` entries in SM1, and ``batch`` records the sigma
    sets and covariances along the horizon (empty for MPPI).
    ``noise_col`` is ``(N, 2)``. Non-finite costs become ``+inf``.
    """
    U = np.asarray(U, dtype=float).reshape(-1, CONTROL_DIM)
    noise_col = np.asarray(noise_col, dtype=float).reshape(-1, CONTROL_DIM)
    if len(U) != cfg.N or len(noise_col) != cfg.N:
        raise ValueError("U and noise_col must have N rows")
    x = start_mean.as_array() if isinstance(start_mean, RobotState) else np.asarray(start_mean, dtype=float)
    p = cfg.cost
    batch = SigmaBatch(noise=noise_col)

    if cfg.mode is Mode.MPPI:
        c = 0.0
        for k in range(cfg.N):
            c += _state_cost(x, cfg, world, None) + control_cost(U[k], noise_col[k], p)
            w = clamp_array(U[k] + noise_col[k], cfg.bounds)
            x = step_array(x, w, cfg.dt)
        c += _state_cost(x, cfg, world, None)
        return np.array([c if np.isfinite(c) else np.inf]), batch

    w_ut = ut_weights(cfg.ut)
    n_eval = cfg.n_eval
    acc = np.zeros(n_eval)
    mean, cov = x.copy(), np.asarray(start_cov, dtype=float)
    pts = None
    try:
        for k in range(cfg.N):
            s = sigma_points(mean, cov, cfg.ut)
            batch.sigma_sets.append(s)
            batch.covariances.append(cov)
            risk = risk_terms(cov, p)
            cc = control_cost(U[k], noise_col[k], p)
            for i in range(n_eval):
                acc[i] += _state_cost(s.points[i], cfg, world, risk) + cc
            w = clamp_array(U[k] + noise_col[k], cfg.bounds)
            pts = propagate_sigma(s.points, w, cfg.dt)
            mean, cov = reconstruct_moments(pts, w_ut)
    except FactorizationError:
        return np.full(n_eval, np.inf), batch
    batch.covariances.append(cov)
    risk = risk_terms(cov, p)
    for i in range(n_eval):
        terminal = pts[i] if pts is not None else x
        acc[i] += _state_cost(terminal, cfg, world, risk)
    acc[~np.isfinite(acc)] = np.inf
    return acc, batch


def _world_arrays(world):
    if world is None:
        return np.zeros((0, 0), dtype=np.int8), np.zeros(2), 1.0
    if not isinstance(world, Costmap):
        raise TypeError("the compiled rollout needs a Costmap (or None)")
    return np.ascontiguousarray(world.cells), np.asarray(world.origin, dtype=float), float(world.resolution)


def rollout_all(start_mean, start_cov, U, noise, cfg: ControllerConfig, world: Costmap | None = None):
    """Compiled rollouts of every noise column.

    Returns ``(costs (M_sigma, n_eval), n_rs_clamped)``.
    """
    x = start_mean.as_array() if isinstance(start_mean, RobotState) else np.asarray(start_mean, dtype=float)
    p = cfg.cost
    w_ut = ut_weights(cfg.ut)
    cells, origin, res = _world_arrays(world)
    wrap = p.heading_index == 2
    costs, n_clamped = _rollout.rollout_kernel(
        np.ascontiguousarray(x, dtype=float),
        np.ascontiguousarray(start_cov, dtype=float),
        np.ascontiguousarray(U, dtype=float),
        np.ascontiguousarray(np.transpose(noise, (1, 0, 2))),
        cfg.mode.kernel_code,
        float(cfg.dt),
        cfg.bounds.lower,
        cfg.bounds.upper,
        np.ascontiguousarray(np.diag(p.Q)),
        np.ascontiguousarray(p.goal),
        wrap,
        float(p.gamma),
        float(p.w_crash),
        np.ascontiguousarray(p.R),
        float(p.gamma_u),
        float(cfg.ut.n_x + cfg.ut.lambda_sigma),
        w_ut.w_mean,
        w_ut.w_cov,
        cells,
        origin,
        res,
    )
    return costs, int(n_clamped)


def softmax_weights(costs, lam: float) -> tuple[np.ndarray, float]:
    """Unnormalised weights ``exp(-(S - S_min)/lam)`` and ``S_min``; ``inf`` maps to 0."""
    S = np.asarray(costs, dtype=float)
    finite = np.isfinite(S)
    if not finite.any():
        raise NoFeasibleRollout("no feasible rollout")
    s_min = float(S[finite].min())
    w = np.zeros_like(S)
    w[finite] = np.exp(-(S[finite] - s_min) / lam)
    return w, s_min


def update_controls(U, costs, noise, lam: float, reduction: str = "sample"):
    """Weighted-average update of the nominal sequence.

    ``costs`` is ``(M_sigma,)`` or ``(M_sigma, n_eval)``; each entry is a
    sample carrying its column's perturbation unless ``reduction="mean"``
    collapses every row first. Returns ``(U_new, s_min, ess)``.
    """
    costs = np.asarray(costs, dtype=float)
    if costs.ndim == 1:
        costs = costs[:, None]
    if reduction == "mean":
        costs = costs.mean(axis=1, keepdims=True)
    elif reduction != "sample":
        raise ValueError(f"unknown reduction {reduction!r}")
    w, s_min = softmax_weights(costs, lam)
    per_col = w.sum(axis=1)
    total = per_col.sum()
    ess = float(total**2 / np.sum(w * w))
    U_new = np.asarray(U, dtype=float) + np.einsum("m,kmc->kc", per_col, noise) / total
    return U_new, s_min, ess


def sg_kernel(window: int, order: int) -> np.ndarray:
    """Centre-point least-squares smoothing weights.

    Built from an orthonormal basis of the scaled Vandermonde matrix, which
    keeps the weights accurate to rounding (the normal-equation route loses
    about six digits at window 61, order 5).
    """
    h = window // 2
    x = np.arange(-h, h + 1) / max(h, 1)
    Q, _ = np.linalg.qr(np.vander(x, order + 1, increasing=True))
    return Q @ Q[h]


def sg_smooth(U, window: int = 61, order: int = 5) -> np.ndarray:
    """Savitzky-Golay smoothing along axis 0 with mirror edges.

    A window longer than the sequence degenerates to a single least-squares
    polynomial (degree capped by the sequence length) over the whole run.
    """
    if window % 2 == 0 or not 0 <= order < window:
        raise ValueError("window must be odd and order < window")
    U = np.asarray(U, dtype=float)
    n = U.shape[0]
    if n == 0:
        return U.copy()
    flat = U.reshape(n, -1)
    if window <= n:
        h = window // 2
        # reflect about the end samples without repeating them
        padded = np.pad(flat, ((h, h), (0, 0)), mode="reflect")
        c = sg_kernel(window, order)
        out = np.stack([np.convolve(padded[:, j], c, mode="valid") for j in range(flat.shape[1])], axis=1)
        return out.reshape(U.shape)
    deg = min(order, n - 1)
    t = np.linspace(-1.0, 1.0, n) if n > 1 else np.zeros(1)
    Q, _ = np.linalg.qr(np.vander(t, deg + 1, increasing=True))
    return (Q @ (Q.T @ flat)).reshape(U.shape)


class Controller:
    """Receding-horizon driver holding the warm-started control sequence."""

    def __init__(self, cfg: ControllerConfig):
        self.cfg = cfg
        self.reset()

    def reset(self) -> None:
        self.U = np.zeros((self.cfg.N, CONTROL_DIM))
        self.iteration = 0

    def set_goal(self, goal) -> None:
        self.cfg = self.cfg.replace(cost=self.cfg.cost.with_goal(goal))

    def optimize(self, state: RobotState, world: Costmap | None = None) -> tuple[np.ndarray, float, float, int]:
        """One update of ``self.U`` without shifting. Returns (U, s_min, ess, clamps)."""
        cfg = self.cfg
        noise = sample_noise(cfg, self.iteration)
        start_cov = cfg.Sigma_0 if cfg.mode is not Mode.MPPI else np.zeros((STATE_DIM, STATE_DIM))
        costs, n_clamped = rollout_all(state, start_cov, self.U, noise, cfg, world)
        U_new, s_min, ess = update_controls(self.U, costs, noise, cfg.cost.lam, cfg.sigma_reduction)
        U_new = sg_smooth(U_new, cfg.sg_window, cfg.sg_order)
        return U_new, s_min, ess, n_clamped

    def control_step(self, state: RobotState, world: Costmap | None = None) -> tuple[ControlInput, Diagnostics]:
        t0 = time.perf_counter()
        U_new, s_min, ess, n_clamped = self.optimize(state, world)
        if len(U_new):
            u = clamp_array(U_new[0], self.cfg.bounds)
            self.U = np.vstack([U_new[1:], np.zeros((1, CONTROL_DIM))])
        else:
            u = np.zeros(CONTROL_DIM)
        t_ms = (time.perf_counter() - t0) * 1e3
        diag = Diagnostics(self.iteration, t_ms, s_min, ess, float(u[0]), float(u[1]), n_clamped)
        self.iteration += 1
        return ControlInput.from_array(u), diag


def warmup() -> None:
    """Trigger compilation of the rollout kernel for all modes."""
    for mode in Mode:
        cfg = ControllerConfig(N=2, M=7, mode=mode, sg_window=1, sg_order=0)
        rollout_all(RobotState(0.0, 0.0, 0.0), cfg.Sigma_0, np.zeros((2, 2)), sample_noise(cfg), cfg, None)
