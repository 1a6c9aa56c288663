"""Differential-drive kinematics with explicit-Euler propagation.

The state is ``(x, y, theta)`` and the control is ``(v, omega)``. Heading is
kept unwrapped; wrapping only happens when an angular error is formed
(see :func:`wrap_angle`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STATE_DIM = 3
CONTROL_DIM = 2


@dataclass(frozen=True)
class RobotState:
    """Pose of the vehicle in the world frame."""

    x: float
    y: float
    theta: float

    def __post_init__(self):
        if not np.all(np.isfinite([self.x, self.y, self.theta])):
            raise ValueError(f"non-finite state {self!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta], dtype=float)

    @classmethod
    def from_array(cls, a) -> "RobotState":
        a = np.asarray(a, dtype=float)
        return cls(float(a[0]), float(a[1]), float(a[2]))


@dataclass(frozen=True)
class ControlInput:
    """Linear and angular velocity command."""

    v: float
    omega: float

    def __post_init__(self):
        if not np.all(np.isfinite([self.v, self.omega])):
            raise ValueError(f"non-finite control {self!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.v, self.omega], dtype=float)

    @classmethod
    def from_array(cls, a) -> "ControlInput":
        a = np.asarray(a, dtype=float)
        return cls(float(a[0]), float(a[1]))


@dataclass(frozen=True)
class ControlBounds:
    v_min: float = 0.0
    v_max: float = 2.0
    omega_min: float = -3.0
    omega_max: float = 3.0

    def __post_init__(self):
        if self.v_min > self.v_max or self.omega_min > self.omega_max:
            raise ValueError(f"inverted bounds {self!r}")

    @property
    def lower(self) -> np.ndarray:
        return np.array([self.v_min, self.omega_min])

    @property
    def upper(self) -> np.ndarray:
        return np.array([self.v_max, self.omega_max])


def clamp_control(u: ControlInput, bounds: ControlBounds) -> ControlInput:
    """Element-wise ``max(lower, min(u, upper))``."""
    return ControlInput(
        max(bounds.v_min, min(u.v, bounds.v_max)),
        max(bounds.omega_min, min(u.omega, bounds.omega_max)),
    )


def clamp_array(w: np.ndarray, bounds: ControlBounds) -> np.ndarray:
    """Vectorised :func:`clamp_control` over arrays whose last axis is (v, omega)."""
    return np.maximum(bounds.lower, np.minimum(w, bounds.upper))


def step(s: RobotState, u: ControlInput, dt: float) -> RobotState:
    """One explicit-Euler step of the unicycle model. ``u`` must already be clamped."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    return RobotState(
        s.x + u.v * np.cos(s.theta) * dt,
        s.y + u.v * np.sin(s.theta) * dt,
        s.theta + u.omega * dt,
    )


def step_array(states: np.ndarray, w: np.ndarray, dt: float) -> np.ndarray:
    """Batched :func:`step`; ``states`` is ``(..., 3)`` and ``w`` broadcasts as ``(..., 2)``."""
    states = np.asarray(states, dtype=float)
    w = np.asarray(w, dtype=float)
    theta = states[..., 2]
    out = np.empty(np.broadcast_shapes(states.shape, w.shape[:-1] + (3,)))
    out[..., 0] = states[..., 0] + w[..., 0] * np.cos(theta) * dt
    out[..., 1] = states[..., 1] + w[..., 0] * np.sin(theta) * dt
    out[..., 2] = theta + w[..., 1] * dt
    return out


def wrap_angle(a):
    """Map angles to (-pi, pi] via atan2, safe for unwrapped headings."""
    return np.arctan2(np.sin(a), np.cos(a))
