"""Robot models driven by the field: single integrator and 3D unicycle."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

DEGENERATE_EPS = 1e-9


def wrap_angle(a):
    """Wrap to ``(-pi, pi]``; works on scalars and arrays."""
    return a - 2.0 * np.pi * np.ceil((a - np.pi) / (2.0 * np.pi))


@dataclass(frozen=True)
class Saturation:
    """Symmetric per-channel clamps; ``None`` leaves a channel free."""

    v: Optional[float] = None
    uz: Optional[float] = None
    utheta: Optional[float] = None

    def __post_init__(self):
        for name in ("v", "uz", "utheta"):
            lim = getattr(self, name)
            if lim is not None and not lim > 0:
                raise ValueError(f"saturation limit {name} must be positive")


@dataclass(frozen=True)
class ControlInputs:
    v: float
    u_z: float
    u_theta: float
    theta_d: float
    degenerate: bool = False


@dataclass
class IntegratorRobot:
    xi: np.ndarray


@dataclass
class UnicycleRobot:
    x: np.ndarray
    theta: float
    w1: float
    w2: float
    k_theta: float = 2.0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.theta = float(wrap_angle(self.theta))
        if self.k_theta <= 0:
            raise ValueError("k_theta must be positive")

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.x, [self.theta, self.w1, self.w2]])


def _clip(value, limit):
    if limit is None:
        return value
    return np.clip(value, -limit, limit)


def saturate(v, u_z, u_theta, limits: Optional[Saturation]):
    if limits is None:
        return v, u_z, u_theta
    v = np.minimum(v, limits.v) if limits.v is not None else v
    return v, _clip(u_z, limits.uz), _clip(u_theta, limits.utheta)


def unicycle_controls(
    X,
    theta: float,
    k_theta: float,
    limits: Optional[Saturation] = None,
    theta_d_hold: Optional[float] = None,
    eps: float = DEGENERATE_EPS,
) -> ControlInputs:
    """Speed, climb rate and yaw rate that make a unicycle follow the field ``X``.

    The heading error is wrapped so the robot always turns the short way. When
    the planar part of ``X`` vanishes the previous desired heading is kept.
    """
    X = np.asarray(X, dtype=float)
    if X.shape[0] < 2:
        raise ValueError("field needs at least two spatial components")
    planar = math.hypot(X[0], X[1])
    v = planar
    degenerate = planar < eps
    x3 = X[2] if X.shape[0] > 4 else 0.0
    if degenerate:
        theta_d = theta if theta_d_hold is None else theta_d_hold
        u_z = x3
    else:
        theta_d = math.atan2(X[1], X[0])
        u_z = v * x3 / planar
    u_theta = k_theta * wrap_angle(theta_d - theta)
    v, u_z, u_theta = saturate(v, u_z, u_theta, limits)
    return ControlInputs(float(v), float(u_z), float(u_theta), float(theta_d), bool(degenerate))


def unicycle_derivative(r: UnicycleRobot, u: ControlInputs, X) -> np.ndarray:
    """Time derivative of ``(x1, x2, x3, theta, w1, w2)``."""
    X = np.asarray(X, dtype=float)
    n = r.x.shape[0]
    d = np.zeros(n + 3)
    d[0] = u.v * math.cos(r.theta)
    d[1] = u.v * math.sin(r.theta)
    if n >= 3:
        d[2] = u.u_z
    d[n] = u.u_theta
    d[n + 1] = X[n]
    d[n + 2] = X[n + 1]
    return d


def integrator_derivative(r: IntegratorRobot, X) -> np.ndarray:
    return np.array(X, dtype=float)


def unicycle_controls_batch(X, theta, k_theta, limits, theta_d_hold, eps: float = DEGENERATE_EPS):
    """Vectorised :func:`unicycle_controls` over robots; ``X`` is ``(N, n+2)``."""
    n = X.shape[1] - 2
    planar = np.hypot(X[:, 0], X[:, 1])
    degenerate = planar < eps
    safe = np.where(degenerate, 1.0, planar)
    theta_d = np.where(degenerate, theta_d_hold, np.arctan2(X[:, 1], X[:, 0]))
    u_z = np.where(degenerate, X[:, 2], planar * X[:, 2] / safe) if n >= 3 else np.zeros_like(planar)
    u_theta = k_theta * wrap_angle(theta_d - theta)
    v, u_z, u_theta = saturate(planar, u_z, u_theta, limits)
    return v, u_z, u_theta, theta_d, degenerate
