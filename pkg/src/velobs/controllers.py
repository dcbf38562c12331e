"""Torque laws used by the scenario suite.

All feedback laws take the observer velocity estimate, never the true joint
velocity; positions are assumed measured.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import cos, sin

import numpy as np

from .dynamics import RobotModel


def open_loop_1(model: RobotModel, q, t: float) -> np.ndarray:
    """Gravity compensation plus the bounded profile (cos(t/2), -cos t)."""
    if model.n != 2:
        raise ValueError("open-loop profiles are defined for two-joint models")
    return model.gravity(q) + np.array([cos(0.5 * t), -cos(t)])


def open_loop_2(model: RobotModel, q, t: float) -> np.ndarray:
    """Gravity compensation plus (sin t, 1 + sin 2t); drives speeds unbounded."""
    if model.n != 2:
        raise ValueError("open-loop profiles are defined for two-joint models")
    return model.gravity(q) + np.array([sin(t), 1.0 + sin(2.0 * t)])


def _as_gain_matrix(k, n: int, name: str) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    if k.ndim == 1:
        k = np.diag(k)
    if k.shape != (n, n):
        raise ValueError(f"{name} must be {n}x{n} or a length-{n} diagonal")
    if not np.allclose(k, np.diag(np.diagonal(k))):
        raise ValueError(f"{name} must be diagonal")
    if np.any(np.diagonal(k) <= 0.0):
        raise ValueError(f"{name} diagonal entries must be positive")
    return k


@dataclass(frozen=True, eq=False)
class PdConfig:
    """Diagonal PD gains and the position setpoint."""

    kp: np.ndarray
    kd: np.ndarray
    x_ref: np.ndarray

    def __post_init__(self):
        x_ref = np.asarray(self.x_ref, dtype=float)
        n = x_ref.shape[0]
        object.__setattr__(self, "x_ref", x_ref)
        object.__setattr__(self, "kp", _as_gain_matrix(self.kp, n, "kp"))
        object.__setattr__(self, "kd", _as_gain_matrix(self.kd, n, "kd"))


def pd_gravity_feedback(model: RobotModel, config: PdConfig, q, xhat2) -> np.ndarray:
    """PD regulation about x_ref with gravity compensation, damping on the estimate."""
    q = model._check_joint_vector(q, "q")
    xhat2 = model._check_joint_vector(xhat2, "xhat2")
    return (model.gravity(q) + config.kp @ (config.x_ref - q) - config.kd @ xhat2)


# Thin wrappers giving the laws a uniform call surface for the simulator.

@dataclass(frozen=True)
class OpenLoopBounded:
    name: str = field(default="open_loop_1", init=False)

    def torque(self, model, q, xhat2, t):
        return open_loop_1(model, q, t)


@dataclass(frozen=True)
class OpenLoopUnbounded:
    name: str = field(default="open_loop_2", init=False)

    def torque(self, model, q, xhat2, t):
        return open_loop_2(model, q, t)


@dataclass(frozen=True, eq=False)
class PdGravity:
    config: PdConfig
    name: str = field(default="pd", init=False)

    def torque(self, model, q, xhat2, t):
        return pd_gravity_feedback(model, self.config, q, xhat2)


@dataclass(frozen=True, eq=False)
class ConstantTorque:
    tau: np.ndarray
    name: str = field(default="constant", init=False)

    def __post_init__(self):
        object.__setattr__(self, "tau", np.asarray(self.tau, dtype=float))

    def torque(self, model, q, xhat2, t):
        return self.tau
