"""Rigid-manipulator dynamics with a skew-symmetry-preserving Coriolis term.

Models expose the matrices of

    M(q) \ddot q + C(q, \dot q) \dot q + F \dot q + g(q) = tau

together with a configuration-dependent norm bound c0(q) satisfying
||C(q, v)|| <= c0(q) ||v||.  The Coriolis matrix is assembled from Christoffel
symbols of the first kind, which gives two structural identities relied on
throughout the package:

  * dM/dt - 2 C(q, \dot q) is skew symmetric,
  * C(q, u) w = C(q, w) u for all u, w.

Planar two-link convention: the arm moves in a vertical plane, q1 is measured
counterclockwise from the horizontal axis, q2 is the second joint angle
relative to link 1, and gravity acts along -y.  Links are modeled as thin
uniform rods (center of mass at mid-length, barycentric inertia m L^2 / 12).
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable, NamedTuple

import numpy as np

# Conditioning limit above which the inertia matrix is treated as singular.
INERTIA_COND_LIMIT = 1e12


class SingularInertiaError(RuntimeError):
    """Raised when the inertia matrix is numerically singular."""


@dataclass
class PlantState:
    """Joint positions x1 (rad) and joint velocities x2 (rad/s)."""

    x1: np.ndarray
    x2: np.ndarray

    def __post_init__(self):
        self.x1 = np.asarray(self.x1, dtype=float)
        self.x2 = np.asarray(self.x2, dtype=float)
        if self.x1.ndim != 1 or self.x1.shape != self.x2.shape:
            raise ValueError("x1 and x2 must be 1-D arrays of equal length")


class RobotModel(ABC):
    """Provider of the manipulator matrices and the Coriolis norm bound."""

    n: int

    @abstractmethod
    def inertia(self, q: np.ndarray) -> np.ndarray:
        """Symmetric positive definite inertia matrix M(q)."""

    @abstractmethod
    def inertia_rate(self, q: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Time derivative of M along q with velocity v."""

    @abstractmethod
    def coriolis(self, q: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Christoffel Coriolis matrix C(q, v)."""

    @abstractmethod
    def gravity(self, q: np.ndarray) -> np.ndarray:
        """Gravity torque vector g(q)."""

    @abstractmethod
    def potential(self, q: np.ndarray) -> float:
        """Gravitational potential energy whose gradient is gravity(q)."""

    @abstractmethod
    def c0_bound(self, q: np.ndarray) -> float:
        """Configuration-dependent bound with ||C(q, v)|| <= c0(q) ||v||."""

    @property
    @abstractmethod
    def c0_max(self) -> float:
        """Uniform upper bound on c0(q) over all configurations."""

    @property
    @abstractmethod
    def dissipation(self) -> np.ndarray:
        """Viscous friction matrix F (F + F^T positive semidefinite)."""

    @abstractmethod
    def design_grid(self) -> np.ndarray:
        """Configurations (rows) used for extremal gain and eigenvalue searches."""

    def dissipation_floor(self) -> float:
        """Smallest eigenvalue of the symmetric part of F."""
        f = self.dissipation
        return float(np.linalg.eigvalsh(0.5 * (f + f.T))[0])

    def _check_joint_vector(self, x, name: str) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"{name} must have shape ({self.n},), got {x.shape}")
        return x


def _shape_norm(theta: float) -> float:
    # Spectral norm of [[-v2, -(v1+v2)], [v1, 0]] for v = (cos t, sin t).
    v1, v2 = math.cos(theta), math.sin(theta)
    s2 = (v1 + v2) ** 2
    tr = 1.0 + s2
    disc = math.sqrt(max(tr * tr - 4.0 * s2 * v1 * v1, 0.0))
    return math.sqrt(0.5 * (tr + disc))


@lru_cache(maxsize=1)
def _unit_coriolis_gain() -> float:
    """Peak over unit velocities of the two-link Coriolis shape norm.

    The two-link Coriolis matrix factors as a sin(q2) times a matrix that is
    linear in the velocity, so the tight c0 constant is the peak spectral
    norm of that factor over the unit circle.  The peak is found on a dense
    grid and refined by golden-section search.
    """
    thetas = np.linspace(0.0, np.pi, 4097)
    values = [_shape_norm(t) for t in thetas]
    i = int(np.argmax(values))
    lo = thetas[max(i - 1, 0)]
    hi = thetas[min(i + 1, len(thetas) - 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = _shape_norm(c), _shape_norm(d)
    for _ in range(120):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = _shape_norm(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = _shape_norm(d)
    return max(fc, fd)


@dataclass(frozen=True)
class TwoLinkParams:
    """Thin-rod planar two-link arm parameters (masses kg, lengths m, damping kg/s)."""

    m1: float = 10.0
    m2: float = 20.0
    l1: float = 1.0
    l2: float = 1.5
    f1: float = 0.1
    f2: float = 0.3
    gravity_accel: float = 9.81

    def __post_init__(self):
        if min(self.m1, self.m2, self.l1, self.l2) <= 0.0:
            raise ValueError("masses and lengths must be positive")
        if self.f1 < 0.0 or self.f2 < 0.0:
            raise ValueError("viscous coefficients must be nonnegative")

    # thin uniform rod: center of mass at mid-length, inertia m l^2 / 12
    @property
    def d1(self) -> float:
        return 0.5 * self.l1

    @property
    def d2(self) -> float:
        return 0.5 * self.l2

    @property
    def i1(self) -> float:
        return self.m1 * self.l1 ** 2 / 12.0

    @property
    def i2(self) -> float:
        return self.m2 * self.l2 ** 2 / 12.0


@dataclass(frozen=True, eq=False)
class TwoLinkArm(RobotModel):
    """Planar two-link arm in a vertical plane with viscous joint friction."""

    params: TwoLinkParams = field(default_factory=TwoLinkParams)
    grid_points: int = 2048

    n = 2

    @cached_property
    def alpha(self) -> float:
        p = self.params
        return p.m1 * p.d1 ** 2 + p.i1 + p.m2 * (p.l1 ** 2 + p.d2 ** 2) + p.i2

    @cached_property
    def beta(self) -> float:
        p = self.params
        return p.m2 * p.d2 ** 2 + p.i2

    @cached_property
    def coupling(self) -> float:
        # coefficient of the cos/sin(q2) terms in M and C
        p = self.params
        return p.m2 * p.l1 * p.d2

    @cached_property
    def c0_max(self) -> float:
        return _unit_coriolis_gain() * self.coupling

    @cached_property
    def dissipation(self) -> np.ndarray:
        return np.diag([self.params.f1, self.params.f2])

    @cached_property
    def _grav_coeffs(self) -> tuple[float, float]:
        p = self.params
        return ((p.m1 * p.d1 + p.m2 * p.l1) * p.gravity_accel,
                p.m2 * p.d2 * p.gravity_accel)

    def inertia(self, q) -> np.ndarray:
        q = self._check_joint_vector(q, "q")
        c2 = math.cos(q[1])
        off = self.beta + self.coupling * c2
        return np.array([[self.alpha + 2.0 * self.coupling * c2, off],
                         [off, self.beta]])

    def inertia_rate(self, q, v) -> np.ndarray:
        q = self._check_joint_vector(q, "q")
        v = self._check_joint_vector(v, "v")
        hd = -self.coupling * math.sin(q[1]) * v[1]
        return np.array([[2.0 * hd, hd], [hd, 0.0]])

    def coriolis(self, q, v) -> np.ndarray:
        q = self._check_joint_vector(q, "q")
        v = self._check_joint_vector(v, "v")
        h = self.coupling * math.sin(q[1])
        return np.array([[-h * v[1], -h * (v[0] + v[1])],
                         [h * v[0], 0.0]])

    def gravity(self, q) -> np.ndarray:
        q = self._check_joint_vector(q, "q")
        a1, a2 = self._grav_coeffs
        c12 = math.cos(q[0] + q[1])
        return np.array([a1 * math.cos(q[0]) + a2 * c12, a2 * c12])

    def potential(self, q) -> float:
        q = self._check_joint_vector(q, "q")
        a1, a2 = self._grav_coeffs
        return a1 * math.sin(q[0]) + a2 * math.sin(q[0] + q[1])

    def c0_bound(self, q) -> float:
        q = self._check_joint_vector(q, "q")
        return self.c0_max * abs(math.sin(q[1]))

    def design_grid(self) -> np.ndarray:
        # M, c0 and g depend on q2 only up to the q1 terms of gravity, and the
        # extremal searches only involve M and c0, so a 1-D sweep suffices.
        q2 = np.linspace(-np.pi, np.pi, self.grid_points)
        return np.column_stack([np.zeros_like(q2), q2])


@dataclass(frozen=True, eq=False)
class SingleLinkModel(RobotModel):
    """Constant-inertia single-joint model; its dynamics are exactly linear."""

    inertia_value: float = 1.0
    damping: float = 0.0

    n = 1

    def __post_init__(self):
        if self.inertia_value <= 0.0:
            raise ValueError("inertia must be positive")
        if self.damping < 0.0:
            raise ValueError("damping must be nonnegative")

    def inertia(self, q) -> np.ndarray:
        self._check_joint_vector(q, "q")
        return np.array([[self.inertia_value]])

    def inertia_rate(self, q, v) -> np.ndarray:
        self._check_joint_vector(q, "q")
        return np.zeros((1, 1))

    def coriolis(self, q, v) -> np.ndarray:
        self._check_joint_vector(q, "q")
        self._check_joint_vector(v, "v")
        return np.zeros((1, 1))

    def gravity(self, q) -> np.ndarray:
        self._check_joint_vector(q, "q")
        return np.zeros(1)

    def potential(self, q) -> float:
        self._check_joint_vector(q, "q")
        return 0.0

    def c0_bound(self, q) -> float:
        self._check_joint_vector(q, "q")
        return 0.0

    @property
    def c0_max(self) -> float:
        return 0.0

    @property
    def dissipation(self) -> np.ndarray:
        return np.array([[self.damping]])

    def design_grid(self) -> np.ndarray:
        return np.zeros((1, 1))


def inertia_solver(m: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """Return a solver for M x = rhs after a conditioning check."""
    if m.shape == (2, 2):
        a, b, c = m[0, 0], m[0, 1], m[1, 1]
        tr = a + c
        disc = math.sqrt(max((a - c) ** 2 + 4.0 * b * b, 0.0))
        lam_min = 0.5 * (tr - disc)
        lam_max = 0.5 * (tr + disc)
        if lam_min <= 0.0 or lam_max > INERTIA_COND_LIMIT * lam_min:
            raise SingularInertiaError(
                f"inertia matrix is numerically singular (eigs {lam_min:g}, {lam_max:g})")
        det = a * c - b * b

        def solve(rhs: np.ndarray) -> np.ndarray:
            return np.array([(c * rhs[0] - b * rhs[1]) / det,
                             (a * rhs[1] - b * rhs[0]) / det])

        return solve

    w = np.linalg.eigvalsh(m)
    if w[0] <= 0.0 or w[-1] > INERTIA_COND_LIMIT * w[0]:
        raise SingularInertiaError(
            f"inertia matrix is numerically singular (eigs {w[0]:g}, {w[-1]:g})")
    return lambda rhs: np.linalg.solve(m, rhs)


def forward_dynamics(model: RobotModel, state: PlantState, tau: np.ndarray) -> PlantState:
    """Plant state derivative (x2, acceleration) under applied torque tau."""
    tau = model._check_joint_vector(tau, "tau")
    x1 = model._check_joint_vector(state.x1, "x1")
    x2 = model._check_joint_vector(state.x2, "x2")
    solve = inertia_solver(model.inertia(x1))
    rhs = tau - model.coriolis(x1, x2) @ x2 - model.dissipation @ x2 - model.gravity(x1)
    return PlantState(x2.copy(), solve(rhs))


class GridTables(NamedTuple):
    """Per-grid-row inertia eigenvalue range and Coriolis bound."""

    lam_min: np.ndarray
    lam_max: np.ndarray
    c0: np.ndarray


def grid_tables(model: RobotModel) -> GridTables:
    """Evaluate eigenvalue and c0 tables over the model's design grid."""
    grid = model.design_grid()
    m = grid.shape[0]
    lam_min = np.empty(m)
    lam_max = np.empty(m)
    c0 = np.empty(m)
    for i in range(m):
        q = grid[i]
        w = np.linalg.eigvalsh(model.inertia(q))
        lam_min[i] = w[0]
        lam_max[i] = w[-1]
        c0[i] = model.c0_bound(q)
    return GridTables(lam_min, lam_max, c0)


def spectral_bounds(model: RobotModel) -> tuple[float, float]:
    """Constants (lambda1, lambda2) with lambda1 ||e||^2 <= e^T M(q) e / 2 <= lambda2 ||e||^2."""
    tables = grid_tables(model)
    lambda1 = 0.5 * float(tables.lam_min.min())
    lambda2 = 0.5 * float(tables.lam_max.max())
    return lambda1, lambda2


def total_energy(model: RobotModel, state: PlantState) -> float:
    """Kinetic plus potential energy of the plant."""
    m = model.inertia(state.x1)
    return 0.5 * float(state.x2 @ m @ state.x2) + model.potential(state.x1)
