"""Fixed-step integration of the coupled plant / observer / switching system.

The plant and the enabled observers are integrated jointly with classical
RK4.  The switching logic is evaluated at step boundaries only; when a jump
changes the scheduled gain, the observer's internal state z is re-based so
that the velocity estimate xhat2 = z + k y stays continuous across the jump.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .dynamics import PlantState, RobotModel, inertia_solver
from .hybrid_logic import (GainSchedule, HybridConfig, LogicState,
                           initialize_logic, step_logic, velocity_sandwich)
from .observers import GainDesign, compute_k0

OBSERVER_MODES = ("reduced", "full", "both")
GAIN_MODES = ("constant", "scheduled")

# Abort threshold for any integrated state component.
BLOWUP_LIMIT = 1e6

CSV_COLUMNS = ("t", "q1", "q2", "dq1", "dq2", "dq1_hat", "dq2_hat",
               "eps_norm", "V", "r", "k_r", "tau1", "tau2",
               "lower_bound", "upper_bound")


class ScenarioError(ValueError):
    """Invalid or inconsistent scenario configuration."""


class SimulationBlowUp(RuntimeError):
    """State left the numerically meaningful range during integration."""


class JumpEvent(NamedTuple):
    """One logic jump: when, from which mode to which, at what estimate norm."""

    time: float
    old_r: int
    new_r: int
    est_norm: float
    step: int


@dataclass(eq=False)
class Scenario:
    """Everything needed to reproduce one simulation run."""

    name: str
    model: RobotModel
    q0: np.ndarray
    v0: np.ndarray
    xhat2_0: np.ndarray
    controller: object
    observer_mode: str = "reduced"
    gain_mode: str = "constant"
    eta: float = 1.0
    v_max: float | None = None
    hybrid: HybridConfig | None = None
    r_guess: int = 0
    dt: float = 1e-3
    t_final: float = 10.0
    k0_override: float | None = None

    def __post_init__(self):
        self.q0 = np.asarray(self.q0, dtype=float)
        self.v0 = np.asarray(self.v0, dtype=float)
        self.xhat2_0 = np.asarray(self.xhat2_0, dtype=float)

    def validate(self) -> None:
        n = self.model.n
        for name, vec in (("q0", self.q0), ("v0", self.v0), ("xhat2_0", self.xhat2_0)):
            if vec.shape != (n,):
                raise ScenarioError(f"{name} must have shape ({n},)")
            if not np.all(np.isfinite(vec)):
                raise ScenarioError(f"{name} must be finite")
        if self.observer_mode not in OBSERVER_MODES:
            raise ScenarioError(f"observer_mode must be one of {OBSERVER_MODES}")
        if self.gain_mode not in GAIN_MODES:
            raise ScenarioError(f"gain_mode must be one of {GAIN_MODES}")
        if not (self.dt > 0.0 and math.isfinite(self.dt)):
            raise ScenarioError("dt must be positive and finite")
        if self.t_final < self.dt:
            raise ScenarioError("t_final must be at least one step")
        if self.eta <= 0.0:
            raise ScenarioError("eta must be positive")
        if self.gain_mode == "constant":
            if self.v_max is None:
                raise ScenarioError("constant gain mode requires v_max")
            if self.v_max < 0.0:
                raise ScenarioError("v_max must be nonnegative")
        else:
            if self.hybrid is None:
                raise ScenarioError("scheduled gain mode requires a hybrid config")
            if self.observer_mode == "full":
                raise ScenarioError(
                    "scheduled gain applies to the reduced observer; "
                    "use observer_mode 'reduced' or 'both'")
            if self.hybrid.eta != self.eta:
                raise ScenarioError("hybrid config eta must match scenario eta")
            if self.r_guess < self.hybrid.r_min:
                raise ScenarioError("r_guess must not be below r_min")
        if self.k0_override is not None and self.k0_override <= 0.0:
            raise ScenarioError("k0_override must be positive")

    def sample_count(self) -> int:
        # floor(t_final / dt) + 1 samples; the tiny slack avoids losing the
        # final sample to floating-point truncation of exact divisors.
        return int(math.floor(self.t_final / self.dt + 1e-9)) + 1


@dataclass(eq=False)
class Trajectory:
    """Sampled run of one scenario, one row per integrator step."""

    t: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    eps_norm: np.ndarray
    v_lyap: np.ndarray
    r: np.ndarray
    k_gain: np.ndarray
    tau: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    active: str = "reduced"
    xhat2_reduced: np.ndarray | None = None
    xhat2_full: np.ndarray | None = None
    z: np.ndarray | None = None
    jump_events: list[JumpEvent] = field(default_factory=list)
    scenario: Scenario | None = None
    design: GainDesign | None = None

    @property
    def xhat2(self) -> np.ndarray:
        """Estimate of the active observer (reduced when present)."""
        est = self.xhat2_reduced if self.active == "reduced" else self.xhat2_full
        if est is None:
            raise ValueError("active observer estimate is missing")
        return est

    def eps_norm_for(self, which: str) -> np.ndarray:
        """Velocity-error norm history of the requested observer."""
        est = {"reduced": self.xhat2_reduced, "full": self.xhat2_full}[which]
        if est is None:
            raise ValueError(f"trajectory has no {which} observer")
        return np.linalg.norm(self.x2 - est, axis=1)

    def to_csv(self, path) -> None:
        """Write the fixed 15-column schema with 17 significant digits."""
        if self.x1.shape[1] != 2:
            raise ScenarioError("the CSV schema is defined for two-joint models")
        est = self.xhat2
        with open(path, "w", newline="") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for i in range(self.t.shape[0]):
                vals = (self.t[i], self.x1[i, 0], self.x1[i, 1],
                        self.x2[i, 0], self.x2[i, 1], est[i, 0], est[i, 1],
                        self.eps_norm[i], self.v_lyap[i])
                row = [f"{v:.17g}" for v in vals]
                row.append(str(int(self.r[i])))
                vals2 = (self.k_gain[i], self.tau[i, 0], self.tau[i, 1],
                         self.lower[i], self.upper[i])
                row.extend(f"{v:.17g}" for v in vals2)
                fh.write(",".join(row) + "\n")

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        """Parse a file written by to_csv back into a trajectory."""
        with open(path) as fh:
            header = fh.readline().strip().split(",")
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header: {header}")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if data.shape[1] != len(CSV_COLUMNS):
            raise ValueError("unexpected CSV column count")
        t = data[:, 0]
        est = data[:, 5:7]
        r = data[:, 9].astype(int)
        # the logic jumps at most once per step, so changes between rows
        # recover the flow-phase events; time-zero initialization jumps
        # happen before the first sample and are not in the file
        events = [
            JumpEvent(float(t[i]), int(r[i - 1]), int(r[i]),
                      float(np.linalg.norm(est[i])), int(i))
            for i in np.flatnonzero(np.diff(r)) + 1
        ]
        return cls(
            t=t, x1=data[:, 1:3], x2=data[:, 3:5],
            xhat2_reduced=est, eps_norm=data[:, 7], v_lyap=data[:, 8],
            r=r, k_gain=data[:, 10], tau=data[:, 11:13],
            lower=data[:, 13], upper=data[:, 14], active="reduced",
            jump_events=events)


def simulate(scenario: Scenario) -> Trajectory:
    """Integrate one scenario and record every sample."""
    scenario.validate()
    model = scenario.model
    n = model.n
    use_red = scenario.observer_mode in ("reduced", "both")
    use_full = scenario.observer_mode in ("full", "both")
    controller = scenario.controller
    dt = scenario.dt
    eta = scenario.eta
    f_mat = model.dissipation

    # Spectral constants and the constant-mode gain; in scheduled mode the
    # design speed bound of the starting band keeps the record meaningful.
    if scenario.v_max is not None:
        design_v = scenario.v_max
    else:
        design_v = scenario.hybrid.v_bar * max(scenario.r_guess, 1)
    design = compute_k0(model, eta, design_v)

    schedule = None
    logic = None
    events: list[JumpEvent] = []
    if scenario.gain_mode == "scheduled":
        schedule = GainSchedule(model, scenario.hybrid)
        init_events: list = []
        logic = initialize_logic(scenario.hybrid, schedule, scenario.xhat2_0,
                                 scenario.r_guess, events=init_events)
        for old_r, new_r, nrm in init_events:
            events.append(JumpEvent(0.0, old_r, new_r, nrm, 0))
        k = logic.k_r
        r_rec = logic.r
    else:
        k = scenario.k0_override if scenario.k0_override is not None else design.k0
        r_rec = 0

    kd = k if scenario.k0_override is not None else design.k0
    kp = kd * kd

    # Packed state layout: x1, x2, then z and the full-order states as enabled.
    idx_x1 = slice(0, n)
    idx_x2 = slice(n, 2 * n)
    off = 2 * n
    if use_red:
        idx_z = slice(off, off + n)
        off += n
    if use_full:
        idx_h1 = slice(off, off + n)
        idx_h2 = slice(off + n, off + 2 * n)
        off += 2 * n
    width = off

    s = np.empty(width)
    s[idx_x1] = scenario.q0
    s[idx_x2] = scenario.v0
    if use_red:
        s[idx_z] = scenario.xhat2_0 - k * scenario.q0
    if use_full:
        s[idx_h1] = scenario.q0
        s[idx_h2] = scenario.xhat2_0

    def rhs(t: float, sv: np.ndarray, gain: float):
        x1 = sv[idx_x1]
        x2 = sv[idx_x2]
        est_red = sv[idx_z] + gain * x1 if use_red else None
        fb = est_red if use_red else sv[idx_h2]
        tau = controller.torque(model, x1, fb, t)
        m_q = model.inertia(x1)
        solve = inertia_solver(m_q)
        grav = model.gravity(x1)
        d = np.empty(width)
        d[idx_x1] = x2
        d[idx_x2] = solve(tau - model.coriolis(x1, x2) @ x2 - f_mat @ x2 - grav)
        if use_red:
            d[idx_z] = solve(tau - model.coriolis(x1, est_red) @ est_red
                             - f_mat @ est_red - grav) - gain * est_red
        if use_full:
            e = x1 - sv[idx_h1]
            xh2 = sv[idx_h2]
            d[idx_h1] = xh2 + kd * e
            d[idx_h2] = solve(tau - model.coriolis(x1, xh2) @ xh2
                              - f_mat @ xh2 - grav + kp * e)
        return d, tau, m_q

    n_samples = scenario.sample_count()
    t_arr = np.arange(n_samples) * dt
    x1_arr = np.empty((n_samples, n))
    x2_arr = np.empty((n_samples, n))
    red_arr = np.empty((n_samples, n)) if use_red else None
    full_arr = np.empty((n_samples, n)) if use_full else None
    z_arr = np.empty((n_samples, n)) if use_red else None
    eps_arr = np.empty(n_samples)
    v_arr = np.empty(n_samples)
    r_arr = np.empty(n_samples, dtype=int)
    k_arr = np.empty(n_samples)
    tau_arr = np.empty((n_samples, n))
    lo_arr = np.empty(n_samples)
    hi_arr = np.empty(n_samples)
    active = "reduced" if use_red else "full"

    half = 0.5 * dt
    sixth = dt / 6.0
    for i in range(n_samples):
        t = t_arr[i]
        d1, tau_i, m_q = rhs(t, s, k)

        x1_i = s[idx_x1]
        x2_i = s[idx_x2]
        x1_arr[i] = x1_i
        x2_arr[i] = x2_i
        if use_red:
            z_i = s[idx_z]
            z_arr[i] = z_i
            red_arr[i] = z_i + k * x1_i
        if use_full:
            full_arr[i] = s[idx_h2]
        est = red_arr[i] if use_red else full_arr[i]
        eps = x2_i - est
        eps_arr[i] = math.sqrt(float(eps @ eps))
        v_arr[i] = 0.5 * float(eps @ m_q @ eps)
        r_arr[i] = r_rec
        k_arr[i] = k
        tau_arr[i] = tau_i
        lo_arr[i], hi_arr[i] = velocity_sandwich(eta, est)

        if i == n_samples - 1:
            break

        d2, _, _ = rhs(t + half, s + half * d1, k)
        d3, _, _ = rhs(t + half, s + half * d2, k)
        d4, _, _ = rhs(t + dt, s + dt * d3, k)
        s = s + sixth * (d1 + 2.0 * d2 + 2.0 * d3 + d4)

        if not np.all(np.isfinite(s)) or np.max(np.abs(s)) > BLOWUP_LIMIT:
            raise SimulationBlowUp(
                f"state component left |x| <= {BLOWUP_LIMIT:g} at t = {t + dt:.6f}")

        if logic is not None:
            y_new = s[idx_x1]
            est_new = s[idx_z] + k * y_new
            stepped = step_logic(scenario.hybrid, schedule, logic, est_new, t + dt)
            if stepped.r != logic.r:
                events.append(JumpEvent(t + dt, logic.r, stepped.r,
                                        float(np.linalg.norm(est_new)), i + 1))
                # re-base z so the estimate is continuous across the gain change
                s[idx_z] = est_new - stepped.k_r * y_new
                k = stepped.k_r
                r_rec = stepped.r
            logic = stepped

    return Trajectory(
        t=t_arr, x1=x1_arr, x2=x2_arr, eps_norm=eps_arr, v_lyap=v_arr,
        r=r_arr, k_gain=k_arr, tau=tau_arr, lower=lo_arr, upper=hi_arr,
        active=active, xhat2_reduced=red_arr, xhat2_full=full_arr, z=z_arr,
        jump_events=events, scenario=scenario, design=design)


def builtin_scenarios() -> dict[str, Scenario]:
    """The three reference scenarios on the default two-link arm."""
    from .dynamics import TwoLinkArm
    from .controllers import OpenLoopBounded, OpenLoopUnbounded, PdConfig, PdGravity

    arm = TwoLinkArm()
    q0 = np.array([-2.0 * np.pi / 3.0, np.pi / 10.0])
    v0 = np.array([-0.5, 1.0])
    est0 = np.zeros(2)
    hybrid = HybridConfig(v_bar=1.5, eta=1.0, semantics="paper_faithful", r_min=1)
    pd = PdConfig(kp=[40.0, 20.0], kd=[60.0, 30.0],
                  x_ref=[np.pi / 4.0, -np.pi / 3.0])
    return {
        "example1": Scenario(
            name="example1", model=arm, q0=q0, v0=v0, xhat2_0=est0,
            controller=OpenLoopBounded(), observer_mode="both",
            gain_mode="constant", eta=1.0, v_max=1.5, dt=1e-3, t_final=20.0),
        "example2": Scenario(
            name="example2", model=arm, q0=q0, v0=v0, xhat2_0=est0,
            controller=OpenLoopUnbounded(), observer_mode="reduced",
            gain_mode="scheduled", eta=1.0, hybrid=hybrid, r_guess=1,
            dt=1e-3, t_final=20.0),
        "example3": Scenario(
            name="example3", model=arm, q0=q0, v0=v0, xhat2_0=est0,
            controller=PdGravity(pd), observer_mode="reduced",
            gain_mode="scheduled", eta=1.0, hybrid=hybrid, r_guess=1,
            dt=1e-3, t_final=20.0),
    }
