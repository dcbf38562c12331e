"""Shared fixtures and the acceptance summary hook."""
from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from velobs.controllers import OpenLoopUnbounded
from velobs.dynamics import SingleLinkModel, TwoLinkArm
from velobs.observers import compute_k0
from velobs.simulator import Scenario, builtin_scenarios, simulate

from oracles import TwoLinkOracle

# Tenth of the constant gain designed for a 6 rad/s speed envelope.  Small
# enough that fast elbow motion makes the error dynamics locally unstable,
# which is exactly what the checker must be able to detect.
UNDERSIZED_GAIN = 3.746755075659672

# Initial state for the undersized-gain run: elbow near the destabilizing
# bend, elbow rate close to the envelope, estimate error of norm 0.12
# (inside the guaranteed region, radius ~0.1367) aligned with the locally
# unstable direction of the frozen error system.
SABOTAGE_Q0 = (-2.0943951023931953, 2.4999223540940783)
SABOTAGE_V0 = (0.0, 5.9)
SABOTAGE_XHAT2_0 = (0.11650509617453012, 5.928750001136756)

CRITERIA = {
    1: "structural identities of the arm dynamics hold on random samples",
    2: "free-motion energy balance residuals are within tolerance",
    3: "single-link runs match analytic solutions and RK4 shows 4th order",
    4: "constant-gain run: speed bounded, Lyapunov decrease, both settle, "
       "reduced settles first",
    5: "scheduled run: bound exceeded, observer settles, sandwich holds, "
       "jumps legal, r rises",
    6: "output-feedback run: setpoint reached, observer settles, r ends "
       "constant at the floor",
    7: "undersized-gain control run triggers Lyapunov-decrease violations",
    8: "hysteresis chatter never exceeds default-semantics chatter",
}

_RESULTS: dict[int, bool] = {}


@pytest.fixture(scope="session")
def criterion():
    """Recorder for acceptance outcomes; returns the value it records."""

    def record(number: int, passed: bool) -> bool:
        _RESULTS[number] = bool(passed)
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        if number in _RESULTS:
            verdict = "PASS" if _RESULTS[number] else "FAIL"
        else:
            verdict = "NOT RUN"
        terminalreporter.write_line(
            f"ACCEPTANCE CRITERION {number}: {verdict} - {CRITERIA[number]}")


@pytest.fixture(scope="session")
def arm():
    return TwoLinkArm()


@pytest.fixture(scope="session")
def single():
    return SingleLinkModel(inertia_value=2.5, damping=0.4)


@pytest.fixture(scope="session")
def design15(arm):
    return compute_k0(arm, 1.0, 1.5)


@pytest.fixture(scope="session")
def oracle():
    return TwoLinkOracle()


@pytest.fixture(scope="session")
def example1_traj():
    return simulate(builtin_scenarios()["example1"])


@pytest.fixture(scope="session")
def example2_traj():
    return simulate(builtin_scenarios()["example2"])


@pytest.fixture(scope="session")
def example2_hyst_traj():
    sc = builtin_scenarios()["example2"]
    hyb = dataclasses.replace(sc.hybrid, semantics="hysteresis")
    return simulate(dataclasses.replace(sc, name="example2_hyst", hybrid=hyb))


@pytest.fixture(scope="session")
def example3_traj():
    return simulate(builtin_scenarios()["example3"])


def sabotage_scenario(arm) -> Scenario:
    return Scenario(
        name="negative_control",
        model=arm,
        q0=np.array(SABOTAGE_Q0),
        v0=np.array(SABOTAGE_V0),
        xhat2_0=np.array(SABOTAGE_XHAT2_0),
        controller=OpenLoopUnbounded(),
        observer_mode="reduced",
        gain_mode="constant",
        eta=1.0,
        v_max=6.0,
        dt=1e-3,
        t_final=10.0,
        k0_override=UNDERSIZED_GAIN,
    )


@pytest.fixture(scope="session")
def negative_control_traj(arm):
    return simulate(sabotage_scenario(arm))
