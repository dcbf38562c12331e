"""Scenario validation, integration invariants, and CSV round trips."""
from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest

from velobs.controllers import ConstantTorque, OpenLoopBounded, PdGravity
from velobs.dynamics import SingleLinkModel, TwoLinkArm
from velobs.hybrid_logic import GainSchedule, HybridConfig
from velobs.simulator import (
    Scenario,
    ScenarioError,
    SimulationBlowUp,
    Trajectory,
    builtin_scenarios,
    simulate,
)


def make_scenario(arm, **kwargs) -> Scenario:
    base = dict(
        name="unit", model=arm, q0=np.array([0.2, -0.4]),
        v0=np.array([0.1, 0.0]), xhat2_0=np.zeros(2),
        controller=ConstantTorque(np.zeros(2)), observer_mode="reduced",
        gain_mode="constant", eta=1.0, v_max=1.5, dt=1e-3, t_final=0.05)
    base.update(kwargs)
    return Scenario(**base)


def test_validation_rejects_bad_scenarios(arm):
    hybrid = HybridConfig(v_bar=1.5, eta=1.0, r_min=1)
    bad = [
        dict(q0=np.zeros(3)),
        dict(v0=np.array([np.nan, 0.0])),
        dict(observer_mode="kalman"),
        dict(gain_mode="adaptive"),
        dict(dt=0.0),
        dict(dt=np.inf),
        dict(t_final=5e-4),
        dict(eta=0.0),
        dict(v_max=None),
        dict(v_max=-1.0),
        dict(gain_mode="scheduled", v_max=None),
        dict(gain_mode="scheduled", v_max=None, hybrid=hybrid,
             observer_mode="full", r_guess=1),
        dict(gain_mode="scheduled", v_max=None, eta=2.0, hybrid=hybrid,
             r_guess=1),
        dict(gain_mode="scheduled", v_max=None, hybrid=hybrid, r_guess=0),
        dict(k0_override=0.0),
    ]
    for overrides in bad:
        with pytest.raises(ScenarioError):
            make_scenario(arm, **overrides).validate()
    make_scenario(arm).validate()


def test_sample_count_rules(arm):
    assert make_scenario(arm, t_final=10.0).sample_count() == 10001
    assert make_scenario(arm, t_final=1e-3).sample_count() == 2
    assert make_scenario(arm, t_final=0.0015).sample_count() == 2
    # 0.3 / 0.1 is 2.9999... in floats; the count must still include t = 0.3
    assert make_scenario(arm, dt=0.1, t_final=0.3).sample_count() == 4


def test_simulation_is_deterministic(single):
    sc = Scenario(name="det", model=single, q0=np.array([0.3]),
                  v0=np.array([1.2]), xhat2_0=np.array([-0.4]),
                  controller=ConstantTorque([0.7]), observer_mode="both",
                  gain_mode="constant", v_max=2.0, dt=1e-3, t_final=0.2)
    a = simulate(sc)
    b = simulate(sc)
    for field in ("t", "x1", "x2", "eps_norm", "v_lyap", "k_gain",
                  "xhat2_reduced", "xhat2_full", "z"):
        assert np.array_equal(getattr(a, field), getattr(b, field))


def test_rest_equilibrium_is_preserved(arm):
    q0 = np.array([0.4, -1.1])
    sc = make_scenario(arm, q0=q0, v0=np.zeros(2), xhat2_0=np.zeros(2),
                       controller=ConstantTorque(arm.gravity(q0)),
                       t_final=0.5)
    traj = simulate(sc)
    assert np.allclose(traj.x1, q0, atol=1e-10)
    assert np.allclose(traj.x2, 0.0, atol=1e-10)
    assert np.allclose(traj.eps_norm, 0.0, atol=1e-10)


def test_initial_sample_matches_scenario(arm):
    sc = make_scenario(arm, xhat2_0=np.array([0.3, -0.2]))
    traj = simulate(sc)
    assert traj.t[0] == 0.0
    assert np.array_equal(traj.x1[0], sc.q0)
    assert np.array_equal(traj.x2[0], sc.v0)
    assert np.allclose(traj.xhat2_reduced[0], sc.xhat2_0, atol=1e-12)
    assert traj.t.shape[0] == sc.sample_count()
    assert traj.t[-1] == pytest.approx(sc.t_final)


def test_full_order_initialization(example1_traj):
    sc = example1_traj.scenario
    assert np.allclose(example1_traj.xhat2_full[0], sc.xhat2_0)


def test_estimate_is_consistent_with_internal_state(example1_traj):
    traj = example1_traj
    rebuilt = traj.z + traj.k_gain[:, None] * traj.x1
    assert np.array_equal(rebuilt, traj.xhat2_reduced)


def test_scheduled_gain_tracks_logic_state(example2_traj):
    traj = example2_traj
    schedule = GainSchedule(traj.scenario.model, traj.scenario.hybrid)
    expected = np.array([schedule.gain(int(r)) for r in traj.r])
    assert np.array_equal(traj.k_gain, expected)


def test_scheduled_estimate_stays_consistent_across_jumps(example2_traj):
    traj = example2_traj
    rebuilt = traj.z + traj.k_gain[:, None] * traj.x1
    assert np.allclose(rebuilt, traj.xhat2_reduced, atol=1e-12)


def test_jumps_rebase_internal_state_for_continuity(example2_traj):
    traj = example2_traj
    est = traj.xhat2_reduced
    dt_moves = np.linalg.norm(np.diff(est, axis=0), axis=1)
    assert traj.jump_events, "scenario is expected to switch modes"
    for ev in traj.jump_events:
        if ev.step == 0:
            continue
        k_old = traj.k_gain[ev.step - 1]
        k_new = traj.k_gain[ev.step]
        gap = abs(k_new - k_old) * np.linalg.norm(traj.x1[ev.step])
        assert gap > 0.5          # without re-basing this would be the glitch
        assert dt_moves[ev.step - 1] < 0.2 * gap


def test_initialization_jumps_are_recorded(arm):
    sc = make_scenario(
        arm, xhat2_0=np.array([10.5, 0.0]), gain_mode="scheduled", v_max=None,
        hybrid=HybridConfig(v_bar=3.0, eta=1.0), r_guess=0, t_final=1e-3)
    traj = simulate(sc)
    assert [(ev.old_r, ev.new_r) for ev in traj.jump_events[:4]] == [
        (0, 1), (1, 2), (2, 3), (3, 4)]
    assert all(ev.time == 0.0 and ev.step == 0 for ev in traj.jump_events[:4])
    assert traj.r[0] == 4


def test_blow_up_detection(arm):
    sc = make_scenario(arm, controller=ConstantTorque([1e9, 1e9]), t_final=5.0)
    with pytest.raises(SimulationBlowUp):
        simulate(sc)


def test_single_link_and_full_only_runs(single):
    sc = Scenario(name="full_only", model=single, q0=np.array([0.3]),
                  v0=np.array([1.2]), xhat2_0=np.array([-0.4]),
                  controller=ConstantTorque([0.7]), observer_mode="full",
                  gain_mode="constant", v_max=2.0, dt=1e-3, t_final=0.3)
    traj = simulate(sc)
    assert traj.active == "full"
    assert traj.xhat2_reduced is None
    assert traj.eps_norm[-1] < traj.eps_norm[0]
    with pytest.raises(ValueError):
        traj.eps_norm_for("reduced")
    with pytest.raises(ScenarioError):
        traj.to_csv("/tmp/should_not_exist.csv")


def test_csv_round_trip_is_exact(arm, tmp_path):
    sc = make_scenario(arm, controller=OpenLoopBounded(), t_final=0.25,
                       xhat2_0=np.array([0.2, -0.1]))
    traj = simulate(sc)
    path = tmp_path / "run.csv"
    traj.to_csv(path)
    back = Trajectory.from_csv(path)
    assert np.array_equal(back.t, traj.t)
    assert np.array_equal(back.x1, traj.x1)
    assert np.array_equal(back.x2, traj.x2)
    assert np.array_equal(back.xhat2_reduced, traj.xhat2_reduced)
    assert np.array_equal(back.eps_norm, traj.eps_norm)
    assert np.array_equal(back.v_lyap, traj.v_lyap)
    assert np.array_equal(back.r, traj.r)
    assert np.array_equal(back.k_gain, traj.k_gain)
    assert np.array_equal(back.tau, traj.tau)
    assert np.array_equal(back.lower, traj.lower)
    assert np.array_equal(back.upper, traj.upper)
    assert back.jump_events == []


def test_csv_reload_reconstructs_jump_events(example2_traj, tmp_path):
    path = tmp_path / "e2.csv"
    example2_traj.to_csv(path)
    back = Trajectory.from_csv(path)
    orig = example2_traj.jump_events
    assert len(back.jump_events) == len(orig) > 0
    assert ([(ev.step, ev.old_r, ev.new_r) for ev in back.jump_events]
            == [(ev.step, ev.old_r, ev.new_r) for ev in orig])
    # event times were accumulated as t + dt, the time column as step * dt
    assert np.allclose([ev.time for ev in back.jump_events],
                       [ev.time for ev in orig], rtol=0.0, atol=1e-12)
    assert np.allclose([ev.est_norm for ev in back.jump_events],
                       [ev.est_norm for ev in orig], rtol=1e-9, atol=0.0)


def test_csv_header_is_checked(arm, tmp_path):
    sc = make_scenario(arm, t_final=0.01)
    path = tmp_path / "run.csv"
    simulate(sc).to_csv(path)
    text = path.read_text().splitlines()
    text[0] = text[0].replace("t,", "time,", 1)
    bad = tmp_path / "bad.csv"
    bad.write_text("\n".join(text) + "\n")
    with pytest.raises(ValueError, match="header"):
        Trajectory.from_csv(bad)


def test_builtin_scenario_parameters():
    scs = builtin_scenarios()
    assert sorted(scs) == ["example1", "example2", "example3"]
    q0 = np.array([-2.0 * np.pi / 3.0, np.pi / 10.0])
    v0 = np.array([-0.5, 1.0])
    for sc in scs.values():
        assert isinstance(sc.model, TwoLinkArm)
        assert np.array_equal(sc.q0, q0)
        assert np.array_equal(sc.v0, v0)
        assert np.array_equal(sc.xhat2_0, np.zeros(2))
        assert sc.dt == 1e-3
        assert sc.t_final == 20.0
        assert sc.eta == 1.0
        sc.validate()

    e1, e2, e3 = scs["example1"], scs["example2"], scs["example3"]
    assert (e1.observer_mode, e1.gain_mode, e1.v_max) == ("both", "constant", 1.5)
    assert e1.controller.name == "open_loop_1"
    assert (e2.observer_mode, e2.gain_mode) == ("reduced", "scheduled")
    assert e2.controller.name == "open_loop_2"
    assert e2.hybrid == HybridConfig(v_bar=1.5, eta=1.0,
                                     semantics="paper_faithful", r_min=1)
    assert e2.r_guess == 1
    assert isinstance(e3.controller, PdGravity)
    assert np.allclose(np.diagonal(e3.controller.config.kp), [40.0, 20.0])
    assert np.allclose(np.diagonal(e3.controller.config.kd), [60.0, 30.0])
    assert np.allclose(e3.controller.config.x_ref, [np.pi / 4.0, -np.pi / 3.0])


def test_floor_mode_start_has_no_init_jumps(example2_traj):
    assert example2_traj.r[0] == 1
    assert all(ev.time > 0.0 for ev in example2_traj.jump_events)
