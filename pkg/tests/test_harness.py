import json
import math

import numpy as np
import pytest
from scipy.integrate import quad

from locomimic.errors import InvalidParameterError
from locomimic.gait import BUILTIN_GAITS
from locomimic.harness import (RUN_COLUMNS, Disturbance, HarnessConfig, RandomizationConfig, RunLog, cone_mean_angle,
                               plant_step, receding_horizon_run, recovery_time, reward_breakdown_csv,
                               run_log_csv, run_summary_json, sample_cone, sample_randomization, smoothed,
                               tracking_metrics)
from locomimic.ocp import ControlLayout, make_problem, solve_ocp
from locomimic.vhipm import ControlInput, PendulumState

TROT = BUILTIN_GAITS["trot"]


@pytest.fixture(scope="module")
def pushed_run():
    return receding_horizon_run((0, 0, 0), TROT, 3.0, [Disturbance(1.0, (0.0, 0.5, 0.0))])


def test_plant_reproduces_ocp_rollout():
    p = make_problem(BUILTIN_GAITS["pace"], [0, 0, 0.32], [0.3, 0, 0], (0.3, 0, 0), dt=0.02, n_steps=25)
    U, X, _ = solve_ocp(p)
    lay = ControlLayout(p)
    s = PendulumState(p.r0, p.v0)
    for k in range(p.n_steps):
        support = np.array([p.foot_positions[leg] if src < 0 else U.footholds[src]
                            for leg, src in zip(lay.stance[k], lay.source[k])]).reshape(-1, 3)
        s = plant_step(s, ControlInput(U.h_ddot[k], U.weights[k]), support, dt=0.02)
        np.testing.assert_allclose(s.r, X[k], atol=1e-9)


def test_plant_impulse_adds_velocity():
    s = PendulumState([0, 0, 1.0], [0.1, 0, 0])
    a = plant_step(s, ControlInput(0, []), [], disturbance=[0, 0.5, 0], dt=0.02)
    b = plant_step(PendulumState([0, 0, 1.0], [0.1, 0.5, 0]), ControlInput(0, []), [], dt=0.02)
    np.testing.assert_allclose(a.r, b.r, atol=1e-15)
    np.testing.assert_allclose(a.v, [0.1, 0.5, -9.81 * 0.02], atol=1e-12)


def test_plant_rejects_bad_dt():
    with pytest.raises(InvalidParameterError):
        plant_step(PendulumState([0, 0, 1], [0, 0, 0]), ControlInput(0, []), [], dt=-1)


def test_randomization_within_ranges(rng):
    cfg = RandomizationConfig()
    for _ in range(100_000):
        d = sample_randomization(cfg, rng)
        assert np.all(np.abs(d.linear_impulse) <= 1.5)
        assert np.all(np.abs(d.angular_impulse) <= 1.5)
        assert 0.5 <= d.friction <= 1.25
        assert 0.0 <= d.perlin_frequency <= 0.9
        assert 0.0 <= d.perlin_magnitude <= 0.1
        assert d.latency == 0.03
        tilt = math.acos(-d.gravity_direction[2])
        assert tilt <= math.radians(10) + 1e-12
        assert np.linalg.norm(d.gravity_direction) == pytest.approx(1.0)


def test_randomization_seeded():
    a = sample_randomization(RandomizationConfig(), np.random.default_rng(5))
    b = sample_randomization(RandomizationConfig(), np.random.default_rng(5))
    np.testing.assert_array_equal(a.linear_impulse, b.linear_impulse)
    assert a.terrain_seed == b.terrain_seed


def test_randomization_config_validation():
    with pytest.raises(InvalidParameterError):
        RandomizationConfig(friction=(1.0, 0.5))
    with pytest.raises(InvalidParameterError):
        RandomizationConfig(latency=-0.1)


@pytest.mark.parametrize("deg", [5.0, 10.0, 45.0])
def test_cone_uniform_over_cap(deg, rng):
    a = math.radians(deg)
    # uniform on the cap: density of the polar angle is proportional to sin(theta)
    num, _ = quad(lambda t: t * math.sin(t), 0, a)
    den, _ = quad(math.sin, 0, a)
    assert cone_mean_angle(a) == pytest.approx(num / den, rel=1e-12)
    ang = np.array([math.acos(min(1.0, -sample_cone(a, rng)[2])) for _ in range(20000)])
    assert ang.max() <= a + 1e-12
    assert ang.mean() == pytest.approx(num / den, rel=0.02)


def test_smoothed_matches_trailing_mean():
    x = np.array([1.0, 3.0, 2.0, 8.0, 0.0, 4.0])
    expect = [1.0, 2.0, 2.0, 13 / 3, 10 / 3, 4.0]
    np.testing.assert_allclose(smoothed(x, 3), expect)
    np.testing.assert_array_equal(smoothed(x, 1), x)


def test_recovery_time_cases():
    t = np.arange(10) * 0.1
    err = np.array([0.0, 0.0, 0.3, 0.2, 0.1, 0.04, 0.02, 0.06, 0.03, 0.01])
    # last crossing is between t=0.7 (0.06) and t=0.8 (0.03): 0.7 + 1/3 * 0.1
    assert recovery_time(t, err, 0.2, 0.05) == pytest.approx(0.7 + 0.1 / 3 - 0.2)
    # stopping at t_end=0.7 uses the earlier crossing
    assert recovery_time(t, err, 0.2, 0.05, t_end=0.7) == pytest.approx(0.4 + 0.1 * 0.05 / 0.06 - 0.2)
    assert recovery_time(t, np.zeros(10), 0.2, 0.05) == 0.0
    assert math.isinf(recovery_time(t, np.full(10, 1.0), 0.2, 0.05))
    assert math.isinf(recovery_time(t, err, 5.0, 0.05))


def test_unpushed_trot_in_place_is_exact():
    log = receding_horizon_run((0, 0, 0), TROT, 1.5)
    assert np.max(log.velocity_error()) < 1e-9
    assert log.degraded_steps() == 0


def test_push_recovery(pushed_run):
    m = tracking_metrics(pushed_run)
    assert not pushed_run.singularity
    assert pushed_run.degraded_steps() == 0
    err = pushed_run.velocity_error()
    k = int(round(1.0 / 0.02))
    assert err[k] == pytest.approx(0.5, abs=1e-9)  # the impulse is logged at its step
    assert m["recovery_times"][0] < 2.0
    assert len(pushed_run.disturbances) == 1


def test_forward_tracking():
    log = receding_horizon_run((0.5, 0, 0), TROT, 4.0)
    m = tracking_metrics(log, skip=TROT.period)
    assert m["mean_velocity_error"] <= 0.05
    assert m["mean_velocity"][0] == pytest.approx(0.5, rel=0.05)
    assert m["height_rmse"] < 0.02
    assert m["mean_rewards"]["velocity"] > 0.9


def test_latency_run_survives_push():
    cfg = HarnessConfig(latency=0.03)
    log = receding_horizon_run((0, 0, 0), TROT, 3.0, [Disturbance(1.0, (0.0, 0.5, 0.0))], cfg)
    assert not log.singularity
    assert tracking_metrics(log)["recovery_times"][0] < 2.0


def test_run_is_deterministic():
    a = receding_horizon_run((0.3, 0, 0.2), BUILTIN_GAITS["bound"], 1.0, [Disturbance(0.5, (0.2, 0, 0))])
    b = receding_horizon_run((0.3, 0, 0.2), BUILTIN_GAITS["bound"], 1.0, [Disturbance(0.5, (0.2, 0, 0))])
    assert run_log_csv(a) == run_log_csv(b)


def test_exports(pushed_run):
    lines = run_log_csv(pushed_run).splitlines()
    assert lines[0].split(",") == RUN_COLUMNS
    assert len(lines) == pushed_run.n_steps + 1
    k = int(round(1.0 / 0.02))
    row = dict(zip(RUN_COLUMNS, lines[k + 1].split(",")))
    assert float(row["impulse_y"]) == 0.5
    rew = reward_breakdown_csv(pushed_run).splitlines()
    assert rew[0].startswith("time,") and "total" in rew[0]
    summary = json.loads(run_summary_json(pushed_run))
    assert summary["steps"] == 150
    assert summary["disturbances"][0]["linear"] == [0.0, 0.5, 0.0]


def test_summary_maps_unrecovered_to_null():
    log = receding_horizon_run((0, 0, 0), TROT, 0.4, [Disturbance(0.3, (0.0, 0.5, 0.0))])
    assert json.loads(run_summary_json(log))["recovery_times"] == [None]


def test_metrics_argument_checks(pushed_run):
    with pytest.raises(InvalidParameterError):
        tracking_metrics(pushed_run, command=(1.0, 0, 0))
    with pytest.raises(InvalidParameterError):
        receding_horizon_run((0, 0, 0), TROT, 0.0)


def test_plant_reference_cases():
    foot = np.array([[0.0, 0.0, 0.0]])
    s = PendulumState([0, 0, 0.32], [0, 0, 0])
    nxt = plant_step(s, ControlInput(0.0, [1.0]), foot)
    np.testing.assert_array_equal(nxt.r, s.r)
    np.testing.assert_array_equal(nxt.v, s.v)
    kicked = plant_step(s, ControlInput(0.0, [1.0]), foot, disturbance=[0.5, 0, 0])
    # the CoM starts over the foot, so the step adds no horizontal acceleration
    assert kicked.v[0] == pytest.approx(0.5, abs=1e-13)
    fly = PendulumState([0, 0, 0.5], [0.3, -0.2, 1.0])
    for _ in range(25):
        fly = plant_step(fly, ControlInput(7.0, []), [])
        assert fly.v[0] == pytest.approx(0.3, abs=1e-14) and fly.v[1] == pytest.approx(-0.2, abs=1e-14)


def test_zero_command_drift():
    log = receding_horizon_run((0, 0, 0), TROT, 5.0)
    drift = np.linalg.norm(log.base_pos[-1, :2] - log.base_pos[0, :2])
    assert drift <= 0.05


def _synthetic_log(n=100, dt=0.02, vel=None, z=0.32, disturbances=()):
    times = dt * np.arange(n)
    vel = np.zeros((n + 1, 3)) if vel is None else vel
    pos = np.zeros((n + 1, 3))
    pos[:, 2] = z
    return RunLog(dt=dt, command=(0.0, 0.0, 0.0), gait="trot", times=times, base_pos=pos, base_vel=vel,
                  h_ddot=np.zeros(n), cop=np.zeros((n, 3)), feet=np.zeros((n, 4, 3)),
                  contact=np.ones((n, 4), bool), ref_vel=np.zeros((n, 3)), ref_height=0.32,
                  disturbances=list(disturbances), rewards=[{"total": 1.0}] * n,
                  reports=[{"converged": True, "iterations": 1}] * n)


def test_metrics_on_synthetic_logs():
    m = tracking_metrics(_synthetic_log())
    assert m["mean_velocity_error"] == 0.0 and m["max_velocity_error"] == 0.0 and m["height_rmse"] == 0.0
    m = tracking_metrics(_synthetic_log(z=0.34))
    assert m["height_rmse"] == pytest.approx(0.02, abs=1e-15)


def test_recovery_on_exponential_return():
    # error 0.5 exp(-(t - 1) / tau) after a push at t = 1: analytic crossing at tau ln(10)
    n, dt, tau = 200, 0.02, 0.3
    t = dt * np.arange(n + 1)
    vel = np.zeros((n + 1, 3))
    after = t >= 1.0 - 1e-12
    vel[after, 1] = 0.5 * np.exp(-(t[after] - 1.0) / tau)
    log = _synthetic_log(n, dt, vel, disturbances=[Disturbance(1.0, (0.0, 0.5, 0.0))])
    rt = tracking_metrics(log, threshold=0.05)["recovery_times"][0]
    exact = tau * math.log(10.0)
    # linear interpolation of a convex curve overshoots by at most one sample
    assert exact <= rt <= exact + dt
    assert rt == pytest.approx(exact, abs=2e-3)
