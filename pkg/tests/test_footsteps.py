import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from locomimic.footsteps import command_path, raibert_foothold, rot2, swing_trajectory
from locomimic.terrain import HeightField


def _numeric_path(command, t, n=20000):
    vx, vy, wz = command
    dt = t / n
    xy = np.zeros(2)
    for i in range(n):
        yaw = wz * (i + 0.5) * dt  # midpoint rule
        xy += rot2(yaw) @ np.array([vx, vy]) * dt
    return xy


@pytest.mark.parametrize("command", [(0.5, 0.0, 0.0), (0.5, 0.1, 0.8), (-0.3, 0.2, -1.2)])
def test_command_path_matches_quadrature(command):
    xy, yaw = command_path((0.0, 0.0), 0.0, command, 1.3)
    np.testing.assert_allclose(xy, _numeric_path(command, 1.3), atol=1e-7)
    assert yaw == pytest.approx(command[2] * 1.3)


def test_command_path_continuous_at_zero_yaw_rate():
    a, _ = command_path((0, 0), 0.3, (0.5, 0.1, 1e-9), 2.0)
    b, _ = command_path((0, 0), 0.3, (0.5, 0.1, 0.0), 2.0)
    np.testing.assert_allclose(a, b, atol=1e-8)


def test_raibert_rule():
    f = raibert_foothold([0.19, 0.13, 0.0], [0.6, 0.0, 0.0], [0.5, 0.0, 0.0], 0.25, gain=0.03)
    np.testing.assert_allclose(f, [0.19 + 0.5 * 0.25 * 0.5 + 0.03 * 0.1, 0.13, 0.0])


def test_raibert_uses_terrain_height():
    hf = HeightField(np.full((3, 3), 0.07), 1.0, (-1.0, -1.0))
    f = raibert_foothold([0.0, 0.0, 0.0], [0, 0, 0], [0, 0, 0], 0.2, terrain=hf)
    assert f[2] == pytest.approx(0.07)


def test_raibert_rejects_zero_stance():
    with pytest.raises(ValueError):
        raibert_foothold([0, 0, 0], [0, 0, 0], [0, 0, 0], 0.0)


def test_swing_endpoints_and_apex():
    a, b = np.array([0.0, 0.0, 0.0]), np.array([0.1, 0.02, 0.03])
    np.testing.assert_allclose(swing_trajectory(a, b, 0.0), a, atol=1e-15)
    np.testing.assert_allclose(swing_trajectory(a, b, 1.0), b, atol=1e-15)
    assert swing_trajectory(a, b, 0.5)[2] == pytest.approx(0.03 + 0.08)


@given(st.floats(0.0, 1.0))
def test_swing_stays_above_both_feet_planar_segment(p):
    a, b = np.array([0.0, 0.0, 0.0]), np.array([0.1, 0.0, 0.0])
    q = swing_trajectory(a, b, p)
    assert q[2] >= -1e-15
    assert -1e-15 <= q[0] <= 0.1 + 1e-15


def test_swing_zero_velocity_at_ends():
    a, b = np.array([0.0, 0.0, 0.0]), np.array([0.1, 0.0, 0.0])
    h = 1e-6
    v0 = (swing_trajectory(a, b, h) - a) / h
    v1 = (b - swing_trajectory(a, b, 1 - h)) / h
    assert np.max(np.abs(v0)) < 1e-4 and np.max(np.abs(v1)) < 1e-4


def test_rot2_is_rotation():
    R = rot2(0.7)
    np.testing.assert_allclose(R @ R.T, np.eye(2), atol=1e-15)
    assert np.linalg.det(R) == pytest.approx(1.0)
    np.testing.assert_allclose(R @ [1, 0], [math.cos(0.7), math.sin(0.7)])


def test_raibert_reference_values():
    hip = np.array([0.19, -0.13, 0.0])
    np.testing.assert_allclose(raibert_foothold(hip, [0, 0, 0], [0, 0, 0], 0.25), hip)
    f = raibert_foothold(hip, [0.5, 0, 0], [0.5, 0, 0], 0.25)
    np.testing.assert_allclose(f - hip, [0.0625, 0, 0], atol=1e-15)
    # pure velocity error: offset gain * error along the error direction
    f = raibert_foothold(hip, [0.0, 0.2, 0], [0, 0, 0], 0.25, gain=0.03)
    np.testing.assert_allclose(f - hip, [0, 0.006, 0], atol=1e-15)
