"""Kinematic helpers: command integration, foothold rule and swing-foot arcs."""

from __future__ import annotations

import math

import numpy as np

# nominal hip projections in the yaw frame (m), FL, FR, HL, HR
DEFAULT_HIP_OFFSETS = np.array([
    [0.19, 0.13],
    [0.19, -0.13],
    [-0.19, 0.13],
    [-0.19, -0.13],
])


def rot2(yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s], [s, c]])


def command_velocity_world(command, yaw: float) -> np.ndarray:
    """Planar command (vx, vy) expressed in the world frame for heading ``yaw``."""
    return rot2(yaw) @ np.asarray(command[:2], dtype=float)


def command_path(xy0, yaw0: float, command, t: float) -> tuple[np.ndarray, float]:
    """Closed-form integral of a body-frame velocity command with constant yaw rate.

    Returns the planar position and heading after ``t`` seconds.
    """
    vx, vy, wz = (float(c) for c in command)
    yaw = yaw0 + wz * t
    v = np.array([vx, vy])
    if abs(wz) < 1e-12:
        disp = rot2(yaw0) @ v * t
    else:
        # integral of R(yaw0 + wz s) ds from 0..t
        c0, s0 = math.cos(yaw0), math.sin(yaw0)
        c1, s1 = math.cos(yaw), math.sin(yaw)
        M = np.array([[s1 - s0, c1 - c0], [-(c1 - c0), s1 - s0]]) / wz
        disp = M @ v
    return np.asarray(xy0, dtype=float)[:2] + disp, yaw


def raibert_foothold(hip_nominal, base_velocity, command_velocity, stance_duration: float,
                     gain: float = 0.03, terrain=None, ground_height: float = 0.0) -> np.ndarray:
    """Heuristic foothold: hip projection, half a stance of commanded travel and a velocity-error correction.

    ``hip_nominal`` is the hip position projected on the ground; velocities are
    world-frame and only their planar parts are used.
    """
    if not stance_duration > 0:
        raise ValueError("stance_duration must be > 0")
    hip = np.asarray(hip_nominal, dtype=float)
    v = np.asarray(base_velocity, dtype=float)[:2]
    vc = np.asarray(command_velocity, dtype=float)[:2]
    xy = hip[:2] + 0.5 * stance_duration * vc + gain * (v - vc)
    z = terrain.height_at(xy[0], xy[1]) if terrain is not None else ground_height
    return np.array([xy[0], xy[1], z])


def smoothstep(p):
    return p * p * (3.0 - 2.0 * p)


def swing_trajectory(start, end, progress: float, apex_height: float = 0.08, terrain=None) -> np.ndarray:
    """Swing-foot position at ``progress`` in [0, 1].

    Planar motion follows smoothstep-interpolated progress; the vertical profile
    adds a sine-squared bump so the mid-swing height is ``max(start_z, end_z) +
    apex_height`` and both endpoints are hit exactly with zero velocity.
    """
    p = min(max(float(progress), 0.0), 1.0)
    a = np.asarray(start, dtype=float)
    b = np.asarray(end, dtype=float)
    s = smoothstep(p)
    out = a + s * (b - a)
    top = max(a[2], b[2])
    if terrain is not None:
        mid = 0.5 * (a + b)
        top = max(top, terrain.height_at(mid[0], mid[1]))
    apex = top + apex_height
    out[2] = (1.0 - s) * a[2] + s * b[2] + math.sin(math.pi * p) ** 2 * (apex - 0.5 * (a[2] + b[2]))
    if terrain is not None:
        out[2] = max(out[2], terrain.height_at(out[0], out[1]))
    return out
