"""
Motion-imitation contract: observation vector, multiplicative reward terms,
reference-state initialization and episode termination.

Every reward factor has the form ``exp(-||(x_ref - x) / sigma||^2)``. Vector
sensitivities are given in forward-vertical-sideways order, i.e. they scale the
(x, z, y) components of a vector expressed in the yaw-aligned frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ConfigError, LayoutError
from .gait import N_LEGS
from .synthesis import MotionQueue, ReferenceFrame

# (x, y, z) -> (forward, vertical, sideways)
_FVS = [0, 2, 1]


@dataclass
class RewardConfig:
    base_height: float = 0.05
    base_velocity: tuple[float, float, float] = (0.3, 0.1, 0.3)
    yaw_rate: float = 0.5
    feet_position: tuple[float, float, float] = (0.15, 0.025, 0.15)
    action_rate: float = 1.5
    feet_slip: float = 0.1
    pitch_roll: float = 0.5

    def __post_init__(self):
        self.base_velocity = tuple(float(v) for v in self.base_velocity)
        self.feet_position = tuple(float(v) for v in self.feet_position)
        for f in fields(self):
            v = getattr(self, f.name)
            vals = v if isinstance(v, tuple) else (v,)
            if any(not x > 0 for x in vals):
                raise ConfigError(f"reward sensitivity {f.name} must be > 0, got {v}")


@dataclass
class TerminationConfig:
    min_base_height: float = 0.15
    max_tilt: float = 1.0

    def __post_init__(self):
        if not self.min_base_height >= 0:
            raise ConfigError(f"min_base_height must be >= 0, got {self.min_base_height}")
        if not self.max_tilt > 0:
            raise ConfigError(f"max_tilt must be > 0, got {self.max_tilt}")


@dataclass
class RobotSnapshot:
    """Robot state at one control step.

    ``base_lin_vel`` and ``base_ang_vel`` are expressed in the yaw-aligned frame;
    feet positions and velocities are world-frame.
    """

    base_pos: np.ndarray
    yaw: float
    base_lin_vel: np.ndarray
    base_ang_vel: np.ndarray
    pitch: float = 0.0
    roll: float = 0.0
    gravity_body: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -1.0]))
    joint_pos: np.ndarray = field(default_factory=lambda: np.zeros(12))
    joint_vel: np.ndarray = field(default_factory=lambda: np.zeros(12))
    feet: np.ndarray = field(default_factory=lambda: np.zeros((N_LEGS, 3)))
    foot_contact: np.ndarray = field(default_factory=lambda: np.zeros(N_LEGS, dtype=bool))
    foot_vel: np.ndarray = field(default_factory=lambda: np.zeros((N_LEGS, 3)))
    prev_action: np.ndarray = field(default_factory=lambda: np.zeros(12))
    body_contact: bool = False

    def __post_init__(self):
        self.base_pos = np.asarray(self.base_pos, dtype=float)
        self.base_lin_vel = np.asarray(self.base_lin_vel, dtype=float)
        self.base_ang_vel = np.asarray(self.base_ang_vel, dtype=float)
        self.gravity_body = np.asarray(self.gravity_body, dtype=float)
        self.feet = np.asarray(self.feet, dtype=float).reshape(N_LEGS, 3)
        self.foot_contact = np.asarray(self.foot_contact, dtype=bool)
        self.foot_vel = np.asarray(self.foot_vel, dtype=float).reshape(N_LEGS, 3)
        if abs(np.linalg.norm(self.gravity_body) - 1.0) > 1e-9:
            raise ValueError("gravity_body must be a unit vector")

    @property
    def base_height(self) -> float:
        return float(self.base_pos[2])

    @property
    def yaw_rate(self) -> float:
        return float(self.base_ang_vel[2])


def reward_term(reference, actual, sensitivity) -> float:
    """``exp(-||(reference - actual) / sensitivity||^2)``; vector sensitivities scale per component."""
    s = np.asarray(sensitivity, dtype=float)
    if np.any(s <= 0):
        raise ConfigError(f"sensitivity must be > 0, got {sensitivity}")
    e = (np.asarray(reference, dtype=float) - np.asarray(actual, dtype=float)) / s
    return float(math.exp(-float(np.sum(e * e))))


def to_yaw_frame(vec_world, yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    v = np.asarray(vec_world, dtype=float)
    return np.array([c * v[0] + s * v[1], -s * v[0] + c * v[1], v[2]])


def feet_frame_transform(base_pos, yaw: float, feet_world) -> np.ndarray:
    """Feet relative to the ground-projected base, rotated into the yaw-only frame."""
    feet = np.asarray(feet_world, dtype=float).reshape(-1, 3)
    origin = np.array([base_pos[0], base_pos[1], 0.0])
    c, s = math.cos(yaw), math.sin(yaw)
    R_T = np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])
    return (feet - origin) @ R_T.T


def _fvs(v) -> np.ndarray:
    return np.asarray(v)[..., _FVS]


def imitation_factors(snapshot: RobotSnapshot, ref: ReferenceFrame, cfg: RewardConfig) -> dict[str, float]:
    ref_vel = to_yaw_frame(ref.base_vel, ref.yaw)
    p_ref = feet_frame_transform(ref.base_pos, ref.yaw, ref.feet)
    p_act = feet_frame_transform(snapshot.base_pos, snapshot.yaw, snapshot.feet)
    return {
        "height": reward_term(ref.base_pos[2], snapshot.base_height, cfg.base_height),
        "velocity": reward_term(_fvs(ref_vel), _fvs(snapshot.base_lin_vel), cfg.base_velocity),
        "yaw_rate": reward_term(ref.yaw_rate, snapshot.yaw_rate, cfg.yaw_rate),
        "feet": reward_term(_fvs(p_ref), _fvs(p_act), np.tile(cfg.feet_position, (N_LEGS, 1))),
    }


def imitation_reward(snapshot: RobotSnapshot, ref: ReferenceFrame, cfg: RewardConfig | None = None) -> float:
    f = imitation_factors(snapshot, ref, cfg or RewardConfig())
    return f["height"] * f["velocity"] * f["yaw_rate"] * f["feet"]


def regularizer_factors(snapshot: RobotSnapshot, action, previous_action, cfg: RewardConfig) -> dict[str, float]:
    a = np.asarray(action, dtype=float)
    a_prev = np.asarray(previous_action, dtype=float)
    slip_vel = snapshot.foot_vel[snapshot.foot_contact, :2]
    return {
        "action_rate": reward_term(np.linalg.norm(a - a_prev), 0.0, cfg.action_rate),
        # no feet on the ground: empty product
        "slip": reward_term(slip_vel, np.zeros_like(slip_vel), cfg.feet_slip) if slip_vel.size else 1.0,
        "pitch_roll": reward_term((0.0, 0.0), (snapshot.pitch, snapshot.roll), cfg.pitch_roll),
    }


def regularizer(snapshot: RobotSnapshot, action, previous_action, cfg: RewardConfig | None = None) -> float:
    f = regularizer_factors(snapshot, action, previous_action, cfg or RewardConfig())
    return f["action_rate"] * f["slip"] * f["pitch_roll"]


def reward_breakdown(snapshot, ref, action, previous_action, cfg: RewardConfig | None = None) -> dict[str, float]:
    """All factors plus the imitation, regularizer and total products."""
    cfg = cfg or RewardConfig()
    out = imitation_factors(snapshot, ref, cfg)
    out.update(regularizer_factors(snapshot, action, previous_action, cfg))
    out["imitation"] = out["height"] * out["velocity"] * out["yaw_rate"] * out["feet"]
    out["regularizer"] = out["action_rate"] * out["slip"] * out["pitch_roll"]
    out["total"] = out["imitation"] * out["regularizer"]
    return out


def total_reward(snapshot, ref, action, previous_action, cfg: RewardConfig | None = None) -> float:
    cfg = cfg or RewardConfig()
    return imitation_reward(snapshot, ref, cfg) * regularizer(snapshot, action, previous_action, cfg)


# -- observation ---------------------------------------------------------------------

BLIND_BLOCKS = (
    ("base_height", 1),
    ("gravity_body", 3),
    ("lin_vel", 3),
    ("ang_vel", 3),
    ("joint_pos", 12),
    ("joint_vel", 12),
    ("phase", 8),
    ("command", 3),
    ("prev_action", 12),
)
HEIGHT_SCAN_SHAPE = (7, 11)


@dataclass(frozen=True)
class ObservationLayout:
    perceptive: bool = False

    @property
    def blocks(self) -> tuple[tuple[str, int], ...]:
        if self.perceptive:
            return BLIND_BLOCKS + (("height_scan", HEIGHT_SCAN_SHAPE[0] * HEIGHT_SCAN_SHAPE[1]),)
        return BLIND_BLOCKS

    @property
    def size(self) -> int:
        return sum(n for _, n in self.blocks)

    def slices(self) -> dict[str, slice]:
        out, pos = {}, 0
        for name, n in self.blocks:
            out[name] = slice(pos, pos + n)
            pos += n
        return out

    def split(self, obs) -> dict[str, np.ndarray]:
        obs = np.asarray(obs)
        if obs.shape != (self.size,):
            raise LayoutError(f"observation has shape {obs.shape}, layout expects ({self.size},)")
        return {name: obs[sl] for name, sl in self.slices().items()}


def build_observation(snapshot: RobotSnapshot, phases, command, layout: ObservationLayout | None = None,
                      height_scan=None) -> np.ndarray:
    layout = layout or ObservationLayout()
    ph = np.asarray(phases, dtype=float).reshape(N_LEGS)
    values = {
        "base_height": [snapshot.base_height],
        "gravity_body": snapshot.gravity_body,
        "lin_vel": snapshot.base_lin_vel,
        "ang_vel": snapshot.base_ang_vel,
        "joint_pos": snapshot.joint_pos,
        "joint_vel": snapshot.joint_vel,
        "phase": np.column_stack([np.sin(ph), np.cos(ph)]).reshape(-1),
        "command": command,
        "prev_action": snapshot.prev_action,
    }
    if layout.perceptive:
        if height_scan is None:
            raise LayoutError("perceptive layout needs a height scan")
        values["height_scan"] = height_scan
    elif height_scan is not None:
        raise LayoutError("height scan given for a blind layout")
    parts = []
    for name, n in layout.blocks:
        v = np.asarray(values[name], dtype=float).reshape(-1)
        if v.size != n:
            raise LayoutError(f"block {name!r} has {v.size} values, expected {n}")
        parts.append(v)
    return np.concatenate(parts)


# -- episodes ---------------------------------------------------------------------------

def episode_init(queue: MotionQueue, rng: np.random.Generator) -> ReferenceFrame:
    """Uniformly drawn queued frame used as the initial pose/velocity target."""
    if len(queue) == 0:
        raise IndexError("cannot initialize an episode from an empty motion queue")
    return queue.frames[int(rng.integers(len(queue)))].copy()


CONTINUE = "continue"
TERMINATED = "terminated"


def check_termination(snapshot: RobotSnapshot, cfg: TerminationConfig | None = None) -> str:
    cfg = cfg or TerminationConfig()
    if snapshot.base_height < cfg.min_base_height:
        return TERMINATED
    if abs(snapshot.pitch) > cfg.max_tilt or abs(snapshot.roll) > cfg.max_tilt:
        return TERMINATED
    if snapshot.body_contact:
        return TERMINATED
    return CONTINUE
