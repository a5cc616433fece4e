"""Closed-loop evaluation on a point-mass pendulum plant.

The plant reuses the discrete pendulum recurrence. A receding-horizon loop
re-solves the OCP from the measured state at every control step and applies
only the first input.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError, SingularityError
from .footsteps import command_velocity_world, swing_trajectory
from .gait import N_LEGS, GaitPattern, leg_phase, make_timeline, swing_progress
from .imitation import RewardConfig, RobotSnapshot, reward_breakdown, to_yaw_frame
from .ocp import (ControlLayout, OcpProblem, OcpSolver, OcpWeights, SolverSettings, nominal_footprint,
                  shift_solution)
from .serialization import fmt
from .synthesis import ReferenceFrame
from .vhipm import GRAVITY, ControlInput, PendulumState, compute_cop, discrete_step


# -- randomization -------------------------------------------------------------------

@dataclass
class RandomizationConfig:
    linear_impulse: float = 1.5       # m/s, symmetric per axis
    angular_impulse: float = 1.5      # rad/s, symmetric per axis
    friction: tuple[float, float] = (0.5, 1.25)
    perlin_frequency: tuple[float, float] = (0.0, 0.9)
    perlin_magnitude: tuple[float, float] = (0.0, 0.1)
    gravity_cone_deg: float = 10.0
    latency: float = 0.03             # s

    def __post_init__(self):
        self.friction = tuple(float(v) for v in self.friction)
        self.perlin_frequency = tuple(float(v) for v in self.perlin_frequency)
        self.perlin_magnitude = tuple(float(v) for v in self.perlin_magnitude)
        for name in ("linear_impulse", "angular_impulse", "gravity_cone_deg", "latency"):
            if getattr(self, name) < 0:
                raise InvalidParameterError(f"{name} must be >= 0")
        for name in ("friction", "perlin_frequency", "perlin_magnitude"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise InvalidParameterError(f"{name} range is not ordered: {lo} > {hi}")
        if self.gravity_cone_deg >= 180.0:
            raise InvalidParameterError("gravity_cone_deg must be < 180")


@dataclass
class RandomizationDraw:
    linear_impulse: np.ndarray
    angular_impulse: np.ndarray
    friction: float
    perlin_frequency: float
    perlin_magnitude: float
    terrain_seed: int
    gravity_direction: np.ndarray
    latency: float


def sample_cone(half_angle: float, rng: np.random.Generator) -> np.ndarray:
    """Unit vector uniform over the spherical cap of ``half_angle`` (rad) around -z."""
    cos_t = rng.uniform(math.cos(half_angle), 1.0)
    sin_t = math.sqrt(max(0.0, 1.0 - cos_t * cos_t))
    phi = rng.uniform(0.0, 2.0 * math.pi)
    return np.array([sin_t * math.cos(phi), sin_t * math.sin(phi), -cos_t])


def cone_mean_angle(half_angle: float) -> float:
    """Expected angle to the axis for the uniform cap distribution."""
    a = half_angle
    if a == 0.0:
        return 0.0
    return (math.sin(a) - a * math.cos(a)) / (1.0 - math.cos(a))


def sample_randomization(cfg: RandomizationConfig, rng: np.random.Generator) -> RandomizationDraw:
    return RandomizationDraw(
        linear_impulse=rng.uniform(-cfg.linear_impulse, cfg.linear_impulse, 3),
        angular_impulse=rng.uniform(-cfg.angular_impulse, cfg.angular_impulse, 3),
        friction=float(rng.uniform(*cfg.friction)),
        perlin_frequency=float(rng.uniform(*cfg.perlin_frequency)),
        perlin_magnitude=float(rng.uniform(*cfg.perlin_magnitude)),
        terrain_seed=int(rng.integers(2 ** 31)),
        gravity_direction=sample_cone(math.radians(cfg.gravity_cone_deg), rng),
        latency=cfg.latency,
    )


# -- plant ---------------------------------------------------------------------------

def plant_step(state: PendulumState, u: ControlInput, support, disturbance=None, dt: float = 0.02,
               g=GRAVITY) -> PendulumState:
    """Advance the plant one control period.

    A velocity impulse is added before stepping. The backward point is rebuilt
    from the velocity so consecutive calls reproduce the OCP rollout.
    """
    if not dt > 0:
        raise InvalidParameterError(f"dt must be > 0, got {dt}")
    v = state.v.copy()
    if disturbance is not None:
        v = v + np.asarray(disturbance, dtype=float)
    r = state.r
    r_prev = r - v * dt
    r_next = discrete_step(r_prev, r, u, support, dt, g)
    return PendulumState(r_next, (r_next - r) / dt)


# -- receding horizon ------------------------------------------------------------------

@dataclass
class Disturbance:
    time: float
    linear: tuple[float, float, float]
    angular: tuple[float, float, float] = (0.0, 0.0, 0.0)


@dataclass
class HarnessConfig:
    control_dt: float = 0.02
    horizon_periods: float = 1.0
    base_height: float = 0.32
    swing_height: float = 0.08
    raibert_gain: float = 0.03
    weights: OcpWeights = field(default_factory=OcpWeights)
    settings: SolverSettings = field(default_factory=SolverSettings)
    rewards: RewardConfig = field(default_factory=RewardConfig)
    latency: float = 0.0
    recovery_threshold: float = 0.05
    gravity: np.ndarray = field(default_factory=lambda: GRAVITY.copy())


@dataclass
class RunLog:
    dt: float
    command: tuple[float, float, float]
    gait: str
    times: np.ndarray
    base_pos: np.ndarray           # (N+1, 3), includes the final state
    base_vel: np.ndarray           # (N+1, 3)
    h_ddot: np.ndarray             # (N,)
    cop: np.ndarray                # (N, 3), NaN in flight
    feet: np.ndarray               # (N, 4, 3)
    contact: np.ndarray            # (N, 4)
    ref_vel: np.ndarray            # (N, 3) world-frame commanded velocity
    ref_height: float
    disturbances: list[Disturbance]
    rewards: list[dict[str, float]]
    reports: list[dict]
    singularity: bool = False

    @property
    def n_steps(self) -> int:
        return len(self.times)

    def velocity_error(self) -> np.ndarray:
        return np.linalg.norm(self.base_vel[:-1, :2] - self.ref_vel[:, :2], axis=1)

    def degraded_steps(self) -> int:
        return sum(1 for r in self.reports if not r["converged"])


def _delay_steps(latency: float, dt: float) -> int:
    return int(math.ceil(latency / dt - 1e-9)) if latency > 0 else 0


def _adapt(u: ControlInput, legs: tuple, current: list[int]) -> ControlInput:
    """Re-express a delayed input on the current stance set."""
    if tuple(current) == legs:
        return u
    if not current:
        return ControlInput(u.h_ddot, np.zeros(0))
    w = np.array([u.weights[legs.index(l)] if l in legs else 0.0 for l in current])
    if w.sum() <= 0:
        w = np.ones(len(current))
    return ControlInput(u.h_ddot, w / w.sum())


def receding_horizon_run(command, gait: GaitPattern, duration: float, disturbances=(),
                         cfg: HarnessConfig | None = None, state: PendulumState | None = None) -> RunLog:
    """Closed-loop run: re-solve, apply the first input, step the plant."""
    cfg = cfg or HarnessConfig()
    if not duration > 0:
        raise InvalidParameterError(f"duration must be > 0, got {duration}")
    command = tuple(float(c) for c in command)
    dt = cfg.control_dt
    n = int(round(duration / dt))
    n_h = max(int(round(cfg.horizon_periods * gait.period / dt)), 1)
    g = np.asarray(cfg.gravity, dtype=float)
    if state is None:
        state = PendulumState(np.array([0.0, 0.0, cfg.base_height]), np.zeros(3))
    state = state.copy()
    feet = nominal_footprint(state.r, 0.0)
    liftoff = feet.copy()
    pending: dict[int, np.ndarray] = {}
    schedule = sorted(disturbances, key=lambda d: d.time)
    applied: list[Disturbance] = []
    delay = _delay_steps(cfg.latency, dt)
    buffer: deque = deque()

    solver = OcpSolver(cfg.weights, cfg.settings)
    prev = None
    times = dt * np.arange(n)
    pos = np.zeros((n + 1, 3))
    vel = np.zeros((n + 1, 3))
    pos[0], vel[0] = state.r, state.v
    h_log = np.zeros(n)
    cop_log = np.full((n, 3), np.nan)
    feet_log = np.zeros((n, N_LEGS, 3))
    contact_log = np.zeros((n, N_LEGS), dtype=bool)
    ref_vel = np.zeros((n, 3))
    rewards, reports = [], []
    prev_contact = make_timeline(gait, -dt, 1, dt).contact[0]
    singular = False

    for k in range(n):
        t = float(times[k])
        yaw = command[2] * t
        impulse = np.zeros(3)
        while schedule and schedule[0].time <= t + 1e-9:
            d = schedule.pop(0)
            impulse += np.asarray(d.linear, dtype=float)
            applied.append(Disturbance(t, tuple(d.linear), tuple(d.angular)))
        # the impulse is part of the measured state the controller sees
        state = PendulumState(state.r, state.v + impulse)
        vel[k] = state.v
        tl = make_timeline(gait, t, n_h, dt)
        contact = tl.contact[0]
        for leg in range(N_LEGS):
            if contact[leg] and not prev_contact[leg] and leg in pending:
                feet[leg] = pending.pop(leg)
            if not contact[leg] and prev_contact[leg]:
                liftoff[leg] = feet[leg]
        prev_contact = contact

        problem = OcpProblem(r0=state.r, v0=state.v, timeline=tl, command=command, yaw0=yaw,
                             base_height=cfg.base_height, foot_positions=feet.copy(),
                             planted=contact.copy(), gravity=g, raibert_gain=cfg.raibert_gain)
        init = shift_solution(prev[0], prev[1], problem) if prev is not None else None
        try:
            U, X, rep = solver.solve(problem, init)
        except SingularityError:
            singular = True
            break
        prev = (problem, U)
        reports.append(rep.to_dict(include_timing=False))
        layout = ControlLayout(problem)
        for j, f in enumerate(layout.footholds):
            if f.step == 1:
                pending[f.leg] = U.footholds[j].copy()

        legs = tuple(layout.stance[0])
        buffer.append((ControlInput(float(U.h_ddot[0]), U.weights[0].copy()), legs))
        u, u_legs = buffer[0] if len(buffer) > delay else buffer[-1]
        if len(buffer) > delay:
            buffer.popleft()
        u = _adapt(u, u_legs, list(legs))
        support = feet[list(legs)]

        # log the pre-step state and the active target
        vc = command_velocity_world(command, yaw)
        ref_vel[k] = (vc[0], vc[1], 0.0)
        h_log[k] = u.h_ddot
        if legs:
            cop_log[k] = compute_cop(support, u.weights)
        feet_now = _feet_with_swing(gait, t, feet, liftoff, pending, contact, cfg.swing_height)
        feet_log[k] = feet_now
        contact_log[k] = contact
        rewards.append(_step_reward(state, yaw, command, feet_now, contact, cfg))

        try:
            state = plant_step(state, u, support, None, dt, g)
        except SingularityError:
            singular = True
            break
        pos[k + 1], vel[k + 1] = state.r, state.v

    m = len(reports) if singular else n
    return RunLog(dt=dt, command=command, gait=gait.name, times=times[:m], base_pos=pos[:m + 1],
                  base_vel=vel[:m + 1], h_ddot=h_log[:m], cop=cop_log[:m], feet=feet_log[:m],
                  contact=contact_log[:m], ref_vel=ref_vel[:m], ref_height=cfg.base_height,
                  disturbances=applied, rewards=rewards[:m], reports=reports[:m], singularity=singular)


def _feet_with_swing(gait, t, feet, liftoff, pending, contact, apex):
    out = feet.copy()
    phase = leg_phase(gait, t)
    for leg in range(N_LEGS):
        if not contact[leg]:
            target = pending.get(leg, feet[leg])
            out[leg] = swing_trajectory(liftoff[leg], target, swing_progress(gait, phase[leg]), apex)
    return out


def _step_reward(state, yaw, command, feet, contact, cfg: HarnessConfig) -> dict[str, float]:
    # target: commanded planar velocity at the nominal height, feet as planned
    ref = ReferenceFrame(time=0.0, base_pos=np.array([state.r[0], state.r[1], cfg.base_height]),
                         base_vel=np.append(command_velocity_world(command, yaw), 0.0), yaw=yaw,
                         yaw_rate=command[2], feet=feet, contact=contact, phase=np.zeros(N_LEGS))
    snap = RobotSnapshot(base_pos=state.r, yaw=yaw, base_lin_vel=to_yaw_frame(state.v, yaw),
                         base_ang_vel=np.array([0.0, 0.0, command[2]]), feet=feet, foot_contact=contact)
    return reward_breakdown(snap, ref, np.zeros(12), np.zeros(12), cfg.rewards)


# -- metrics -------------------------------------------------------------------------

def smoothed(series: np.ndarray, window: int) -> np.ndarray:
    """Trailing moving average; the first ``window - 1`` samples average what exists."""
    if window <= 1:
        return np.asarray(series, dtype=float)
    c = np.cumsum(np.insert(np.asarray(series, dtype=float), 0, 0.0))
    idx = np.arange(1, len(series) + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def recovery_time(times: np.ndarray, error: np.ndarray, t_event: float, threshold: float,
                  t_end: float | None = None) -> float:
    """Time after ``t_event`` at which ``error`` last crosses below ``threshold``
    (and stays below until ``t_end``). Crossings are linearly interpolated.
    Returns ``inf`` if the error is still above the threshold at the end."""
    times = np.asarray(times, dtype=float)
    error = np.asarray(error, dtype=float)
    sel = times >= t_event - 1e-12
    if t_end is not None:
        sel &= times < t_end - 1e-12
    t, e = times[sel], error[sel]
    if len(t) == 0:
        return math.inf
    above = np.nonzero(e >= threshold)[0]
    if len(above) == 0:
        return 0.0
    i = above[-1]
    if i == len(e) - 1:
        return math.inf
    # crossing between samples i and i + 1
    frac = (e[i] - threshold) / (e[i] - e[i + 1])
    return float(t[i] + frac * (t[i + 1] - t[i]) - t_event)


def tracking_metrics(log: RunLog, command=None, threshold: float | None = None,
                     window: int = 1, skip: float = 0.0) -> dict:
    """Scalar tracking metrics plus plot-ready series.

    ``window`` averages the velocity error over that many samples before the
    recovery search; ``skip`` drops the initial transient from the means.
    """
    if log.n_steps == 0:
        raise InvalidParameterError("empty run log")
    if command is not None and tuple(float(c) for c in command) != tuple(log.command):
        raise InvalidParameterError("command does not match the logged run")
    thr = 0.05 if threshold is None else threshold
    times = log.times
    err = log.velocity_error()
    err_s = smoothed(err, window)
    keep = times >= skip - 1e-12
    z = log.base_pos[:-1, 2]
    vel = log.base_vel[:-1]
    recov = []
    for i, d in enumerate(log.disturbances):
        t_next = log.disturbances[i + 1].time if i + 1 < len(log.disturbances) else None
        recov.append(recovery_time(times, err_s, d.time, thr, t_next))
    factors = sorted(log.rewards[0]) if log.rewards else []
    return {
        "mean_velocity_error": float(err[keep].mean()),
        "max_velocity_error": float(err[keep].max()),
        "mean_velocity": vel[keep].mean(axis=0).tolist(),
        "height_rmse": float(np.sqrt(np.mean((z[keep] - log.ref_height) ** 2))),
        "recovery_times": recov,
        "mean_rewards": {f: float(np.mean([r[f] for r, k in zip(log.rewards, keep) if k])) for f in factors},
        "degraded_steps": log.degraded_steps(),
        "singularity": log.singularity,
        "series": {
            "time": times.tolist(),
            "forward_velocity": [float(to_yaw_frame(v, log.command[2] * t)[0]) for v, t in zip(vel, times)],
            "base_height": z.tolist(),
            "foot_height": log.feet[:, :, 2].tolist(),
        },
    }


# -- export ----------------------------------------------------------------------------

RUN_COLUMNS = (["time", "x", "y", "z", "vx", "vy", "vz", "h_ddot", "cop_x", "cop_y", "cop_z"]
               + [f"{leg}_{a}" for leg in ("FL", "FR", "HL", "HR") for a in "xyz"]
               + [f"c_{leg}" for leg in ("FL", "FR", "HL", "HR")]
               + ["ref_vx", "ref_vy", "impulse_x", "impulse_y", "impulse_z", "converged"])


def run_log_csv(log: RunLog) -> str:
    impulses = np.zeros((log.n_steps, 3))
    for d in log.disturbances:
        k = int(round(d.time / log.dt))
        if 0 <= k < log.n_steps:
            impulses[k] += d.linear
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RUN_COLUMNS)
    for k in range(log.n_steps):
        row = [log.times[k], *log.base_pos[k], *log.base_vel[k], log.h_ddot[k], *log.cop[k],
               *log.feet[k].reshape(-1)]
        w.writerow([fmt(v) for v in row] + [int(c) for c in log.contact[k]]
                   + [fmt(log.ref_vel[k, 0]), fmt(log.ref_vel[k, 1])] + [fmt(v) for v in impulses[k]]
                   + [int(log.reports[k]["converged"])])
    return buf.getvalue()


def reward_breakdown_csv(log: RunLog) -> str:
    if not log.rewards:
        return "time\n"
    factors = list(log.rewards[0])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time", *factors])
    for t, r in zip(log.times, log.rewards):
        w.writerow([fmt(t)] + [fmt(r[f]) for f in factors])
    return buf.getvalue()


def run_summary_json(log: RunLog, metrics: dict | None = None) -> str:
    metrics = metrics or tracking_metrics(log)
    summary = {k: v for k, v in metrics.items() if k != "series"}
    summary["recovery_times"] = [None if math.isinf(x) else x for x in summary["recovery_times"]]
    summary.update(gait=log.gait, command=list(log.command), dt=log.dt, steps=log.n_steps,
                   disturbances=[{"time": d.time, "linear": list(d.linear), "angular": list(d.angular)}
                                 for d in log.disturbances],
                   solver_iterations=[r["iterations"] for r in log.reports])
    return json.dumps(summary, indent=2, sort_keys=True)
