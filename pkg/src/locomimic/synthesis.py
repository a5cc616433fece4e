"""
Reference motion synthesis.

Base trajectories come from the OCP (or, for the kinematic baseline, from pure
integration of the command); feet are assembled from the stance footholds and
swing arcs; frames are emitted at the policy rate. Frames are consumed through
a :class:`MotionQueue` that asks its generator for another horizon whenever it
runs low.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .footsteps import (DEFAULT_HIP_OFFSETS, command_path, command_velocity_world, raibert_foothold, rot2,
                        smoothstep, swing_trajectory)
from .gait import N_LEGS, GaitPattern, in_stance, leg_phase, make_timeline, phase_variables
from .ocp import (ControlLayout, OcpProblem, OcpWeights, SolverSettings, StackedControl, solve_ocp,
                  solve_windowed)
from .terrain import HeightField
from .vhipm import GRAVITY, PendulumState

_T_EPS = 1e-9


@dataclass
class ReferenceFrame:
    time: float
    base_pos: np.ndarray
    base_vel: np.ndarray
    yaw: float
    yaw_rate: float
    feet: np.ndarray        # (4, 3) world positions
    contact: np.ndarray     # (4,) bool
    phase: np.ndarray       # (4,) contact phase angles

    def copy(self) -> "ReferenceFrame":
        return ReferenceFrame(self.time, self.base_pos.copy(), self.base_vel.copy(), self.yaw, self.yaw_rate,
                              self.feet.copy(), self.contact.copy(), self.phase.copy())


@dataclass
class SynthesisConfig:
    base_height: float = 0.32
    swing_height: float = 0.08
    frame_rate: float = 50.0
    solver_dt: float = 0.025
    raibert_gain: float = 0.03
    hip_offsets: np.ndarray = field(default_factory=lambda: DEFAULT_HIP_OFFSETS.copy())
    weights: OcpWeights = field(default_factory=OcpWeights)
    settings: SolverSettings = field(default_factory=SolverSettings)
    gravity: np.ndarray = field(default_factory=lambda: GRAVITY.copy())

    @property
    def frame_dt(self) -> float:
        return 1.0 / self.frame_rate


@dataclass
class GenerationResult:
    frames: list[ReferenceFrame]
    problem: OcpProblem | None = None
    controls: StackedControl | None = None
    states: np.ndarray | None = None   # r_1..r_N on the solver grid
    report: object = None
    degraded: bool = False


# -- foot assembly ---------------------------------------------------------------

class _FootPlan:
    """Stance positions per (leg, touchdown time) for one generation window."""

    def __init__(self, gait: GaitPattern, start: float, feet: np.ndarray, liftoff: np.ndarray,
                 lookup: Callable[[int, float], np.ndarray], swing_height: float, terrain=None):
        self.gait = gait
        self.start = start
        self.feet = feet
        self.liftoff = liftoff
        self.lookup = lookup
        self.swing_height = swing_height
        self.terrain = terrain
        self._cache: dict[tuple[int, int], np.ndarray] = {}

    def stance_pos(self, leg: int, t_td: float) -> np.ndarray:
        if t_td <= self.start + _T_EPS:
            return self.feet[leg]
        key = (leg, int(round(t_td * 1e9)))
        if key not in self._cache:
            self._cache[key] = np.asarray(self.lookup(leg, t_td), dtype=float)
        return self._cache[key]

    def foot(self, leg: int, t: float) -> tuple[np.ndarray, bool]:
        g = self.gait
        T, d = g.period, g.duty_cycle
        p = leg_phase(g, t)[leg]
        if in_stance(g, np.array([p]))[0]:
            return self.stance_pos(leg, t - p * T), True
        t_lo = t - (p - d) * T
        t_td = t_lo + (1.0 - d) * T
        end = self.stance_pos(leg, t_td)
        prog = (p - d) / (1.0 - d)
        if t_lo >= self.start - _T_EPS:
            lift = self.stance_pos(leg, t_lo - d * T)
            return swing_trajectory(lift, end, prog, self.swing_height, self.terrain), False
        # swing already under way at the window start: bend the arc so it passes
        # through the current foot position and still lands on ``end``
        p0 = (leg_phase(g, self.start)[leg] - d) / (1.0 - d)
        lift = self.liftoff[leg]
        pos = swing_trajectory(lift, end, prog, self.swing_height, self.terrain)
        miss = self.feet[leg] - swing_trajectory(lift, end, p0, self.swing_height, self.terrain)
        blend = (1.0 - prog) / (1.0 - p0) if p0 < 1.0 else 0.0
        out = pos + blend * miss
        # a foot starting low would otherwise dip under the landing height
        out[2] = max(out[2], min(self.feet[leg, 2], end[2]))
        return out, False


def _frames(times, base_pos, base_vel, yaw0, yaw_rate, start, gait, plan: _FootPlan):
    frames = []
    for i, t in enumerate(times):
        feet = np.empty((N_LEGS, 3))
        contact = np.zeros(N_LEGS, dtype=bool)
        for leg in range(N_LEGS):
            feet[leg], contact[leg] = plan.foot(leg, t)
        angles, _ = phase_variables(gait, t)
        frames.append(ReferenceFrame(float(t), base_pos[i].copy(), base_vel[i].copy(),
                                     yaw0 + yaw_rate * (t - start), yaw_rate, feet, contact, angles))
    return frames


def _frame_times(start: float, n: int, dt: float) -> np.ndarray:
    return start + dt * np.arange(n)


# -- generators ------------------------------------------------------------------------

def generate_reference(state: PendulumState, feet, command, gait: GaitPattern, horizon: float,
                       cfg: SynthesisConfig | None = None, *, start_time: float = 0.0, yaw: float = 0.0,
                       liftoff=None, n_frames: int | None = None, init: StackedControl | None = None
                       ) -> GenerationResult:
    """OCP-backed reference over ``horizon`` seconds starting at ``start_time``.

    ``feet`` are the current foot positions (4x3, or None for the nominal
    footprint); legs in stance at the start stay where they are. ``liftoff``
    gives, for legs already swinging, where that swing began. Horizons longer
    than two gait periods are solved as overlapping windows unless ``init``
    is given.
    """
    cfg = cfg or SynthesisConfig()
    if horizon < gait.period - _T_EPS:
        raise ValueError(f"horizon {horizon} s shorter than one gait period ({gait.period} s)")
    fdt = cfg.frame_dt
    if n_frames is None:
        n_frames = int(round(horizon / fdt))
    command = tuple(float(c) for c in command)
    n_steps = int(math.ceil(n_frames * fdt / cfg.solver_dt - 1e-9))
    tl = make_timeline(gait, start_time, n_steps, cfg.solver_dt)
    problem = OcpProblem(r0=state.r, v0=state.v, timeline=tl, command=command, yaw0=yaw,
                         base_height=cfg.base_height, hip_offsets=cfg.hip_offsets, foot_positions=feet,
                         gravity=cfg.gravity, raibert_gain=cfg.raibert_gain)
    if init is not None:
        U, X, report = solve_ocp(problem, cfg.weights, init, cfg.settings)
    else:
        U, X, report, _ = solve_windowed(problem, cfg.weights, cfg.settings)

    grid_t = start_time + cfg.solver_dt * np.arange(n_steps + 1)
    grid_r = np.vstack([problem.r0, X])
    spline = CubicSpline(grid_t, grid_r, axis=0)
    times = _frame_times(start_time, n_frames + 1, fdt)
    pos = spline(np.minimum(times, grid_t[-1]))
    vel = np.diff(pos, axis=0) / fdt

    layout = ControlLayout(problem)
    by_step = {(f.leg, f.step): U.footholds[j] for j, f in enumerate(layout.footholds)}
    end_xy, end_v = X[-1], (X[-1] - (X[-2] if len(X) > 1 else problem.r0)) / cfg.solver_dt
    t_end = grid_t[-1]

    def lookup(leg, t_td):
        k = int(math.ceil((t_td - start_time) / cfg.solver_dt - 1e-6))
        if (leg, k) in by_step:
            return by_step[(leg, k)]
        # touchdown past the solver window: extrapolate along the command
        xy, yw = command_path(end_xy, yaw + command[2] * (t_end - start_time), command, t_td - t_end)
        hip = np.append(xy + rot2(yw) @ cfg.hip_offsets[leg], 0.0)
        return raibert_foothold(hip, end_v, command_velocity_world(command, yw), gait.stance_duration,
                                cfg.raibert_gain)

    feet_arr = problem.foot_positions.copy()
    lift = feet_arr.copy() if liftoff is None else np.asarray(liftoff, dtype=float).reshape(N_LEGS, 3)
    plan = _FootPlan(gait, start_time, feet_arr, lift, lookup, cfg.swing_height)
    frames = _frames(times[:-1], pos, vel, yaw, command[2], start_time, gait, plan)
    return GenerationResult(frames, problem, U, X, report, degraded=not report.converged)


def kinematic_baseline(state: PendulumState, feet, command, gait: GaitPattern, horizon: float,
                       cfg: SynthesisConfig | None = None, *, start_time: float = 0.0, yaw: float = 0.0,
                       liftoff=None, n_frames: int | None = None) -> GenerationResult:
    """Reference from integrating the command at constant base height; no dynamics."""
    cfg = cfg or SynthesisConfig()
    fdt = cfg.frame_dt
    if n_frames is None:
        n_frames = int(round(horizon / fdt))
    command = tuple(float(c) for c in command)
    times = _frame_times(start_time, n_frames, fdt)
    pos = np.empty((n_frames, 3))
    vel = np.empty((n_frames, 3))
    for i, t in enumerate(times):
        xy, yw = command_path(state.r, yaw, command, t - start_time)
        pos[i] = (xy[0], xy[1], cfg.base_height)
        vel[i, :2] = command_velocity_world(command, yw)
        vel[i, 2] = 0.0

    def lookup(leg, t_td):
        xy, yw = command_path(state.r, yaw, command, t_td - start_time)
        hip = np.append(xy + rot2(yw) @ cfg.hip_offsets[leg], 0.0)
        vc = command_velocity_world(command, yw)
        return raibert_foothold(hip, vc, vc, gait.stance_duration, cfg.raibert_gain)

    if feet is None:
        xy = state.r[:2] + cfg.hip_offsets @ rot2(yaw).T
        feet = np.column_stack([xy, np.zeros(N_LEGS)])
    feet = np.asarray(feet, dtype=float).reshape(N_LEGS, 3)
    lift = feet.copy() if liftoff is None else np.asarray(liftoff, dtype=float).reshape(N_LEGS, 3)
    plan = _FootPlan(gait, start_time, feet, lift, lookup, cfg.swing_height)
    return GenerationResult(_frames(times, pos, vel, yaw, command[2], start_time, gait, plan))


# -- terrain ---------------------------------------------------------------------------

def adjust_for_terrain(frames: list[ReferenceFrame], terrain: HeightField,
                       time_constant: float = 0.2) -> list[ReferenceFrame]:
    """Lift a flat-ground reference onto ``terrain``.

    Stance feet are snapped to the ground under them; the base is raised by a
    low-pass filtered mean of the stance-foot ground heights; swing feet are
    shifted by the ground height interpolated between liftoff and touchdown and
    kept above the local ground.
    """
    out = [f.copy() for f in frames]
    n = len(frames)
    if n == 0:
        return out
    ground = np.full((n, N_LEGS), np.nan)
    for i, f in enumerate(frames):
        for leg in range(N_LEGS):
            if f.contact[leg]:
                ground[i, leg] = terrain.height_at(f.feet[leg, 0], f.feet[leg, 1])

    # base offset
    raw = np.empty(n)
    last = None
    for i in range(n):
        hs = ground[i][~np.isnan(ground[i])]
        if hs.size:
            last = float(hs.mean())
        raw[i] = np.nan if last is None else last
    first = next((v for v in raw if not np.isnan(v)), None)
    if first is None:
        first = terrain.height_at(frames[0].base_pos[0], frames[0].base_pos[1])
    raw[np.isnan(raw)] = first
    offset = np.empty(n)
    offset[0] = raw[0]
    for i in range(1, n):
        a = 1.0 - math.exp(-(frames[i].time - frames[i - 1].time) / time_constant)
        offset[i] = offset[i - 1] + a * (raw[i] - offset[i - 1])

    for i, f in enumerate(out):
        f.base_pos[2] += offset[i]
        for leg in range(N_LEGS):
            if f.contact[leg]:
                f.feet[leg, 2] = ground[i, leg]
                continue
            prev = next((ground[j, leg] for j in range(i - 1, -1, -1) if frames[j].contact[leg]), None)
            nxt = next((ground[j, leg] for j in range(i + 1, n) if frames[j].contact[leg]), None)
            here = terrain.height_at(f.feet[leg, 0], f.feet[leg, 1])
            prev = here if prev is None else prev
            nxt = here if nxt is None else nxt
            prog = min(max((frames[i].phase[leg] + math.pi) / math.pi, 0.0), 1.0)
            f.feet[leg, 2] += prev + smoothstep(prog) * (nxt - prev)
            f.feet[leg, 2] = max(f.feet[leg, 2], here)
    return out


# -- queue -----------------------------------------------------------------------------

class ReferenceGenerator:
    """Generation context for a queue: gait, command and synthesis settings."""

    def __init__(self, gait: GaitPattern, command=(0.0, 0.0, 0.0), horizon: float | None = None,
                 cfg: SynthesisConfig | None = None, kinematic: bool = False):
        self.gait = gait
        self.command = tuple(float(c) for c in command)
        self.horizon = horizon if horizon is not None else 2 * gait.period
        self.cfg = cfg or SynthesisConfig()
        self.kinematic = kinematic
        self.last_result: GenerationResult | None = None

    @property
    def frames_per_horizon(self) -> int:
        return int(round(self.horizon / self.cfg.frame_dt))

    def initial(self, state: PendulumState, feet=None, start_time: float = 0.0, yaw: float = 0.0):
        fn = kinematic_baseline if self.kinematic else generate_reference
        self.last_result = fn(state, feet, self.command, self.gait, self.horizon, self.cfg,
                              start_time=start_time, yaw=yaw)
        return self.last_result.frames

    def continue_from(self, last: ReferenceFrame, liftoff) -> list[ReferenceFrame]:
        """One horizon of frames whose first frame coincides with ``last``."""
        state = PendulumState(last.base_pos, last.base_vel)
        fn = kinematic_baseline if self.kinematic else generate_reference
        n = self.frames_per_horizon + 1
        self.last_result = fn(state, last.feet, self.command, self.gait, self.horizon, self.cfg,
                              start_time=last.time, yaw=last.yaw, liftoff=liftoff, n_frames=n)
        return self.last_result.frames


class MotionQueue:
    """Single-producer single-consumer frame queue with threshold-triggered refill."""

    def __init__(self, threshold: int, generator: ReferenceGenerator | None = None):
        self.frames: deque[ReferenceFrame] = deque()
        self.threshold = int(threshold)
        self.generator = generator
        self.refills = 0
        self._last: ReferenceFrame | None = None
        self.liftoff = np.zeros((N_LEGS, 3))

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def last(self) -> ReferenceFrame | None:
        return self._last

    def extend(self, frames: list[ReferenceFrame]) -> None:
        t_prev = self._last.time if self._last is not None else -math.inf
        for f in frames:
            if not f.time > t_prev:
                raise ValueError(f"frame times must increase strictly ({f.time} after {t_prev})")
            t_prev = f.time
        for f in frames:
            self.frames.append(f)
            for leg in range(N_LEGS):
                if f.contact[leg]:
                    self.liftoff[leg] = f.feet[leg]
            self._last = f

    def needs_refill(self) -> bool:
        return len(self.frames) < self.threshold

    def pop(self) -> ReferenceFrame:
        if not self.frames:
            raise IndexError("motion queue is empty")
        f = self.frames.popleft()
        if self.generator is not None and self.needs_refill():
            queue_refill(self, self.generator)
        return f


def queue_refill(queue: MotionQueue, generator: ReferenceGenerator) -> MotionQueue:
    """Append one horizon continuing from the last queued frame.

    On generator failure the queue is left untouched and the error propagates.
    """
    if queue.last is None:
        raise ValueError("cannot refill an empty queue without a seed frame")
    new = generator.continue_from(queue.last, queue.liftoff.copy())
    queue.extend(new[1:])
    queue.refills += 1
    return queue


def default_threshold(gait: GaitPattern, frame_rate: float = 50.0) -> int:
    """Half a gait period worth of frames."""
    return max(1, int(round(0.5 * gait.period * frame_rate)))
