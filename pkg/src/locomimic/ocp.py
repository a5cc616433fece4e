"""
Finite-horizon optimal control over the discretized VHIPM.

The decision vector stacks, in order, the vertical accelerations of every step,
the CoP weights of every stance step and the planar position of every new
foothold in footfall order::

    x = [h_ddot_0 .. h_ddot_{N-1} | w_0 .. w_{N-1} | s^1_xy .. s^Nf_xy]

Foothold heights are pinned to the ground. The cost is a sum of squared
residuals (tracking, regularization and smooth penalties), minimized with
Gauss-Newton plus Levenberg damping and an Armijo backtracking line search.
CoP weights move only inside the null space of their sum, so the sum-to-one
constraint is held to rounding error while the non-negativity and h_ddot
bounds are enforced through one-sided quadratic penalties.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import scipy.linalg

from .errors import InvalidParameterError, SingularityError
from .footsteps import DEFAULT_HIP_OFFSETS, command_path, command_velocity_world, raibert_foothold, rot2
from .gait import N_LEGS, ContactTimeline, GaitPattern, make_timeline
from .vhipm import GRAVITY, MIN_COM_HEIGHT

log = logging.getLogger(__name__)


@dataclass
class OcpWeights:
    velocity: float = 1.0
    height: float = 50.0
    foothold: float = 10.0
    h_ddot: float = 1e-3
    cop_uniform: float = 0.1
    weight_sum: float = 1e4
    weight_nonneg: float = 1e4
    h_ddot_bound: float = 1e2
    # input smoothness on consecutive h_ddot, off unless configured
    smoothness: float = 0.0

    def __post_init__(self):
        for k, v in asdict(self).items():
            if v < 0:
                raise InvalidParameterError(f"ocp weight {k} must be >= 0, got {v}")
        if self.velocity <= 0 and self.height <= 0:
            raise InvalidParameterError("at least one tracking weight must be > 0")

    def scaled(self, factor: float) -> "OcpWeights":
        return OcpWeights(**{k: v * factor for k, v in asdict(self).items()})


@dataclass
class SolverSettings:
    tol: float = 1e-6
    max_iter: int = 100
    armijo: float = 1e-4
    max_halvings: int = 30
    # non-negativity penalty switches on slightly above zero
    nonneg_margin: float = 1e-4
    h_ddot_min: float | None = None  # None -> -|g|
    h_ddot_max: float = 20.0
    escalation: float = 100.0
    feasibility_tol: float = 1e-8


@dataclass
class OcpProblem:
    """One OCP instance. ``r_{-1}`` is always derived as ``r0 - v0 * dt``.

    ``foot_positions`` are the current feet (4x3); legs flagged in ``planted``
    that are in stance at step 0 keep that position for their whole first
    stance interval. Other stance intervals get a foothold decision variable.
    """

    r0: np.ndarray
    v0: np.ndarray
    timeline: ContactTimeline
    command: tuple[float, float, float] = (0.0, 0.0, 0.0)
    yaw0: float = 0.0
    base_height: float = 0.32
    hip_offsets: np.ndarray = field(default_factory=lambda: DEFAULT_HIP_OFFSETS.copy())
    foot_positions: np.ndarray | None = None
    planted: np.ndarray | None = None
    gravity: np.ndarray = field(default_factory=lambda: GRAVITY.copy())
    ground_height: float = 0.0
    raibert_gain: float = 0.03

    def __post_init__(self):
        self.r0 = np.asarray(self.r0, dtype=float).reshape(3)
        self.v0 = np.asarray(self.v0, dtype=float).reshape(3)
        self.command = tuple(float(c) for c in self.command)
        self.hip_offsets = np.asarray(self.hip_offsets, dtype=float)[:, :2]
        self.gravity = np.asarray(self.gravity, dtype=float)
        if self.foot_positions is None:
            self.foot_positions = nominal_footprint(self.r0, self.yaw0, self.hip_offsets, self.ground_height)
        self.foot_positions = np.asarray(self.foot_positions, dtype=float).reshape(N_LEGS, 3)
        if self.planted is None:
            self.planted = self.timeline.contact[0].copy()
        self.planted = np.asarray(self.planted, dtype=bool)

    @property
    def dt(self) -> float:
        return self.timeline.dt

    @property
    def n_steps(self) -> int:
        return self.timeline.n_steps

    @property
    def r_minus1(self) -> np.ndarray:
        return self.r0 - self.v0 * self.dt

    def heading(self, k: float) -> float:
        return self.yaw0 + self.command[2] * k * self.dt


def nominal_footprint(r0, yaw0, hip_offsets=DEFAULT_HIP_OFFSETS, ground_height=0.0) -> np.ndarray:
    R = rot2(yaw0)
    xy = np.asarray(r0, dtype=float)[:2] + hip_offsets[:, :2] @ R.T
    return np.column_stack([xy, np.full(N_LEGS, ground_height)])


def make_problem(gait: GaitPattern, r0, v0, command=(0.0, 0.0, 0.0), *, dt: float = 0.025,
                 n_steps: int | None = None, start_time: float = 0.0, **kw) -> OcpProblem:
    """Problem on a gait timeline; the default horizon spans two gait cycles."""
    if n_steps is None:
        n_steps = int(round(2 * gait.period / dt))
    tl = make_timeline(gait, start_time, n_steps, dt)
    return OcpProblem(r0=r0, v0=v0, timeline=tl, command=command, **kw)


# -- decision-vector layout ------------------------------------------------------

@dataclass
class FootholdVar:
    leg: int
    step: int          # first stance step
    end: int           # one past the last stance step inside the horizon
    mid: int           # state index used for the nominal-position regularizer


class ControlLayout:
    """Index bookkeeping between a problem and its flat decision vector."""

    def __init__(self, problem: OcpProblem):
        tl = problem.timeline
        N = tl.n_steps
        self.n_steps = N
        self.stance = [tl.stance_legs(k) for k in range(N)]
        self.w_slices = []
        pos = N
        for legs in self.stance:
            self.w_slices.append(slice(pos, pos + len(legs)))
            pos += len(legs)
        self.n_weights = pos - N
        self.s_offset = pos

        stance_steps = None
        if tl.gait is not None:
            stance_steps = tl.gait.stance_duration / tl.dt

        # source of each stance foot: -1 frozen, else foothold var index
        self.source: list[list[int]] = [[] for _ in range(N)]
        self.footholds: list[FootholdVar] = []
        current = [None] * N_LEGS
        for k in range(N):
            for leg in range(N_LEGS):
                c = tl.contact[k, leg]
                if not c:
                    current[leg] = None
                    continue
                if current[leg] is None:
                    if k == 0 and problem.planted[leg]:
                        current[leg] = -1
                    else:
                        end = k
                        while end < N and tl.contact[end, leg]:
                            end += 1
                        length = stance_steps if stance_steps is not None else end - k
                        mid = min(k + max(int(math.ceil(length / 2)), 1), N)
                        current[leg] = len(self.footholds)
                        self.footholds.append(FootholdVar(leg, k, end, mid))
            self.source[k] = [current[leg] for leg in self.stance[k]]
        self.n_footholds = len(self.footholds)
        self.n_vars = self.s_offset + 2 * self.n_footholds

    def s_index(self, j: int) -> int:
        return self.s_offset + 2 * j

    def reduction(self) -> np.ndarray:
        """Map from reduced coordinates to the full vector; weight blocks use an
        orthonormal basis of the zero-sum subspace."""
        n = self.n_vars
        sizes = [sl.stop - sl.start for sl in self.w_slices]
        n_red = self.n_steps + sum(m - 1 for m in sizes if m > 1) + 2 * self.n_footholds
        T = np.zeros((n, n_red))
        c = 0
        for k in range(self.n_steps):
            T[k, c] = 1.0
            c += 1
        for k, sl in enumerate(self.w_slices):
            m = sl.stop - sl.start
            if m > 1:
                B = _zero_sum_basis(m)
                T[sl, c:c + m - 1] = B
                c += m - 1
        for i in range(2 * self.n_footholds):
            T[self.s_offset + i, c] = 1.0
            c += 1
        assert c == n_red
        return T


_BASIS_CACHE: dict[int, np.ndarray] = {}


def _zero_sum_basis(m: int) -> np.ndarray:
    if m not in _BASIS_CACHE:
        # orthonormal complement of the ones vector
        q, _ = np.linalg.qr(np.column_stack([np.ones(m), np.eye(m)[:, : m - 1]]))
        _BASIS_CACHE[m] = q[:, 1:m]
    return _BASIS_CACHE[m]


@dataclass
class StackedControl:
    h_ddot: np.ndarray
    weights: list[np.ndarray]
    footholds: np.ndarray  # (N_f, 3)

    def to_vector(self) -> np.ndarray:
        parts = [np.asarray(self.h_ddot, dtype=float)]
        parts += [np.asarray(w, dtype=float) for w in self.weights]
        parts.append(np.asarray(self.footholds, dtype=float).reshape(-1, 3)[:, :2].reshape(-1))
        return np.concatenate(parts)

    @classmethod
    def from_vector(cls, layout: ControlLayout, x: np.ndarray, ground_height: float = 0.0) -> "StackedControl":
        x = np.asarray(x, dtype=float)
        h = x[: layout.n_steps].copy()
        w = [x[sl].copy() for sl in layout.w_slices]
        s = x[layout.s_offset:].reshape(-1, 2)
        fh = np.column_stack([s, np.full(len(s), ground_height)]) if len(s) else np.zeros((0, 3))
        return cls(h, w, fh)

    def copy(self) -> "StackedControl":
        return StackedControl(self.h_ddot.copy(), [w.copy() for w in self.weights], self.footholds.copy())


# -- forward model and residuals -----------------------------------------------------

def _support(problem: OcpProblem, layout: ControlLayout, x: np.ndarray, k: int) -> np.ndarray:
    P = np.empty((len(layout.stance[k]), 3))
    for i, (leg, src) in enumerate(zip(layout.stance[k], layout.source[k])):
        if src < 0:
            P[i] = problem.foot_positions[leg]
        else:
            j = layout.s_index(src)
            P[i] = (x[j], x[j + 1], problem.ground_height)
    return P


def _forward(problem: OcpProblem, layout: ControlLayout, x: np.ndarray, need_jac: bool):
    """Roll the recurrence. Returns positions R with R[k + 1] = r_k (R[0] = r_{-1})
    and, if requested, D[k + 1] = d r_k / d x."""
    N, n = layout.n_steps, layout.n_vars
    dt2 = problem.dt ** 2
    g = problem.gravity
    G = float(np.linalg.norm(g))
    R = np.empty((N + 2, 3))
    R[0] = problem.r_minus1
    R[1] = problem.r0
    D = np.zeros((N + 2, 3, n)) if need_jac else None
    for k in range(N):
        r = R[k + 1]
        legs = layout.stance[k]
        if not legs:
            a = g
            if need_jac:
                D[k + 2] = 2.0 * D[k + 1] - D[k]
        else:
            if r[2] < MIN_COM_HEIGHT:
                raise SingularityError(f"CoM height {r[2]:.4g} m at step {k}")
            P = _support(problem, layout, x, k)
            sl = layout.w_slices[k]
            w = x[sl]
            d = r - w @ P
            c = (x[k] + G) / r[2]
            a = d * c + g
            if need_jac:
                A = np.eye(3) * c
                A[:, 2] -= (c / r[2]) * d
                Dk = D[k + 1]
                step = A @ Dk
                step[:, k] += d / r[2]
                step[:, sl] -= c * P.T
                for i, src in enumerate(layout.source[k]):
                    if src >= 0:
                        j = layout.s_index(src)
                        step[0, j] -= c * w[i]
                        step[1, j + 1] -= c * w[i]
                D[k + 2] = 2.0 * Dk - D[k] + dt2 * step
        R[k + 2] = 2.0 * r - R[k] + a * dt2
    return R, D


def _velocity_targets(problem: OcpProblem) -> np.ndarray:
    N = problem.n_steps
    return np.array([command_velocity_world(problem.command, problem.heading(k + 0.5)) for k in range(N)])


def _foothold_nominal_offsets(problem: OcpProblem, layout: ControlLayout) -> np.ndarray:
    return np.array([rot2(problem.heading(f.mid)) @ problem.hip_offsets[f.leg] for f in layout.footholds]).reshape(-1, 2)


def _bounds(problem: OcpProblem, settings: SolverSettings):
    lo = settings.h_ddot_min
    if lo is None:
        lo = -float(np.linalg.norm(problem.gravity))
    return lo, settings.h_ddot_max


def _residuals(problem, layout, x, weights: OcpWeights, settings: SolverSettings, need_jac=False):
    """Stacked residual vector (cost = sum of squares), optional Jacobian and
    the index ranges of each named term."""
    R, D = _forward(problem, layout, x, need_jac)
    N, n = layout.n_steps, layout.n_vars
    dt = problem.dt
    X = R[2:]
    Xp = R[1:-1]
    res, jac, terms = [], [], {}

    def add(name, r, J=None):
        start = sum(len(v) for v in res)
        res.append(np.asarray(r, dtype=float).reshape(-1))
        if need_jac:
            jac.append(np.asarray(J, dtype=float).reshape(len(res[-1]), n))
        terms.setdefault(name, []).append(slice(start, start + len(res[-1])))

    sv = math.sqrt(weights.velocity)
    vt = _velocity_targets(problem)
    add("velocity", sv * ((X[:, :2] - Xp[:, :2]) / dt - vt),
        sv * (D[2:, :2, :] - D[1:-1, :2, :]) / dt if need_jac else None)

    sh = math.sqrt(weights.height)
    add("height", sh * (X[:, 2] - problem.base_height), sh * D[2:, 2, :] if need_jac else None)

    if layout.n_footholds:
        sf = math.sqrt(weights.foothold)
        s = x[layout.s_offset:].reshape(-1, 2)
        mids = np.array([f.mid for f in layout.footholds])
        nom = X[mids - 1, :2] + _foothold_nominal_offsets(problem, layout)
        J = None
        if need_jac:
            J = -sf * D[mids + 1, :2, :]
            for j in range(layout.n_footholds):
                J[j, 0, layout.s_index(j)] += sf
                J[j, 1, layout.s_index(j) + 1] += sf
        add("foothold", sf * (s - nom), J)

    h = x[:N]
    eyeN = np.eye(N, n) if need_jac else None
    su = math.sqrt(weights.h_ddot)
    add("h_ddot", su * h, su * eyeN if need_jac else None)
    if weights.smoothness > 0 and N > 1:
        ss = math.sqrt(weights.smoothness)
        add("smoothness", ss * np.diff(h), ss * np.diff(eyeN, axis=0) if need_jac else None)

    lo, hi = _bounds(problem, settings)
    sb = math.sqrt(weights.h_ddot_bound)
    below = np.maximum(lo - h, 0.0)
    above = np.maximum(h - hi, 0.0)
    add("h_ddot_bound", sb * np.concatenate([below, above]),
        sb * np.vstack([-eyeN * (below > 0)[:, None], eyeN * (above > 0)[:, None]]) if need_jac else None)

    if layout.n_weights:
        ws = x[N:layout.s_offset]
        uniform = np.concatenate([np.full(len(l), 1.0 / len(l)) for l in layout.stance if l])
        sc = math.sqrt(weights.cop_uniform)
        Jw = np.zeros((layout.n_weights, n)) if need_jac else None
        if need_jac:
            Jw[np.arange(layout.n_weights), N + np.arange(layout.n_weights)] = 1.0
        add("cop_uniform", sc * (ws - uniform), sc * Jw if need_jac else None)

        ssum = math.sqrt(weights.weight_sum)
        rows = [sl for sl in layout.w_slices if sl.stop > sl.start]
        Js = None
        if need_jac:
            Js = np.zeros((len(rows), n))
            for i, sl in enumerate(rows):
                Js[i, sl] = 1.0
        add("weight_sum", ssum * np.array([x[sl].sum() - 1.0 for sl in rows]),
            ssum * Js if need_jac else None)

        sn = math.sqrt(weights.weight_nonneg)
        viol = np.maximum(settings.nonneg_margin - ws, 0.0)
        add("weight_nonneg", sn * viol, -sn * Jw * (viol > 0)[:, None] if need_jac else None)

    r = np.concatenate(res)
    Jm = np.vstack(jac) if need_jac else None
    return r, Jm, terms, R


# -- public API ---------------------------------------------------------------------

def rollout(problem: OcpProblem, U: StackedControl) -> np.ndarray:
    """Stacked states r_1..r_N (shape (N, 3)) produced by ``U``."""
    layout = ControlLayout(problem)
    R, _ = _forward(problem, layout, U.to_vector(), need_jac=False)
    return R[2:].copy()


def cost_terms(problem: OcpProblem, U: StackedControl, weights: OcpWeights | None = None,
               settings: SolverSettings | None = None) -> dict[str, float]:
    weights = weights or OcpWeights()
    settings = settings or SolverSettings()
    layout = ControlLayout(problem)
    r, _, terms, _ = _residuals(problem, layout, U.to_vector(), weights, settings)
    return {name: float(sum(r[s] @ r[s] for s in sls)) for name, sls in terms.items()}


def evaluate_cost(problem: OcpProblem, U: StackedControl, weights: OcpWeights | None = None,
                  settings: SolverSettings | None = None) -> float:
    weights = weights or OcpWeights()
    settings = settings or SolverSettings()
    layout = ControlLayout(problem)
    r, _, _, _ = _residuals(problem, layout, U.to_vector(), weights, settings)
    return float(r @ r)


def cost_gradient(problem: OcpProblem, U: StackedControl, weights: OcpWeights | None = None,
                  settings: SolverSettings | None = None) -> np.ndarray:
    """Exact gradient of the cost w.r.t. the flat decision vector of ``U``.

    Propagates state sensitivities through the recurrence (including the
    dependence of each stance support on the foothold variables).
    """
    weights = weights or OcpWeights()
    settings = settings or SolverSettings()
    layout = ControlLayout(problem)
    r, J, _, _ = _residuals(problem, layout, U.to_vector(), weights, settings, need_jac=True)
    return 2.0 * J.T @ r


def default_initial_guess(problem: OcpProblem) -> StackedControl:
    """Uniform CoP weights and footholds from the kinematic foothold rule.

    h_ddot is 0 unless the window contains flight steps; then every stance step
    gets the constant push that cancels the vertical velocity lost in flight.
    """
    layout = ControlLayout(problem)
    tl = problem.timeline
    h = np.zeros(layout.n_steps)
    n_air = sum(1 for l in layout.stance if not l)
    if 0 < n_air < layout.n_steps:
        G = float(np.linalg.norm(problem.gravity))
        h[[k for k, l in enumerate(layout.stance) if l]] = G * n_air / (layout.n_steps - n_air)
    w = [np.full(len(l), 1.0 / len(l)) if l else np.zeros(0) for l in layout.stance]
    fh = np.zeros((layout.n_footholds, 3))
    for j, f in enumerate(layout.footholds):
        stance_T = (tl.gait.stance_duration if tl.gait is not None else (f.end - f.step) * tl.dt)
        t_td = f.step * tl.dt
        xy, yaw = command_path(problem.r0, problem.yaw0, problem.command, t_td)
        hip = np.append(xy + rot2(yaw) @ problem.hip_offsets[f.leg], problem.ground_height)
        vc = command_velocity_world(problem.command, yaw)
        fh[j] = raibert_foothold(hip, problem.v0, vc, stance_T, problem.raibert_gain,
                                 ground_height=problem.ground_height)
    return StackedControl(h, w, fh)


def shift_solution(prev_problem: OcpProblem, prev_U: StackedControl, problem: OcpProblem) -> StackedControl:
    """Warm start for ``problem`` from a solution of an earlier, overlapping window.

    Steps are matched by absolute time; a step's inputs carry over when its stance
    set is unchanged, footholds carry over when the same leg touches down at the
    same time. Everything else comes from the default guess.
    """
    guess = default_initial_guess(problem)
    old_layout = ControlLayout(prev_problem)
    new_layout = ControlLayout(problem)
    dt = problem.dt
    offset = (problem.timeline.start_time - prev_problem.timeline.start_time) / dt
    shift = int(round(offset))
    if abs(offset - shift) > 1e-6 or abs(prev_problem.dt - dt) > 1e-12:
        return guess
    for k in range(new_layout.n_steps):
        ko = k + shift
        if 0 <= ko < old_layout.n_steps and old_layout.stance[ko] == new_layout.stance[k]:
            guess.h_ddot[k] = prev_U.h_ddot[ko]
            guess.weights[k] = prev_U.weights[ko].copy()
    old = {(f.leg, f.step + shift): j for j, f in enumerate(old_layout.footholds)}
    for j, f in enumerate(new_layout.footholds):
        jo = old.get((f.leg, f.step + shift))
        if jo is not None:
            guess.footholds[j] = prev_U.footholds[jo]
    return guess


@dataclass
class SolveReport:
    iterations: int
    cost: float
    grad_norm: float
    converged: bool
    status: str
    cost_trace: list[float]
    escalated: bool = False
    wall_time: float = 0.0
    n_vars: int = 0

    def to_dict(self, include_timing: bool = True) -> dict:
        d = asdict(self)
        if not include_timing:
            d.pop("wall_time")
        return d

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps(self.to_dict(include_timing), indent=2)


def _restore_sum(layout: ControlLayout, x: np.ndarray) -> np.ndarray:
    x = x.copy()
    for sl in layout.w_slices:
        m = sl.stop - sl.start
        if m:
            x[sl] += (1.0 - x[sl].sum()) / m
    return x


class OcpSolver:
    """Gauss-Newton solver; owns its workspace, one solve at a time."""

    def __init__(self, weights: OcpWeights | None = None, settings: SolverSettings | None = None):
        self.weights = weights or OcpWeights()
        self.settings = settings or SolverSettings()

    def solve(self, problem: OcpProblem, init: StackedControl | None = None):
        t0 = time.perf_counter()
        st = self.settings
        weights = self.weights
        layout = ControlLayout(problem)
        if init is None:
            init = default_initial_guess(problem)
        x = _restore_sum(layout, init.to_vector())
        if len(x) != layout.n_vars:
            raise InvalidParameterError(f"initial guess has {len(x)} entries, layout expects {layout.n_vars}")
        T = layout.reduction()

        def cost_at(xx, wts):
            try:
                r, _, _, _ = _residuals(problem, layout, xx, wts, st)
            except SingularityError:
                return math.inf
            return float(r @ r)

        trace: list[float] = []
        status = "max_iter"
        escalated = False
        mu = 0.0
        it = 0
        J = gnorm = math.inf
        while True:
            r, Jac, _, _ = _residuals(problem, layout, x, weights, st, need_jac=True)
            J = float(r @ r)
            JT = Jac @ T
            g = 2.0 * JT.T @ r
            gnorm = float(np.linalg.norm(g))
            trace.append(J)
            done = gnorm <= st.tol * (1.0 + J)
            if done or it >= st.max_iter or status == "stalled":
                if not done and status != "stalled":
                    status = "max_iter"
                elif done:
                    status = "converged"
                ws = x[layout.n_steps:layout.s_offset]
                if (not escalated and ws.size and ws.min() < -st.feasibility_tol
                        and it < st.max_iter):
                    # penalty too soft for an active bound: stiffen once and continue
                    weights = replace(weights, weight_nonneg=weights.weight_nonneg * st.escalation)
                    escalated = True
                    status = "max_iter"
                    mu = 0.0
                    continue
                break
            H = 2.0 * JT.T @ JT
            accepted = False
            while not accepted:
                Hd = H + mu * np.eye(len(H))
                try:
                    d = scipy.linalg.solve(Hd, -g, assume_a="pos")
                except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
                    d = np.linalg.lstsq(Hd, -g, rcond=None)[0]
                slope = float(g @ d)
                if slope >= 0:
                    mu = max(10.0 * mu, 1e-9 * max(1.0, float(np.trace(H)) / len(H)))
                    continue
                step = T @ d
                alpha = 1.0
                for _ in range(st.max_halvings):
                    J_new = cost_at(x + alpha * step, weights)
                    if J_new <= J + st.armijo * alpha * slope:
                        accepted = True
                        break
                    alpha *= 0.5
                if accepted:
                    x = x + alpha * step
                    mu = mu / 10.0 if mu > 1e-12 else 0.0
                else:
                    # shrink the trust region
                    mu = max(10.0 * mu, 1e-6 * max(1.0, float(np.trace(H)) / len(H)))
                    if mu > 1e12:
                        status = "stalled"
                        break
            it += 1

        if escalated:
            # report cost under the nominal weights
            rr, _, _, _ = _residuals(problem, layout, x, self.weights, st)
            J = float(rr @ rr)
        U = StackedControl.from_vector(layout, x, problem.ground_height)
        R, _ = _forward(problem, layout, x, need_jac=False)
        report = SolveReport(iterations=it, cost=J, grad_norm=gnorm, converged=(status == "converged"),
                             status=status, cost_trace=trace, escalated=escalated,
                             wall_time=time.perf_counter() - t0, n_vars=layout.n_vars)
        if not report.converged:
            log.debug("OCP not converged: %s after %d iterations (|g|=%.3g, J=%.6g)", status, it, gnorm, J)
        return U, R[2:].copy(), report


def solve_ocp(problem: OcpProblem, weights: OcpWeights | None = None, init: StackedControl | None = None,
              settings: SolverSettings | None = None):
    """Solve the OCP; returns ``(U*, X*, report)``. Never raises on non-convergence."""
    return OcpSolver(weights, settings).solve(problem, init)


def _slice_timeline(tl: ContactTimeline, start: int, n: int) -> ContactTimeline:
    prev = tl.contact[start - 1] if start > 0 else tl.prev_contact
    return ContactTimeline(dt=tl.dt, start_time=tl.start_time + start * tl.dt,
                           contact=tl.contact[start:start + n].copy(), phase=tl.phase[start:start + n].copy(),
                           prev_contact=prev.copy(), gait=tl.gait)


def _feet_at(problem: OcpProblem, layout: ControlLayout, U: StackedControl, k: int, feet: np.ndarray) -> np.ndarray:
    out = feet.copy()
    for leg, src in zip(layout.stance[k], layout.source[k]):
        out[leg] = problem.foot_positions[leg] if src < 0 else U.footholds[src]
    return out


def solve_windowed(problem: OcpProblem, weights: OcpWeights | None = None, settings: SolverSettings | None = None,
                   window: int | None = None, keep: int | None = None):
    """Solve a long horizon as a chain of overlapping windows.

    Each window of ``window`` steps is solved from the end state of the kept
    part of the previous one; its first ``keep`` steps are kept. Feet in stance
    at a seam stay planted where the previous window put them. The kept pieces
    are stitched into one control for ``problem``, so ``rollout(problem, U)``
    reproduces the returned states.

    Returns ``(U, X, report, window_reports)``.
    """
    tl = problem.timeline
    N = tl.n_steps
    if window is None:
        period = tl.gait.period if tl.gait is not None else 0.5
        window = max(int(round(2 * period / tl.dt)), 2)
    if keep is None:
        keep = max(window // 2, 1)
    if not 1 <= keep <= window:
        raise InvalidParameterError(f"need 1 <= keep <= window, got keep={keep}, window={window}")
    if N <= window:
        U, X, rep = solve_ocp(problem, weights, None, settings)
        return U, X, rep, [rep]

    h_parts, w_parts, X_parts, reports = [], [], [], []
    chosen: dict[tuple[int, int], np.ndarray] = {}
    r0, v0 = problem.r0.copy(), problem.v0.copy()
    feet = problem.foot_positions.copy()
    planted = problem.planted.copy()
    s = 0
    while s < N:
        n = min(window, N - s)
        last = s + n >= N
        kept = n if last else keep
        seg = replace(problem, r0=r0, v0=v0, timeline=_slice_timeline(tl, s, n), foot_positions=feet.copy(),
                      planted=planted.copy(), yaw0=problem.heading(s))
        U, X, rep = solve_ocp(seg, weights, None, settings)
        reports.append(rep)
        lay = ControlLayout(seg)
        h_parts.append(U.h_ddot[:kept])
        w_parts.extend(U.weights[:kept])
        X_parts.append(X[:kept])
        for j, f in enumerate(lay.footholds):
            if f.step <= kept:
                chosen.setdefault((f.leg, s + f.step), U.footholds[j].copy())
        if last:
            break
        # next window starts at state r_kept; r_{kept-1} fixes its velocity
        r0 = X[kept - 1].copy()
        r_before = X[kept - 2] if kept >= 2 else seg.r0
        v0 = (r0 - r_before) / tl.dt
        feet = _feet_at(seg, lay, U, kept, feet)
        planted = tl.contact[s + kept].copy()
        s += kept

    full = ControlLayout(problem)
    fh = np.array([chosen[(f.leg, f.step)] for f in full.footholds]).reshape(-1, 3)
    U = StackedControl(np.concatenate(h_parts), w_parts, fh)
    X = np.vstack(X_parts)
    bad = next((r for r in reports if not r.converged), None)
    report = SolveReport(iterations=sum(r.iterations for r in reports), cost=sum(r.cost for r in reports),
                         grad_norm=max(r.grad_norm for r in reports), converged=bad is None,
                         status="converged" if bad is None else bad.status,
                         cost_trace=[c for r in reports for c in r.cost_trace],
                         escalated=any(r.escalated for r in reports),
                         wall_time=sum(r.wall_time for r in reports), n_vars=full.n_vars)
    return U, X, report, reports
