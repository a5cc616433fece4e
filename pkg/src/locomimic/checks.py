"""Invariant suite run by ``locomimic check``.

Each check returns a :class:`CheckResult`; none of them raise on failure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ToolConfig, dump_config, parse_config
from .gait import (GaitPattern, diagram_from_csv, diagram_to_csv, gait_diagram, make_timeline,
                   reconstruct_gait, timeline_intervals)
from .imitation import reward_term
from .ocp import (ControlLayout, OcpProblem, StackedControl, cost_gradient, default_initial_guess,
                  evaluate_cost, make_problem)
from .synthesis import generate_reference
from .vhipm import PendulumState


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def random_instance(rng: np.random.Generator, gait: GaitPattern, n_steps: int = 10, dt: float = 0.025):
    """A perturbed OCP instance and a feasible, non-trivial control for it."""
    r0 = np.array([rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(0.28, 0.36)])
    v0 = np.array([rng.uniform(-0.5, 1.0), rng.uniform(-0.2, 0.2), rng.uniform(-0.1, 0.1)])
    command = (rng.uniform(-0.5, 1.0), rng.uniform(-0.2, 0.2), rng.uniform(-0.5, 0.5))
    problem = make_problem(gait, r0, v0, command, dt=dt, n_steps=n_steps,
                           start_time=rng.uniform(0, gait.period))
    U = default_initial_guess(problem)
    U.h_ddot = U.h_ddot + rng.normal(0.0, 1.0, U.h_ddot.shape)
    U.weights = [w if len(w) == 0 else _random_simplex(rng, len(w)) for w in U.weights]
    U.footholds = U.footholds + np.column_stack([rng.normal(0, 0.03, (len(U.footholds), 2)),
                                                 np.zeros(len(U.footholds))])
    return problem, U


def _random_simplex(rng, m):
    w = rng.uniform(0.2, 1.0, m)
    return w / w.sum()


def gradient_error(problem: OcpProblem, U: StackedControl, cfg: ToolConfig | None = None, step: float = 1e-6) -> float:
    """Max relative error of the analytic gradient against central differences.

    Entries are compared relative to ``max(|analytic|, |fd|, 1e-3 * max|fd|)``
    so near-zero components do not dominate.
    """
    weights = cfg.ocp if cfg else None
    settings = cfg.solver if cfg else None
    layout = ControlLayout(problem)
    g = cost_gradient(problem, U, weights, settings)
    x = U.to_vector()
    fd = np.empty_like(x)
    for i in range(len(x)):
        xp, xm = x.copy(), x.copy()
        xp[i] += step
        xm[i] -= step
        fp = evaluate_cost(problem, StackedControl.from_vector(layout, xp), weights, settings)
        fm = evaluate_cost(problem, StackedControl.from_vector(layout, xm), weights, settings)
        fd[i] = (fp - fm) / (2 * step)
    floor = 1e-3 * float(np.max(np.abs(fd)))
    denom = np.maximum(np.maximum(np.abs(g), np.abs(fd)), floor)
    return float(np.max(np.abs(g - fd) / denom))


def reintegrate(problem: OcpProblem, U: StackedControl) -> np.ndarray:
    """Plain-loop integration of the stepped pendulum, written without the solver's helpers."""
    layout = ControlLayout(problem)
    dt = problem.dt
    gx, gy, gz = (float(v) for v in problem.gravity)
    gn = math.sqrt(gx * gx + gy * gy + gz * gz)
    prev = [float(v) for v in problem.r0 - problem.v0 * dt]
    cur = [float(v) for v in problem.r0]
    out = []
    for k in range(problem.n_steps):
        legs = layout.stance[k]
        if legs:
            px = py = pz = 0.0
            for i, (leg, src) in enumerate(zip(legs, layout.source[k])):
                w = float(U.weights[k][i])
                p = problem.foot_positions[leg] if src < 0 else U.footholds[src]
                px += w * p[0]
                py += w * p[1]
                pz += w * p[2]
            s = (float(U.h_ddot[k]) + gn) / cur[2]
            a = [(cur[0] - px) * s + gx, (cur[1] - py) * s + gy, (cur[2] - pz) * s + gz]
        else:
            a = [gx, gy, gz]
        nxt = [2 * cur[i] - prev[i] + a[i] * dt * dt for i in range(3)]
        out.append(nxt)
        prev, cur = cur, nxt
    return np.array(out)


def check_gaits(cfg: ToolConfig) -> list[CheckResult]:
    out = []
    dt = cfg.rates.solver_dt
    for name, g in cfg.gaits.items():
        n = int(round(4 * g.period / dt))
        tl = make_timeline(g, 0.0, n, dt)
        t_end = tl.start_time + n * dt
        # complete stance intervals only; the window edges cut the others
        lengths = [iv.end - iv.start for iv in timeline_intervals(tl)
                   if iv.contact and iv.start > tl.start_time + 1e-9 and iv.end < t_end - 1e-9]
        duty_ok = bool(lengths) and all(abs(L - g.stance_duration) <= dt + 1e-9 for L in lengths)
        rows = diagram_from_csv(diagram_to_csv(gait_diagram(g)))
        duty, offs = reconstruct_gait(rows, g.period)
        rt_ok = abs(duty - g.duty_cycle) < 1e-9 and all(abs(a - b) < 1e-9 for a, b in zip(offs, g.phase_offsets))
        out.append(CheckResult(f"gait:{name}", duty_ok and rt_ok,
                               f"duty within one step: {duty_ok}; diagram round-trip: {rt_ok}"))
    return out


def check_gradient(cfg: ToolConfig, seed: int, n: int = 3) -> CheckResult:
    rng = np.random.default_rng(seed)
    gaits = list(cfg.gaits.values())
    worst = 0.0
    for i in range(n):
        problem, U = random_instance(rng, gaits[i % len(gaits)], dt=cfg.rates.solver_dt)
        worst = max(worst, gradient_error(problem, U, cfg))
    return CheckResult("gradient", worst <= 1e-5, f"max relative error {worst:.3g}")


def check_references(cfg: ToolConfig, vx: float = 0.5) -> list[CheckResult]:
    out = []
    syn = cfg.synthesis()
    for name, g in cfg.gaits.items():
        state = PendulumState(np.array([0.0, 0.0, cfg.targets.base_height]), np.array([vx, 0.0, 0.0]))
        res = generate_reference(state, None, (vx, 0.0, 0.0), g, 2 * g.period, syn)
        dyn = float(np.max(np.abs(reintegrate(res.problem, res.controls) - res.states)))
        ws = [w for w in res.controls.weights if len(w)]
        wmin = min(float(w.min()) for w in ws)
        wsum = max(abs(float(w.sum()) - 1.0) for w in ws)
        ok = res.report.converged and dyn <= 1e-10 and wmin >= -1e-8 and wsum <= 1e-6
        out.append(CheckResult(f"reference:{name}", ok,
                               f"converged={res.report.converged} dynamics={dyn:.2e} "
                               f"min weight={wmin:.2e} sum error={wsum:.2e}"))
    return out


def check_rewards(cfg: ToolConfig, seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    ok = True
    for _ in range(20):
        x = rng.normal(size=3)
        ok &= reward_term(x, x, rng.uniform(0.01, 2.0, 3)) == 1.0
    r = cfg.rewards
    for sigma in (r.base_height, r.yaw_rate, r.action_rate, r.feet_slip, r.pitch_roll):
        ok &= abs(reward_term(sigma, 0.0, sigma) - math.exp(-1)) <= 1e-12
    for sig in (r.base_velocity, r.feet_position):
        for i in range(3):
            e = np.zeros(3)
            e[i] = sig[i]
            ok &= abs(reward_term(e, np.zeros(3), sig) - math.exp(-1)) <= 1e-12
    return CheckResult("rewards", bool(ok), "identity and unit-error values")


def check_config(cfg: ToolConfig) -> CheckResult:
    ok = parse_config(dump_config(cfg)) == cfg
    return CheckResult("config", ok, "dump/load round-trip")


def run_checks(cfg: ToolConfig, seed: int = 0) -> list[CheckResult]:
    results = [check_config(cfg)]
    results += check_gaits(cfg)
    results.append(check_gradient(cfg, seed))
    results += check_references(cfg)
    results.append(check_rewards(cfg, seed))
    return results
