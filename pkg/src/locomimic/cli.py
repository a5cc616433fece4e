"""Command-line entry point: ``locomimic <subcommand> [options]``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .checks import run_checks
from .config import ToolConfig, load_config
from .errors import ConfigError, LocomimicError
from .gait import diagram_to_csv, gait_diagram
from .harness import (Disturbance, receding_horizon_run, reward_breakdown_csv, run_log_csv, run_summary_json,
                      sample_randomization, tracking_metrics)
from .imitation import RobotSnapshot, reward_breakdown, to_yaw_frame
from .serialization import export_trajectory, fmt, read_trajectory, write_text
from .synthesis import generate_reference, kinematic_baseline
from .vhipm import PendulumState

OUT_ENV = "LOCOMIMIC_OUT"


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML config file (defaults built in)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--out", type=Path, help=f"output directory (else ${OUT_ENV}, else config output_dir)")


def _motion_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gait", default="trot")
    p.add_argument("--vx", type=float, default=0.0)
    p.add_argument("--vy", type=float, default=0.0)
    p.add_argument("--wz", type=float, default=0.0, help="yaw rate command, rad/s")
    p.add_argument("--horizon", type=float, default=None, help="seconds (default two gait periods)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="locomimic", description="Reference motions for legged locomotion.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")
    sub.required = True

    p = sub.add_parser("generate", help="OCP-backed reference motion")
    _common(p)
    _motion_args(p)

    p = sub.add_parser("baseline", help="kinematic baseline reference")
    _common(p)
    _motion_args(p)

    p = sub.add_parser("reward", help="score a logged trajectory against a reference")
    _common(p)
    p.add_argument("--trajectory", type=Path, required=True, help="logged frames (CSV or JSON)")
    p.add_argument("--reference", type=Path, required=True, help="reference frames (CSV or JSON)")

    p = sub.add_parser("mpc-run", help="receding-horizon run on the pendulum plant")
    _common(p)
    p.add_argument("--gait", default="trot")
    p.add_argument("--vx", type=float, default=0.0)
    p.add_argument("--vy", type=float, default=0.0)
    p.add_argument("--wz", type=float, default=0.0)
    p.add_argument("--duration", type=float, default=3.0)
    p.add_argument("--push", type=float, nargs=3, metavar=("DVX", "DVY", "DVZ"),
                   help="velocity impulse, m/s")
    p.add_argument("--push-time", type=float, default=1.0)
    p.add_argument("--random-push", action="store_true",
                   help="draw the impulse from the randomization ranges using --seed")
    p.add_argument("--latency", action="store_true", help="delay inputs by the configured actuator latency")

    p = sub.add_parser("gait-diagram", help="stance/swing intervals as CSV")
    _common(p)
    p.add_argument("--gait", default="trot")
    p.add_argument("--cycles", type=int, default=1)

    p = sub.add_parser("check", help="run the invariant suite")
    _common(p)
    return parser


def _out_dir(args, cfg: ToolConfig) -> Path:
    if args.out is not None:
        return args.out
    env = os.environ.get(OUT_ENV)
    return Path(env) if env else Path(cfg.output_dir)


def _cmd_generate(args, cfg: ToolConfig, out: Path, kinematic: bool) -> int:
    gait = cfg.gait(args.gait)
    horizon = args.horizon if args.horizon is not None else 2 * gait.period
    command = (args.vx, args.vy, args.wz)
    state = PendulumState(np.array([0.0, 0.0, cfg.targets.base_height]), np.array([args.vx, args.vy, 0.0]))
    syn = cfg.synthesis()
    stem = "baseline" if kinematic else "frames"
    if kinematic:
        res = kinematic_baseline(state, None, command, gait, horizon, syn)
    else:
        res = generate_reference(state, None, command, gait, horizon, syn)
    path = export_trajectory(res.frames, out / f"{stem}.{args.format}", args.format)
    report = {"gait": gait.name, "command": list(command), "horizon": horizon, "frames": len(res.frames),
              "seed": args.seed, "kinematic": kinematic, "degraded": res.degraded}
    if res.report is not None:
        report["solver"] = res.report.to_dict(include_timing=False)
    write_text(out / f"{stem}_report.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(res.frames)} frames to {path}")
    if res.degraded:
        print("warning: solver did not converge; frames come from the best iterate", file=sys.stderr)
    return 0


def _snapshot_from_frame(frame, prev):
    """Robot snapshot built from a logged frame.

    Foot velocities are backward differences, taken only for feet in contact
    in both frames; a swing sample says nothing about the velocity at touchdown.
    """
    foot_vel = np.zeros_like(frame.feet)
    if prev is not None and frame.time > prev.time:
        both = frame.contact & prev.contact
        foot_vel[both] = (frame.feet[both] - prev.feet[both]) / (frame.time - prev.time)
    return RobotSnapshot(base_pos=frame.base_pos, yaw=frame.yaw, base_lin_vel=to_yaw_frame(frame.base_vel, frame.yaw),
                         base_ang_vel=np.array([0.0, 0.0, frame.yaw_rate]), feet=frame.feet,
                         foot_contact=frame.contact, foot_vel=foot_vel)


def _cmd_reward(args, cfg: ToolConfig, out: Path) -> int:
    traj = read_trajectory(args.trajectory)
    ref = read_trajectory(args.reference)
    if len(traj) != len(ref):
        raise LocomimicError(f"trajectory has {len(traj)} frames, reference has {len(ref)}")
    for a, b in zip(traj, ref):
        if abs(a.time - b.time) > 1e-9:
            raise LocomimicError(f"frame times differ: {a.time} vs {b.time}")
    rows = []
    prev = None
    zeros = np.zeros(12)
    for a, b in zip(traj, ref):
        rows.append(reward_breakdown(_snapshot_from_frame(a, prev), b, zeros, zeros, cfg.rewards))
        prev = a
    factors = list(rows[0])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time", *factors])
    for f, r in zip(traj, rows):
        w.writerow([fmt(f.time)] + [fmt(r[k]) for k in factors])
    write_text(out / "rewards.csv", buf.getvalue())
    summary = {k: float(np.mean([r[k] for r in rows])) for k in factors}
    write_text(out / "reward_summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"mean total reward {summary['total']:.6f} over {len(rows)} frames")
    return 0


def _cmd_mpc(args, cfg: ToolConfig, out: Path) -> int:
    gait = cfg.gait(args.gait)
    hcfg = cfg.harness_config()
    if args.latency:
        hcfg.latency = cfg.randomization.latency
    disturbances = []
    if args.random_push:
        draw = sample_randomization(cfg.randomization, np.random.default_rng(args.seed))
        disturbances.append(Disturbance(args.push_time, tuple(float(v) for v in draw.linear_impulse),
                                        tuple(float(v) for v in draw.angular_impulse)))
    elif args.push is not None:
        disturbances.append(Disturbance(args.push_time, tuple(args.push)))
    runlog = receding_horizon_run((args.vx, args.vy, args.wz), gait, args.duration, disturbances, hcfg)
    metrics = tracking_metrics(runlog, threshold=hcfg.recovery_threshold)
    write_text(out / "run.csv", run_log_csv(runlog))
    write_text(out / "rewards.csv", reward_breakdown_csv(runlog))
    write_text(out / "summary.json", run_summary_json(runlog, metrics) + "\n")
    series = metrics["series"]
    write_text(out / "plot_series.json", json.dumps(series, indent=1) + "\n")
    print(f"{runlog.n_steps} steps, mean velocity error {metrics['mean_velocity_error']:.4f} m/s, "
          f"height RMSE {metrics['height_rmse']:.4f} m, degraded steps {metrics['degraded_steps']}")
    if runlog.singularity:
        print("error: plant hit the CoM height singularity", file=sys.stderr)
        return 1
    return 0


def _cmd_diagram(args, cfg: ToolConfig, out: Path) -> int:
    gait = cfg.gait(args.gait)
    if args.cycles < 1:
        raise LocomimicError("--cycles must be >= 1")
    path = out / f"gait_diagram_{gait.name}.csv"
    write_text(path, diagram_to_csv(gait_diagram(gait, args.cycles)))
    print(f"wrote {path}")
    return 0


def _cmd_check(args, cfg: ToolConfig) -> int:
    results = run_checks(cfg, args.seed)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        out = _out_dir(args, cfg)
        if args.command == "generate":
            return _cmd_generate(args, cfg, out, kinematic=False)
        if args.command == "baseline":
            return _cmd_generate(args, cfg, out, kinematic=True)
        if args.command == "reward":
            return _cmd_reward(args, cfg, out)
        if args.command == "mpc-run":
            return _cmd_mpc(args, cfg, out)
        if args.command == "gait-diagram":
            return _cmd_diagram(args, cfg, out)
        if args.command == "check":
            return _cmd_check(args, cfg)
    except (LocomimicError, ValueError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2 if isinstance(exc, ConfigError) else 1
    parser.error(f"unknown subcommand {args.command!r}")
    return 2


if __name__ == "__main__":
    sys.exit(main())
