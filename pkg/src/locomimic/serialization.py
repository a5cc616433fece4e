"""Lossless CSV/JSON export of reference frames."""

from __future__ import annotations

import csv
import io
import json
import os
from pathlib import Path

import numpy as np

from .gait import LEGS, N_LEGS
from .synthesis import ReferenceFrame

FRAME_COLUMNS = (
    ["time", "x", "y", "z", "vx", "vy", "vz", "yaw", "yaw_rate"]
    + [f"{leg}_{a}" for leg in LEGS for a in "xyz"]
    + [f"contact_{leg}" for leg in LEGS]
    + [f"phase_{leg}" for leg in LEGS]
)


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def frame_to_row(f: ReferenceFrame) -> list[str]:
    return ([fmt(f.time)] + [fmt(v) for v in f.base_pos] + [fmt(v) for v in f.base_vel]
            + [fmt(f.yaw), fmt(f.yaw_rate)] + [fmt(v) for v in np.asarray(f.feet).reshape(-1)]
            + [str(int(c)) for c in f.contact] + [fmt(v) for v in f.phase])


def row_to_frame(row: dict) -> ReferenceFrame:
    g = lambda k: float(row[k])  # noqa: E731
    return ReferenceFrame(
        time=g("time"),
        base_pos=np.array([g("x"), g("y"), g("z")]),
        base_vel=np.array([g("vx"), g("vy"), g("vz")]),
        yaw=g("yaw"),
        yaw_rate=g("yaw_rate"),
        feet=np.array([[g(f"{leg}_{a}") for a in "xyz"] for leg in LEGS]),
        contact=np.array([int(row[f"contact_{leg}"]) != 0 for leg in LEGS]),
        phase=np.array([g(f"phase_{leg}") for leg in LEGS]),
    )


def frames_to_csv(frames: list[ReferenceFrame]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FRAME_COLUMNS)
    for f in frames:
        w.writerow(frame_to_row(f))
    return buf.getvalue()


def frames_from_csv(text: str) -> list[ReferenceFrame]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != FRAME_COLUMNS:
        raise ValueError(f"unexpected trajectory columns: {reader.fieldnames}")
    return [row_to_frame(r) for r in reader]


def frame_to_dict(f: ReferenceFrame) -> dict:
    # repr-based float output is already shortest-round-trip
    return {
        "time": float(f.time),
        "base_pos": [float(v) for v in f.base_pos],
        "base_vel": [float(v) for v in f.base_vel],
        "yaw": float(f.yaw),
        "yaw_rate": float(f.yaw_rate),
        "feet": [[float(v) for v in p] for p in np.asarray(f.feet)],
        "contact": [bool(c) for c in f.contact],
        "phase": [float(v) for v in f.phase],
    }


def frame_from_dict(d: dict) -> ReferenceFrame:
    return ReferenceFrame(d["time"], np.array(d["base_pos"], dtype=float), np.array(d["base_vel"], dtype=float),
                          float(d["yaw"]), float(d["yaw_rate"]),
                          np.array(d["feet"], dtype=float).reshape(N_LEGS, 3),
                          np.array(d["contact"], dtype=bool), np.array(d["phase"], dtype=float))


def frames_to_json(frames: list[ReferenceFrame]) -> str:
    return json.dumps({"columns": FRAME_COLUMNS, "frames": [frame_to_dict(f) for f in frames]}, indent=1) + "\n"


def frames_from_json(text: str) -> list[ReferenceFrame]:
    return [frame_from_dict(d) for d in json.loads(text)["frames"]]


def export_trajectory(frames: list[ReferenceFrame], path, format: str | None = None) -> Path:
    """Write frames as CSV or JSON; the format defaults to the file suffix."""
    if not frames:
        raise ValueError("no frames to export")
    path = Path(path)
    format = (format or path.suffix.lstrip(".") or "csv").lower()
    if format == "csv":
        text = frames_to_csv(frames)
    elif format == "json":
        text = frames_to_json(frames)
    else:
        raise ValueError(f"unknown trajectory format {format!r}")
    write_text(path, text)
    return path


def read_trajectory(path) -> list[ReferenceFrame]:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        return frames_from_json(text)
    return frames_from_csv(text)


def write_text(path, text: str) -> None:
    """Write through a temp file so readers never see a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)
