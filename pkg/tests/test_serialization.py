import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from locomimic.gait import BUILTIN_GAITS
from locomimic.serialization import (FRAME_COLUMNS, export_trajectory, frames_from_csv, frames_from_json,
                                     frames_to_csv, frames_to_json, read_trajectory)
from locomimic.synthesis import ReferenceFrame, kinematic_baseline
from locomimic.vhipm import PendulumState

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@st.composite
def frames(draw):
    n = draw(st.integers(1, 5))
    out = []
    for i in range(n):
        out.append(ReferenceFrame(
            float(i) * 0.02 + draw(st.floats(0, 0.01)), draw(arrays(float, 3, elements=finite)),
            draw(arrays(float, 3, elements=finite)), draw(finite), draw(finite),
            draw(arrays(float, (4, 3), elements=finite)), draw(arrays(bool, 4)),
            draw(arrays(float, 4, elements=finite))))
    return out


def _same(a, b):
    assert len(a) == len(b)
    for x, y in zip(a, b):
        assert x.time == y.time and x.yaw == y.yaw and x.yaw_rate == y.yaw_rate
        for attr in ("base_pos", "base_vel", "feet", "contact", "phase"):
            np.testing.assert_array_equal(getattr(x, attr), getattr(y, attr))


@given(frames())
@settings(max_examples=40)
def test_csv_round_trip_is_lossless(fs):
    _same(frames_from_csv(frames_to_csv(fs)), fs)


@given(frames())
@settings(max_examples=40)
def test_json_round_trip_is_lossless(fs):
    _same(frames_from_json(frames_to_json(fs)), fs)


def test_csv_schema():
    fs = kinematic_baseline(PendulumState([0, 0, 0.32], [0, 0, 0]), None, (0.5, 0, 0), BUILTIN_GAITS["trot"], 0.5).frames
    lines = frames_to_csv(fs).splitlines()
    assert lines[0].split(",") == FRAME_COLUMNS
    assert len(FRAME_COLUMNS) == 1 + 3 + 3 + 2 + 12 + 4 + 4
    assert len(lines) == len(fs) + 1


def test_csv_rejects_wrong_header():
    with pytest.raises(ValueError):
        frames_from_csv("a,b\n1,2\n")


def test_export_and_read(tmp_path):
    fs = kinematic_baseline(PendulumState([0, 0, 0.32], [0, 0, 0]), None, (0.5, 0, 0), BUILTIN_GAITS["pace"], 0.5).frames
    for fmt in ("csv", "json"):
        p = export_trajectory(fs, tmp_path / "sub" / f"frames.{fmt}")
        _same(read_trajectory(p), fs)
    assert json.loads((tmp_path / "sub" / "frames.json").read_text())["columns"] == FRAME_COLUMNS
    assert not list(tmp_path.glob("sub/*.tmp"))
    with pytest.raises(ValueError):
        export_trajectory([], tmp_path / "x.csv")
    with pytest.raises(ValueError):
        export_trajectory(fs, tmp_path / "x.bin", "bin")


def test_hundred_frames_give_101_lines():
    fs = kinematic_baseline(PendulumState([0, 0, 0.32], [0, 0, 0]), None, (0.2, 0, 0), BUILTIN_GAITS["trot"], 2.0).frames
    assert len(fs) == 100
    assert len(frames_to_csv(fs).splitlines()) == 101


def test_csv_and_json_agree():
    fs = kinematic_baseline(PendulumState([0, 0, 0.32], [0, 0, 0]), None, (0.3, 0.1, 0.4), BUILTIN_GAITS["bound"], 0.8).frames
    _same(frames_from_csv(frames_to_csv(fs)), frames_from_json(frames_to_json(fs)))
