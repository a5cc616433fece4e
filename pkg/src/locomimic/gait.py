"""
Periodic gait patterns and the contact timelines derived from them.

Legs are indexed FL=0, FR=1, HL=2, HR=3 everywhere in the package. A leg's
normalized phase at time ``t`` is ``frac(t / period - offset)``; the leg is in
stance while that phase is strictly below the duty cycle, so a phase exactly
equal to the duty cycle is the first instant of swing.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from .errors import InvalidParameterError

LEGS = ("FL", "FR", "HL", "HR")
N_LEGS = 4

# snaps float noise in t/period onto exact phase boundaries
_PHASE_EPS = 1e-9


@dataclass(frozen=True)
class GaitPattern:
    """Named periodic gait.

    ``phase_offsets`` holds the offsets of FR, HL and HR relative to FL,
    expressed as fractions of the period.
    """

    name: str
    period: float
    duty_cycle: float
    phase_offsets: tuple[float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "phase_offsets", tuple(float(o) for o in self.phase_offsets))
        if not self.period > 0:
            raise InvalidParameterError(f"gait {self.name!r}: period must be > 0, got {self.period}")
        if not 0 < self.duty_cycle <= 1:
            raise InvalidParameterError(
                f"gait {self.name!r}: duty_cycle must be in (0, 1], got {self.duty_cycle}")
        if len(self.phase_offsets) != 3:
            raise InvalidParameterError(f"gait {self.name!r}: expected 3 phase offsets")
        for o in self.phase_offsets:
            if not 0 <= o < 1:
                raise InvalidParameterError(
                    f"gait {self.name!r}: phase offsets must lie in [0, 1), got {o}")

    @property
    def offsets(self) -> np.ndarray:
        """Offsets for all four legs (FL first, always 0)."""
        return np.array((0.0,) + self.phase_offsets)

    @property
    def stance_duration(self) -> float:
        return self.duty_cycle * self.period

    @property
    def swing_duration(self) -> float:
        return (1.0 - self.duty_cycle) * self.period


BUILTIN_GAITS = {
    "trot": GaitPattern("trot", 0.5, 0.5, (0.5, 0.5, 0.0)),
    "pace": GaitPattern("pace", 0.5, 0.6, (0.5, 0.0, 0.5)),
    "pronk": GaitPattern("pronk", 0.4, 0.6, (0.0, 0.0, 0.0)),
    "bound": GaitPattern("bound", 0.4, 0.6, (0.0, 0.5, 0.5)),
    "gallop": GaitPattern("gallop", 0.5, 0.45, (0.75, 0.5, 0.25)),
}


def leg_phase(gait: GaitPattern, t: float) -> np.ndarray:
    """Normalized gait phase in [0, 1) of each leg at time ``t``."""
    x = t / gait.period - gait.offsets
    p = x - np.floor(x)
    # values a hair below 1 are really 0 (e.g. 0.3 / 0.1 style rounding)
    p[p > 1.0 - _PHASE_EPS] = 0.0
    return p


def in_stance(gait: GaitPattern, phase: np.ndarray) -> np.ndarray:
    return phase < gait.duty_cycle - _PHASE_EPS


@dataclass
class ContactTimeline:
    """Per-leg stance/swing schedule sampled at ``start_time + k * dt``.

    ``contact`` and ``phase`` have shape (N_T, 4). ``prev_contact`` holds the
    flags one step before the window, which decides whether a stance interval
    open at step 0 began with a touchdown inside the window.
    """

    dt: float
    start_time: float
    contact: np.ndarray
    phase: np.ndarray
    prev_contact: np.ndarray = field(default_factory=lambda: np.zeros(N_LEGS, dtype=bool))
    gait: GaitPattern | None = None

    @property
    def n_steps(self) -> int:
        return self.contact.shape[0]

    def times(self) -> np.ndarray:
        return self.start_time + self.dt * np.arange(self.n_steps)

    def stance_legs(self, k: int) -> list[int]:
        return [leg for leg in range(N_LEGS) if self.contact[k, leg]]


def make_timeline(gait: GaitPattern, start_time: float, horizon_steps: int, dt: float) -> ContactTimeline:
    if not dt > 0:
        raise InvalidParameterError(f"dt must be > 0, got {dt}")
    if horizon_steps < 1:
        raise InvalidParameterError(f"horizon_steps must be >= 1, got {horizon_steps}")
    phase = np.array([leg_phase(gait, start_time + k * dt) for k in range(horizon_steps)])
    contact = in_stance(gait, phase)
    prev = in_stance(gait, leg_phase(gait, start_time - dt))
    return ContactTimeline(dt=dt, start_time=start_time, contact=contact, phase=phase,
                           prev_contact=prev, gait=gait)


def phase_variables(gait: GaitPattern, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Contact phase angles of all legs plus their (sin, cos) pairs.

    Stance progress maps linearly onto [0, pi), swing progress onto [-pi, 0).
    Returns ``(angles, sincos)`` with shapes (4,) and (4, 2).
    """
    p = leg_phase(gait, t)
    d = gait.duty_cycle
    angles = np.empty(N_LEGS)
    stance = in_stance(gait, p)
    angles[stance] = math.pi * p[stance] / d
    if d < 1.0:
        swing = ~stance
        q = np.clip((p[swing] - d) / (1.0 - d), 0.0, 1.0)
        angles[swing] = -math.pi + math.pi * q
    return angles, np.stack([np.sin(angles), np.cos(angles)], axis=1)


def swing_progress(gait: GaitPattern, phase: float) -> float:
    """Swing progress in [0, 1] for a leg whose normalized phase is ``phase``."""
    if gait.duty_cycle >= 1.0:
        return 0.0
    return min(max((phase - gait.duty_cycle) / (1.0 - gait.duty_cycle), 0.0), 1.0)


class Footfall(NamedTuple):
    leg: int
    time: float
    step: int


def footfall_sequence(timeline: ContactTimeline) -> list[Footfall]:
    """Swing-to-stance transitions inside the window, in footfall order.

    Simultaneous touchdowns keep the fixed leg order FL, FR, HL, HR.
    """
    seq = []
    prev = timeline.prev_contact
    for k in range(timeline.n_steps):
        cur = timeline.contact[k]
        for leg in range(N_LEGS):
            if cur[leg] and not prev[leg]:
                seq.append(Footfall(leg, timeline.start_time + k * timeline.dt, k))
        prev = cur
    return seq


# -- Hildebrand gait diagrams -------------------------------------------------

class Interval(NamedTuple):
    leg: str
    start: float
    end: float
    contact: bool


def gait_diagram(gait: GaitPattern, cycles: int = 1) -> list[Interval]:
    """Stance/swing intervals of each leg on a continuous clock over ``cycles`` periods."""
    T = gait.period
    total = cycles * T
    rows = []
    for leg, off in enumerate(gait.offsets):
        # boundaries: touchdowns at (off + n) * T, liftoffs at (off + d + n) * T
        cuts = {0.0, total}
        for n in range(-1, cycles + 1):
            for b in (off + n, off + gait.duty_cycle + n):
                tb = b * T
                if 0.0 < tb < total:
                    cuts.add(tb)
        cuts = sorted(cuts)
        for a, b in zip(cuts[:-1], cuts[1:]):
            mid = 0.5 * (a + b)
            rows.append(Interval(LEGS[leg], a, b, bool(in_stance(gait, leg_phase(gait, mid))[leg])))
    return _merge(rows)


def timeline_intervals(timeline: ContactTimeline) -> list[Interval]:
    """Intervals of constant contact on the discrete timeline (step boundaries)."""
    rows = []
    t0, dt, n = timeline.start_time, timeline.dt, timeline.n_steps
    for leg in range(N_LEGS):
        flags = timeline.contact[:, leg]
        start = 0
        for k in range(1, n + 1):
            if k == n or flags[k] != flags[start]:
                rows.append(Interval(LEGS[leg], t0 + start * dt, t0 + k * dt, bool(flags[start])))
                start = k
    return rows


def _merge(rows: list[Interval]) -> list[Interval]:
    out: list[Interval] = []
    for r in rows:
        if out and out[-1].leg == r.leg and out[-1].contact == r.contact and out[-1].end == r.start:
            out[-1] = out[-1]._replace(end=r.end)
        else:
            out.append(r)
    return out


def diagram_to_csv(rows: Iterable[Interval]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["leg", "interval_start", "interval_end", "contact_flag"])
    for r in rows:
        w.writerow([r.leg, f"{r.start:.17g}", f"{r.end:.17g}", int(r.contact)])
    return buf.getvalue()


def diagram_from_csv(text: str) -> list[Interval]:
    reader = csv.DictReader(io.StringIO(text))
    return [Interval(row["leg"], float(row["interval_start"]), float(row["interval_end"]),
                     bool(int(row["contact_flag"]))) for row in reader]


def reconstruct_gait(rows: Iterable[Interval], period: float, ndigits: int = 12) -> tuple[float, tuple[float, float, float]]:
    """Recover (duty_cycle, offsets) from a one-period diagram.

    Touchdown times are taken as the start of each stance interval that follows
    a swing interval (cyclically); offsets are measured against FL.
    """
    by_leg: dict[str, list[Interval]] = {name: [] for name in LEGS}
    for r in rows:
        by_leg[r.leg].append(r)
    duty = None
    touchdown = {}
    for name, ivs in by_leg.items():
        ivs.sort(key=lambda r: r.start)
        stance = sum(r.end - r.start for r in ivs if r.contact)
        d = round(stance / period, ndigits)
        duty = d if duty is None else duty
        if d != duty:
            raise InvalidParameterError(f"inconsistent duty cycles across legs ({d} vs {duty})")
        td = None
        for i, r in enumerate(ivs):
            before = ivs[i - 1]
            if r.contact and (not before.contact or len(ivs) == 1):
                td = r.start
                break
        touchdown[name] = td if td is not None else ivs[0].start
    ref = touchdown["FL"]
    offsets = tuple(round(((touchdown[n] - ref) / period) % 1.0, ndigits) % 1.0 for n in LEGS[1:])
    return duty, offsets
