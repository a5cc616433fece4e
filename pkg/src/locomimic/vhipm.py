"""
Variable-height inverted pendulum model (VHIPM).

The CoM accelerates away from the center of pressure (CoP), a convex
combination of the stance footholds, with a gain set by the commanded vertical
acceleration::

    r_ddot = (r - x_cg) * (h_ddot + |g|) / r_z + g

With no foot on the ground the model falls back to ballistic motion and the
vertical-acceleration input is ignored. World frame is z-up.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FlightPhaseError, InvalidInputError, InvalidParameterError, SingularityError

GRAVITY = np.array([0.0, 0.0, -9.81])

WEIGHT_SUM_TOL = 1e-9
# stance dynamics below this CoM height are rejected, not clamped
MIN_COM_HEIGHT = 0.05


@dataclass
class PendulumState:
    r: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float).reshape(3)
        self.v = np.asarray(self.v, dtype=float).reshape(3)

    def copy(self) -> "PendulumState":
        return PendulumState(self.r.copy(), self.v.copy())


@dataclass
class ControlInput:
    h_ddot: float
    weights: np.ndarray

    def __post_init__(self):
        self.h_ddot = float(self.h_ddot)
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)


def _as_support(support) -> np.ndarray:
    s = np.asarray(support, dtype=float)
    if s.size == 0:
        return np.zeros((0, 3))
    return s.reshape(-1, 3)


def compute_cop(support, weights) -> np.ndarray:
    """Center of pressure ``sum_i w_i s_i`` of the stance footholds."""
    s = _as_support(support)
    w = np.asarray(weights, dtype=float).reshape(-1)
    if len(s) == 0:
        raise FlightPhaseError("no stance foot: CoP undefined, use ballistic dynamics")
    if len(w) != len(s):
        raise InvalidInputError(f"{len(w)} weights for {len(s)} footholds")
    if np.any(w < 0):
        raise InvalidInputError(f"negative CoP weight: {w}")
    if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
        raise InvalidInputError(f"CoP weights sum to {w.sum():.12g}, expected 1")
    return w @ s


def gravity_norm(g: np.ndarray) -> float:
    n = float(np.linalg.norm(g))
    if not n > 0:
        raise InvalidParameterError("gravity vector must be non-zero")
    return n


def pendulum_accel(r, h_ddot, cop, g=GRAVITY) -> np.ndarray:
    """Stance acceleration for a given CoP point (no weight checks)."""
    r = np.asarray(r, dtype=float)
    if r[2] < MIN_COM_HEIGHT:
        raise SingularityError(f"CoM height {r[2]:.4g} m below {MIN_COM_HEIGHT} m in stance")
    return (r - cop) * ((h_ddot + gravity_norm(g)) / r[2]) + g


def continuous_accel(state, u: ControlInput, support, g=GRAVITY) -> np.ndarray:
    """CoM acceleration. ``state`` may be a PendulumState or a bare position."""
    r = state.r if isinstance(state, PendulumState) else np.asarray(state, dtype=float)
    g = np.asarray(g, dtype=float)
    s = _as_support(support)
    if len(s) == 0:
        return g.copy()
    return pendulum_accel(r, u.h_ddot, compute_cop(s, u.weights), g)


def discrete_step(r_prev, r_curr, u: ControlInput, support, dt: float, g=GRAVITY) -> np.ndarray:
    """Semi-implicit Euler step: ``r_next = 2 r_curr - r_prev + a(r_curr) dt^2``."""
    if not dt > 0:
        raise InvalidParameterError(f"dt must be > 0, got {dt}")
    r_prev = np.asarray(r_prev, dtype=float)
    r_curr = np.asarray(r_curr, dtype=float)
    return 2.0 * r_curr - r_prev + continuous_accel(r_curr, u, support, g) * dt**2
