"""Height fields and Perlin-noise terrain."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, OutOfBoundsError

# |2D Perlin noise| never exceeds sqrt(2)/2 with unit gradients
_PERLIN_BOUND = math.sqrt(0.5)


@dataclass
class HeightField:
    """Terrain heights on a regular grid; ``heights[i, j]`` sits at
    ``(origin[0] + i * resolution, origin[1] + j * resolution)``."""

    heights: np.ndarray
    resolution: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        self.heights = np.asarray(self.heights, dtype=float)
        if self.heights.ndim != 2 or min(self.heights.shape) < 2:
            raise InvalidParameterError("height grid must be 2-D with at least 2x2 cells")
        if not self.resolution > 0:
            raise InvalidParameterError(f"resolution must be > 0, got {self.resolution}")
        if not np.all(np.isfinite(self.heights)):
            raise InvalidParameterError("height grid contains non-finite values")
        self.origin = (float(self.origin[0]), float(self.origin[1]))

    @classmethod
    def flat(cls, extent: float = 20.0, resolution: float = 0.1, height: float = 0.0) -> "HeightField":
        n = int(round(extent / resolution)) + 1
        return cls(np.full((n, n), float(height)), resolution, (-extent / 2, -extent / 2))

    @property
    def extent(self) -> tuple[float, float, float, float]:
        nx, ny = self.heights.shape
        x0, y0 = self.origin
        return x0, x0 + (nx - 1) * self.resolution, y0, y0 + (ny - 1) * self.resolution

    def height_at(self, x: float, y: float) -> float:
        """Bilinear interpolation; raises OutOfBoundsError outside the grid."""
        nx, ny = self.heights.shape
        fx = (x - self.origin[0]) / self.resolution
        fy = (y - self.origin[1]) / self.resolution
        tol = 1e-9
        if not (-tol <= fx <= nx - 1 + tol and -tol <= fy <= ny - 1 + tol):
            raise OutOfBoundsError(f"terrain query ({x:.3f}, {y:.3f}) outside grid {self.extent}")
        fx = min(max(fx, 0.0), nx - 1.0)
        fy = min(max(fy, 0.0), ny - 1.0)
        i = min(int(fx), nx - 2)
        j = min(int(fy), ny - 2)
        tx, ty = fx - i, fy - j
        h = self.heights
        return float((1 - tx) * (1 - ty) * h[i, j] + tx * (1 - ty) * h[i + 1, j]
                     + (1 - tx) * ty * h[i, j + 1] + tx * ty * h[i + 1, j + 1])


def _fade(t):
    return t * t * t * (t * (t * 6 - 15) + 10)


def perlin_noise(x: np.ndarray, y: np.ndarray, seed: int) -> np.ndarray:
    """Classic 2-D gradient noise on the integer lattice, values in [-sqrt(2)/2, sqrt(2)/2]."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(256)
    perm = np.concatenate([perm, perm])
    angles = rng.uniform(0.0, 2.0 * math.pi, 256)
    grads = np.stack([np.cos(angles), np.sin(angles)], axis=1)

    xi = np.floor(x).astype(int)
    yi = np.floor(y).astype(int)
    xf = x - xi
    yf = y - yi
    xi &= 255
    yi &= 255

    def corner(dx, dy):
        h = perm[perm[(xi + dx) & 255] + ((yi + dy) & 255)]
        g = grads[h]
        return g[..., 0] * (xf - dx) + g[..., 1] * (yf - dy)

    u, v = _fade(xf), _fade(yf)
    n00, n10 = corner(0, 0), corner(1, 0)
    n01, n11 = corner(0, 1), corner(1, 1)
    nx0 = n00 + u * (n10 - n00)
    nx1 = n01 + u * (n11 - n01)
    return nx0 + v * (nx1 - nx0)


def perlin_heightfield(frequency: float, magnitude: float, seed: int, extent: float = 10.0,
                       resolution: float = 0.05, enforce_ranges: bool = True) -> HeightField:
    """Square Perlin terrain centered on the origin with heights in [0, magnitude].

    ``frequency`` is in lattice cells per meter.
    """
    if enforce_ranges:
        if not 0.0 <= frequency <= 0.9:
            raise InvalidParameterError(f"frequency must be in [0, 0.9], got {frequency}")
        if not 0.0 <= magnitude <= 0.1:
            raise InvalidParameterError(f"magnitude must be in [0, 0.1] m, got {magnitude}")
    n = int(round(extent / resolution)) + 1
    coords = -extent / 2 + resolution * np.arange(n)
    X, Y = np.meshgrid(coords, coords, indexing="ij")
    if magnitude == 0.0:
        return HeightField(np.zeros((n, n)), resolution, (-extent / 2, -extent / 2))
    # lattice shift keeps the origin away from a lattice node (where noise is 0)
    noise = perlin_noise(X * frequency + 0.5, Y * frequency + 0.5, seed)
    h = magnitude * np.clip((noise + _PERLIN_BOUND) / (2 * _PERLIN_BOUND), 0.0, 1.0)
    return HeightField(h, resolution, (-extent / 2, -extent / 2))
