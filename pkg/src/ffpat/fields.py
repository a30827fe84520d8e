"""Grids, phantoms, grid transfer and error metrics.

Fields are plain ``ndarray`` objects of shape ``(n, n)`` paired with a
:class:`Grid`.  Index ``[i, j]`` holds the value at ``(x1, x2) =
(coords[i], coords[j])``, i.e. axis 0 runs along ``x1``.
"""
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from scipy.ndimage import map_coordinates

from .errors import ConfigError, ShapeError

__all__ = [
    "Grid",
    "Bump",
    "PhantomSpec",
    "Medium",
    "build_phantom",
    "default_phantoms",
    "embed",
    "restrict",
    "disc_mask",
    "rel_l2_error",
    "bilinear_sample",
]

SUPPORT_RADIUS = 0.95


@dataclass(frozen=True)
class Grid:
    """Square grid on ``[-extent, extent]^2``.

    A closed grid includes both endpoints (``h = 2L/(n-1)``).  A periodic
    grid samples the torus ``[-L, L)`` with ``n`` distinct nodes
    (``h = 2L/n``); it is the closed grid with ``n + 1`` nodes after
    identifying the duplicated endpoint.
    """

    n: int
    extent: float
    periodic: bool = False

    def __post_init__(self):
        if self.n < 3:
            raise ConfigError(f"grid needs at least 3 nodes per axis, got {self.n}")
        if not self.extent > 0:
            raise ConfigError("grid extent must be positive")

    @property
    def h(self):
        return 2.0 * self.extent / (self.n if self.periodic else self.n - 1)

    @property
    def shape(self):
        return (self.n, self.n)

    @property
    def coords(self):
        return -self.extent + self.h * np.arange(self.n)

    def mesh(self):
        x = self.coords
        return np.meshgrid(x, x, indexing="ij")

    def radius(self):
        x1, x2 = self.mesh()
        return np.hypot(x1, x2)

    def offset_in(self, other):
        """Index of this grid's first node inside ``other`` if the grids are nested, else None."""
        if not np.isclose(self.h, other.h, rtol=1e-12, atol=0.0):
            return None
        k = (other.extent - self.extent) / other.h
        if not np.isclose(k, round(k), atol=1e-9) or round(k) < 0:
            return None
        k = int(round(k))
        if k + self.n > other.n:
            return None
        return k


@dataclass(frozen=True)
class Bump:
    center: Tuple[float, float]
    radius: float
    amplitude: float
    profile: str = "smooth"

    def evaluate(self, x1, x2):
        r = np.hypot(x1 - self.center[0], x2 - self.center[1]) / self.radius
        out = np.zeros_like(r)
        inside = r < 1.0
        if self.profile == "smooth":
            out[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
        elif self.profile == "gaussian-truncated":
            out[inside] = np.exp(-4.5 * r[inside] ** 2)
        else:
            raise ConfigError(f"unknown bump profile {self.profile!r}")
        return self.amplitude * out


TARGETS = ("source", "speed-perturbation", "attenuation")


@dataclass(frozen=True)
class PhantomSpec:
    bumps: Tuple[Bump, ...] = ()
    target: str = "source"

    def validate(self):
        if self.target not in TARGETS:
            raise ConfigError(f"unknown phantom target {self.target!r}")
        for b in self.bumps:
            if b.radius <= 0:
                raise ConfigError(f"bump radius must be positive: {b}")
            if np.hypot(*b.center) + b.radius > SUPPORT_RADIUS + 1e-12:
                raise ConfigError(f"bump support leaves |x| < {SUPPORT_RADIUS}: {b}")


def build_phantom(spec, grid):
    spec.validate()
    x1, x2 = grid.mesh()
    values = np.zeros(grid.shape)
    for b in spec.bumps:
        values += b.evaluate(x1, x2)
    if spec.target == "speed-perturbation":
        values += 1.0
    elif spec.target == "attenuation":
        np.maximum(values, 0.0, out=values)
    return values


def default_phantoms():
    """Fixed source, sound-speed and attenuation phantoms."""
    f = PhantomSpec(
        (
            Bump((-0.3, 0.2), 0.25, 1.0),
            Bump((0.3, 0.3), 0.2, 0.8),
            Bump((0.1, -0.35), 0.3, 0.6),
        ),
        "source",
    )
    c = PhantomSpec((Bump((0.0, 0.0), 0.8, 0.2),), "speed-perturbation")
    a = PhantomSpec((Bump((0.1, 0.1), 0.7, 0.5),), "attenuation")
    return f, c, a


def disc_mask(grid, radius=1.0):
    """Indicator of the open disc ``|x| < radius``."""
    return (grid.radius() < radius).astype(float)


def bilinear_sample(values, grid, x1, x2, fill=0.0):
    """Bilinear interpolation of a grid field at arbitrary points."""
    i = (np.asarray(x1) + grid.extent) / grid.h
    j = (np.asarray(x2) + grid.extent) / grid.h
    return map_coordinates(values, [i, j], order=1, mode="constant", cval=fill)


def _check(values, grid):
    if np.shape(values) != grid.shape:
        raise ShapeError(f"field shape {np.shape(values)} does not match grid {grid.shape}")


def embed(src, src_grid, dst_grid, background=0.0):
    """Place a field on a larger grid; ``background`` outside the source square."""
    _check(src, src_grid)
    k = src_grid.offset_in(dst_grid)
    out = np.full(dst_grid.shape, float(background))
    if k is not None:
        out[k:k + src_grid.n, k:k + src_grid.n] = src
        return out
    x1, x2 = dst_grid.mesh()
    inside = (np.abs(x1) <= src_grid.extent) & (np.abs(x2) <= src_grid.extent)
    out[inside] = bilinear_sample(src, src_grid, x1[inside], x2[inside])
    return out


def restrict(src, src_grid, dst_grid, mask_unit_disc=False):
    """Sample a field on a smaller grid, optionally zeroing ``|x| >= 1``."""
    _check(src, src_grid)
    k = dst_grid.offset_in(src_grid)
    if k is not None:
        out = src[k:k + dst_grid.n, k:k + dst_grid.n].copy()
    else:
        x1, x2 = dst_grid.mesh()
        out = bilinear_sample(src, src_grid, x1, x2)
    if mask_unit_disc:
        out *= disc_mask(dst_grid)
    return out


def rel_l2_error(x, ref):
    ref_norm = np.linalg.norm(ref)
    if ref_norm == 0:
        raise ValueError("reference field has zero norm")
    return float(np.linalg.norm(np.asarray(x) - ref) / ref_norm)


@dataclass(frozen=True, eq=False)
class Medium:
    """Sound speed ``c`` and damping ``a`` on the simulation grid."""

    grid: Grid
    c: np.ndarray
    a: np.ndarray
    c_min: float = field(default=0.0)

    def __post_init__(self):
        _check(self.c, self.grid)
        _check(self.a, self.grid)
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.a))):
            raise ConfigError("medium contains non-finite values")
        cmin = float(self.c.min())
        if cmin <= 0 or cmin < self.c_min:
            raise ConfigError(f"sound speed must be bounded away from zero (min {cmin})")
        if self.a.min() < 0:
            raise ConfigError("damping must be nonnegative")
        outside = self.grid.radius() >= 1.0
        if np.any(np.abs(self.c[outside] - 1.0) > 1e-12) or np.any(np.abs(self.a[outside]) > 1e-12):
            raise ConfigError("c - 1 and a must vanish outside the unit disc")

    @classmethod
    def homogeneous(cls, grid, c=1.0, a=0.0):
        """Constant medium; skips the support check (used by oracle tests)."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "grid", grid)
        object.__setattr__(obj, "c", np.full(grid.shape, float(c)))
        object.__setattr__(obj, "a", np.full(grid.shape, float(a)))
        object.__setattr__(obj, "c_min", float(c))
        if c <= 0 or a < 0:
            raise ConfigError("need c > 0 and a >= 0")
        return obj

    @classmethod
    def from_specs(cls, c_spec, a_spec, grid):
        return cls(grid, build_phantom(c_spec, grid), build_phantom(a_spec, grid))

    @property
    def c_max(self):
        return float(self.c.max())
