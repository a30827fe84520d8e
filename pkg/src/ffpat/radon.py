"""Parallel-beam Radon transform, its transpose, the Λ filter and data masks.

Angle convention: ``theta`` is measured from the x1 axis, the detector
coordinate ``s`` runs along ``(cos θ, sin θ)`` and lines are integrated
along ``(-sin θ, cos θ)``.  Lines are sampled at the grid spacing with
bilinear interpolation; :func:`backproject` is the exact transpose of that
stencil.
"""
import math
from dataclasses import dataclass, field, replace

import numba
import numpy as np
import scipy.fft as sfft

from .errors import ShapeError
from .operators import LinearOperator, VectorSpace

__all__ = [
    "CONVENTION",
    "SinogramGeom",
    "Sinogram",
    "MaskSpec",
    "RadonTransform",
    "radon_forward",
    "backproject",
    "lambda_filter",
    "fbp",
    "apply_mask",
    "mask_array",
]

CONVENTION = "theta from x1 axis; s along (cos,sin); lines along (-sin,cos)"


@dataclass(frozen=True)
class SinogramGeom:
    n_theta: int
    n_s: int
    s_spacing: float
    theta_range: tuple = (0.0, 180.0)

    def __post_init__(self):
        if self.n_theta < 1 or self.n_s < 1 or self.n_s % 2 == 0:
            raise ValueError("need n_theta >= 1 and an odd number of detector samples")
        if not self.s_spacing > 0:
            raise ValueError("detector spacing must be positive")

    @classmethod
    def for_grid(cls, grid, n_theta):
        """Detector pitch = grid spacing, covering ``[-L sqrt 2, L sqrt 2]``."""
        half = int(math.ceil(grid.extent * math.sqrt(2.0) / grid.h - 1e-9))
        return cls(int(n_theta), 2 * half + 1, grid.h)

    @property
    def shape(self):
        return (self.n_theta, self.n_s)

    @property
    def angles_deg(self):
        lo, hi = self.theta_range
        return lo + (hi - lo) * np.arange(self.n_theta) / self.n_theta

    @property
    def angles(self):
        return np.deg2rad(self.angles_deg)

    @property
    def s(self):
        return self.s_spacing * (np.arange(self.n_s) - (self.n_s - 1) // 2)


@dataclass(frozen=True)
class MaskSpec:
    exterior_radius: float = 1.0
    angular_range: tuple = (0.0, 180.0)

    def __post_init__(self):
        lo, hi = self.angular_range
        if not lo < hi:
            raise ValueError("angular range needs theta_min < theta_max")
        if self.exterior_radius < 0:
            raise ValueError("exterior radius must be nonnegative")


@dataclass
class Sinogram:
    geom: SinogramGeom
    values: np.ndarray
    mask: np.ndarray = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.geom.shape:
            raise ShapeError(f"sinogram values {self.values.shape} != geometry {self.geom.shape}")
        if self.mask is None:
            self.mask = np.ones(self.geom.shape, dtype=bool)


@numba.njit(cache=True)
def _t_range(s, c, sn, lo, hi, h):
    # parameter interval where (s c - t sn, s sn + t c) stays in [lo, hi]^2
    tmin, tmax = -1e300, 1e300
    x0, y0 = s * c, s * sn
    if abs(sn) > 1e-14:
        a, b = (x0 - hi) / sn, (x0 - lo) / sn
        tmin, tmax = max(tmin, min(a, b)), min(tmax, max(a, b))
    elif x0 < lo or x0 > hi:
        return 1, 0
    if abs(c) > 1e-14:
        a, b = (lo - y0) / c, (hi - y0) / c
        tmin, tmax = max(tmin, min(a, b)), min(tmax, max(a, b))
    elif y0 < lo or y0 > hi:
        return 1, 0
    return int(math.ceil(tmin / h)), int(math.floor(tmax / h))


@numba.njit(cache=True)
def _radon_kernel(img, x0, h, angles, svals, step, out):
    n = img.shape[0]
    lo, hi = x0 - h, x0 + n * h
    for i in range(angles.shape[0]):
        c, sn = math.cos(angles[i]), math.sin(angles[i])
        for j in range(svals.shape[0]):
            k0, k1 = _t_range(svals[j], c, sn, lo, hi, step)
            acc = 0.0
            for k in range(k0, k1 + 1):
                t = k * step
                fi = (svals[j] * c - t * sn - x0) / h
                fj = (svals[j] * sn + t * c - x0) / h
                i0 = int(math.floor(fi))
                j0 = int(math.floor(fj))
                wi = fi - i0
                wj = fj - j0
                for di in range(2):
                    ii = i0 + di
                    if ii < 0 or ii >= n:
                        continue
                    wa = wi if di == 1 else 1.0 - wi
                    for dj in range(2):
                        jj = j0 + dj
                        if jj < 0 or jj >= n:
                            continue
                        wb = wj if dj == 1 else 1.0 - wj
                        acc += wa * wb * img[ii, jj]
            out[i, j] = acc * step


@numba.njit(cache=True)
def _backproject_kernel(sino, x0, h, angles, svals, step, out):
    n = out.shape[0]
    lo, hi = x0 - h, x0 + n * h
    for i in range(angles.shape[0]):
        c, sn = math.cos(angles[i]), math.sin(angles[i])
        for j in range(svals.shape[0]):
            val = sino[i, j] * step
            if val == 0.0:
                continue
            k0, k1 = _t_range(svals[j], c, sn, lo, hi, step)
            for k in range(k0, k1 + 1):
                t = k * step
                fi = (svals[j] * c - t * sn - x0) / h
                fj = (svals[j] * sn + t * c - x0) / h
                i0 = int(math.floor(fi))
                j0 = int(math.floor(fj))
                wi = fi - i0
                wj = fj - j0
                for di in range(2):
                    ii = i0 + di
                    if ii < 0 or ii >= n:
                        continue
                    wa = wi if di == 1 else 1.0 - wi
                    for dj in range(2):
                        jj = j0 + dj
                        if jj < 0 or jj >= n:
                            continue
                        wb = wj if dj == 1 else 1.0 - wj
                        out[ii, jj] += wa * wb * val


def mask_array(geom, spec):
    deg = geom.angles_deg
    lo, hi = spec.angular_range
    ang_ok = (deg >= lo - 1e-9) & (deg <= hi + 1e-9)
    s_ok = np.abs(geom.s) >= spec.exterior_radius - 1e-12
    return ang_ok[:, None] & s_ok[None, :]


class RadonTransform:
    """Ray-driven Radon transform of fields on ``grid``."""

    def __init__(self, grid, geom):
        self.grid = grid
        self.geom = geom
        self._angles = np.ascontiguousarray(geom.angles)
        self._s = np.ascontiguousarray(geom.s)
        self._x0 = float(grid.coords[0])

    def forward(self, img):
        if np.shape(img) != self.grid.shape:
            raise ShapeError(f"image shape {np.shape(img)} != grid {self.grid.shape}")
        out = np.zeros(self.geom.shape)
        _radon_kernel(np.ascontiguousarray(img, dtype=float), self._x0, self.grid.h,
                      self._angles, self._s, self.grid.h, out)
        return out

    def backproject(self, sino):
        if np.shape(sino) != self.geom.shape:
            raise ShapeError(f"sinogram shape {np.shape(sino)} != geometry {self.geom.shape}")
        out = np.zeros(self.grid.shape)
        _backproject_kernel(np.ascontiguousarray(sino, dtype=float), self._x0, self.grid.h,
                            self._angles, self._s, self.grid.h, out)
        return out

    def fbp_scale(self):
        # half-circle angular quadrature 2*pi/n_theta; the transposed stencil carries one factor h
        return 2.0 * np.pi / (self.geom.n_theta * self.grid.h)

    def fbp(self, sino, pad=True):
        return self.fbp_scale() * self.backproject(lambda_filter_values(sino, self.geom, pad))

    def operator(self, domain=None):
        """``X`` as a LinearOperator; the domain may carry a pointwise weight."""
        dom = domain or VectorSpace(self.grid.shape)
        rng = VectorSpace(self.geom.shape, name="sinogram")
        if dom.weight is None:
            adj = self.backproject
        else:
            w = dom.weight
            adj = lambda y: self.backproject(y) / w
        return LinearOperator(dom, rng, self.forward, adj, "X")


def _lambda_multiplier(n, spacing):
    omega = 2.0 * np.pi * sfft.rfftfreq(n, d=spacing)
    return np.abs(omega) / (4.0 * np.pi)


def lambda_filter_values(values, geom, pad=False):
    """Apply ``|ω| / (4π)`` along the detector axis of a sinogram array."""
    n = values.shape[-1]
    m = sfft.next_fast_len(2 * n, real=True) if pad else n
    mult = _lambda_multiplier(m, geom.s_spacing)
    out = sfft.irfft(mult * sfft.rfft(values, n=m, axis=-1), n=m, axis=-1)
    return out[..., :n]


def lambda_operator(geom, pad=True):
    sp = VectorSpace(geom.shape, name="sinogram")
    f = lambda y: lambda_filter_values(y, geom, pad)
    return LinearOperator(sp, sp, f, f, "Λ")


def mask_operator(geom, spec):
    m = mask_array(geom, spec).astype(float)
    sp = VectorSpace(geom.shape, name="sinogram")
    return LinearOperator(sp, sp, lambda y: m * y, lambda y: m * y, "M")


# -- Sinogram-level convenience API ------------------------------------------

def radon_forward(img, grid, geom):
    return Sinogram(geom, RadonTransform(grid, geom).forward(img))


def backproject(sin, grid):
    return RadonTransform(grid, sin.geom).backproject(sin.values)


def lambda_filter(sin, pad=False):
    return Sinogram(sin.geom, lambda_filter_values(sin.values, sin.geom, pad), sin.mask.copy())


def fbp(sin, grid, pad=True):
    return RadonTransform(grid, sin.geom).fbp(sin.values, pad)


def apply_mask(sin, spec):
    m = mask_array(sin.geom, spec) & sin.mask
    return Sinogram(sin.geom, np.where(m, sin.values, 0.0), m)
