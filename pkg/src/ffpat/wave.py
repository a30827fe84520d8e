"""Pseudospectral time stepping for the damped wave equation.

Solves ``c^-2 u_tt + a u_t - Δu = 0`` on a periodic square with a k-space
corrected Laplacian and second-order centred differences in time::

    c^-2 (u+ - 2u + u-) / dt^2 + a (u+ - u-) / (2 dt) = L u

where ``L`` has Fourier symbol ``-(2 / (c0 dt))^2 sin^2(c0 |k| dt / 2)`` with
``c0 = max c``.  For ``c = c0`` this is exact in time for every Fourier
mode; for ``c <= c0`` it is stable whenever ``c0 |k|_max dt < pi``.

Equations run backward in time with the damping sign flipped become the
same damped equation in reversed time ``s = T - t``, so forward map,
L2 adjoint and time reversal all share one stepper.
"""
import functools
import logging
import warnings
from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np
import scipy.fft as sfft
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import ConfigError, DivergenceError, NumericalError
from .fields import Grid, Medium, disc_mask, embed, restrict
from .operators import LinearOperator, VectorSpace, make_rng

log = logging.getLogger(__name__)

__all__ = [
    "WaveConfig",
    "WaveSolution",
    "WaveModel",
    "harmonic_extend",
    "project_P",
    "energy_norm",
]

DIAM_OMEGA = 2.0


@dataclass(frozen=True, eq=False)
class WaveConfig:
    """Medium on the simulation grid, final time and step count.

    ``object_grid`` is the grid carrying sources and reconstructions; it
    must be nested in the simulation grid.
    """

    medium: Medium
    object_grid: Grid
    T: float = 3.0
    nt: int = 300
    source_support: float = 0.95

    def __post_init__(self):
        if self.nt < 1 or not self.T > 0:
            raise ConfigError("need T > 0 and nt >= 1")
        grid = self.medium.grid
        if not grid.periodic:
            raise ConfigError("the simulation grid must be periodic")
        if self.object_grid.offset_in(grid) is None:
            raise ConfigError("object grid is not nested in the simulation grid")
        kmax = np.sqrt(2.0) * np.pi / grid.h
        if not self.medium.c_max * self.dt * kmax < np.pi:
            raise ConfigError(
                f"time step too large: c_max*dt*k_max = {self.medium.c_max * self.dt * kmax:.3f} >= pi"
            )
        # farthest point a front from supp f can reach: leave the unit disc
        # at speed <= c_max, then travel at unit speed outside
        reach = 1.0 + self.T - (1.0 - self.source_support) / self.medium.c_max
        if reach >= grid.extent:
            raise ConfigError(
                f"waves reach |x| = {reach:.3f} >= {grid.extent}: periodic wrap-around"
            )
        if self.T <= DIAM_OMEGA:
            warnings.warn(f"T = {self.T} <= diam(Omega) = 2; wave inversion is not unique")

    @property
    def dt(self):
        return self.T / self.nt

    @property
    def sim_grid(self):
        return self.medium.grid


@dataclass
class WaveSolution:
    u: np.ndarray
    ut: Optional[np.ndarray] = None
    energy: Optional[np.ndarray] = None


class WaveModel:
    """All wave-side operators for one configuration.

    The instance caches spectral symbols and the Laplace factorizations;
    its methods are pure and may be called concurrently.
    """

    def __init__(self, cfg):
        self.cfg = cfg
        grid = cfg.sim_grid
        med = cfg.medium
        dt = cfg.dt
        k1 = 2 * np.pi * sfft.fftfreq(grid.n, d=grid.h)
        k2 = 2 * np.pi * sfft.rfftfreq(grid.n, d=grid.h)
        kabs = np.sqrt(k1[:, None] ** 2 + k2[None, :] ** 2)
        c0 = med.c_max
        # dt^2 * (k-space Laplacian symbol)
        self._lap_dt2 = -4.0 / c0**2 * np.sin(0.5 * c0 * kabs * dt) ** 2
        self._c2 = med.c**2
        self._b = 0.5 * self._c2 * med.a * dt
        denom = 1.0 + self._b
        self._coef = (2.0 / denom, (1.0 - self._b) / denom, self._c2 / denom)
        self._obj_offset = cfg.object_grid.offset_in(grid)
        self._chi_obj = disc_mask(cfg.object_grid)
        self._chi_ext_sim = 1.0 - disc_mask(grid)
        self.obj_weight = 1.0 / restrict(med.c, grid, cfg.object_grid) ** 2
        self.sim_weight = 1.0 / med.c**2

    # -- stepping ---------------------------------------------------------

    def _lap_dt2_apply(self, u):
        return sfft.irfft2(self._lap_dt2 * sfft.rfft2(u), s=u.shape)

    def solve_forward(self, f1, f2, velocity=False, energy=False, snapshot=None, snapshot_every=0):
        """Time step from ``(u, u_t) = (f1, f2)`` at t = 0 to t = T.

        Returns u(T) and, with ``velocity=True``, the centred difference
        estimate of u_t(T) (one extra step).  ``energy=True`` records the
        scheme's discrete energy at the half steps.
        """
        cfg = self.cfg
        grid = cfg.sim_grid
        if f1.shape != grid.shape or f2.shape != grid.shape:
            raise ValueError("initial data must live on the simulation grid")
        dt, nt = cfg.dt, cfg.nt
        c2, b = self._c2, self._b
        h2 = grid.h**2
        inv_c2 = self.sim_weight
        energies = [] if energy else None

        u_prev = np.asarray(f1, dtype=float)
        lap = self._lap_dt2_apply(u_prev)
        u = u_prev + dt * f2 + 0.5 * c2 * lap - dt * b * f2
        if energies is not None:
            energies.append(self._energy(u, u_prev, lap, inv_c2, dt, h2))
        if snapshot is not None and snapshot_every:
            snapshot(0, u_prev)
            if snapshot_every == 1:
                snapshot(1, u)
        last = nt + 1 if velocity else nt
        k_u, k_prev, k_lap = self._coef
        u_older = None
        for n in range(1, last):
            lap = self._lap_dt2_apply(u)
            u_next = np.empty_like(u)
            _leapfrog(u, u_prev, lap, k_u, k_prev, k_lap, u_next)
            if energies is not None and n < nt:
                energies.append(self._energy(u_next, u, lap, inv_c2, dt, h2))
            u_older, u_prev, u = u_prev, u, u_next
            if (n + 1) % 25 == 0 and not np.isfinite(u.sum()):
                raise DivergenceError(f"non-finite wave field at step {n + 1}", step=n + 1)
            if snapshot is not None and snapshot_every and (n + 1) % snapshot_every == 0 and n + 1 <= nt:
                snapshot(n + 1, u)
        if not np.isfinite(u.sum()):
            raise DivergenceError(f"non-finite wave field at step {last}", step=last)
        if velocity:
            # u = u^{nt+1}, u_prev = u^{nt}, u_older = u^{nt-1}
            return WaveSolution(u_prev, (u - u_older) / (2 * dt), _arr(energies))
        return WaveSolution(u, None, _arr(energies))

    # -- grid transfer --------------------------------------------------

    def to_sim(self, f):
        """Object-grid field times the disc indicator, zero-embedded."""
        return embed(self._chi_obj * f, self.cfg.object_grid, self.cfg.sim_grid)

    def to_obj(self, g, mask=True):
        return restrict(g, self.cfg.sim_grid, self.cfg.object_grid, mask_unit_disc=mask)

    def exterior(self, g):
        """Zero a simulation-grid field inside the unit disc."""
        return self._chi_ext_sim * g

    # -- operators --------------------------------------------------------

    def forward_W(self, f):
        """``f -> u(T)`` on the simulation grid for initial data ``(f, -c^2 a f)``."""
        f_sim = self.to_sim(f)
        return self.solve_forward(f_sim, -self._c2 * self.cfg.medium.a * f_sim).u

    def adjoint_W(self, g):
        """L2(c^-2) adjoint: backward solve from ``q(T) = g, q_t(T) = c^2 a g``."""
        # in reversed time s = T - t the data become (g, -c^2 a g) for the damped equation
        q0 = self.solve_forward(g, -self._c2 * self.cfg.medium.a * g).u
        return self.to_obj(q0)

    def time_reverse(self, h):
        """``h -> (v(0), v_t(0))`` for the time-reversed equation with ``v_t(T) = 0``."""
        sol = self.solve_forward(h, np.zeros_like(h), velocity=True)
        return sol.u, -sol.ut

    def forward_U(self, f1, f2):
        """Exterior final-time data ``u(T)|_{|x| >= 1}`` for an initial pair on the object grid."""
        return self.exterior(self.solve_forward(self.to_sim(f1), self.to_sim(f2)).u)

    def neumann_V(self, g):
        """``(P x Q) o time reversal o harmonic extension`` applied to exterior data."""
        sim, obj = self.cfg.sim_grid, self.cfg.object_grid
        ext = harmonic_extend(g, sim)
        v0, v1 = self.time_reverse(ext)
        v0 = self.to_obj(v0, mask=False)
        v1 = self.to_obj(v1, mask=False)
        phi = harmonic_extend(v0, obj)
        return project_P(v0, v1, phi, obj)

    def W_operator(self):
        dom = VectorSpace(self.cfg.object_grid.shape, weight=self.obj_weight, name="object c^-2")
        rng = VectorSpace(self.cfg.sim_grid.shape, weight=self.sim_weight, name="simulation c^-2")
        return LinearOperator(dom, rng, self.forward_W, self.adjoint_W, "W")

    def energy_norm(self, f1, f2):
        return energy_norm(f1, f2, self.cfg.object_grid, self.obj_weight)

    def contraction_estimate(self, lam=1.0, iters=20, seed=0, band=None):
        """Power iteration for ``I - lam V U`` in the energy norm.

        Returns the final ratio ``|K x| / |x|`` and the per-iteration history.
        With ``band`` set, every iterate is low-passed to ``|k| <= band * pi / h``
        first.  Near-grid-scale waves launched where ``c`` is large cannot enter
        slower regions on the grid and stay trapped, so on them ``K`` is close to
        the identity; the band-limited estimate excludes those modes.
        """
        rng = make_rng(seed)
        chi = self._chi_obj
        x1 = chi * rng.standard_normal(chi.shape)
        x2 = chi * rng.standard_normal(chi.shape)
        if band is not None:
            keep = self._band_mask(band)
            x1, x2 = self._low_pass(x1, keep), self._low_pass(x2, keep)
        nrm = self.energy_norm(x1, x2)
        x1, x2 = x1 / nrm, x2 / nrm
        history = []
        for _ in range(iters):
            v1, v2 = self.neumann_V(self.forward_U(x1, x2))
            k1, k2 = x1 - lam * v1, x2 - lam * v2
            ratio = self.energy_norm(k1, k2)
            history.append(ratio)
            if ratio == 0:
                break
            x1, x2 = k1 / ratio, k2 / ratio
            if band is not None:
                x1, x2 = self._low_pass(x1, keep), self._low_pass(x2, keep)
                nrm = self.energy_norm(x1, x2)
                x1, x2 = x1 / nrm, x2 / nrm
        return history[-1], history

    def _band_mask(self, band):
        grid = self.cfg.object_grid
        k = 2 * sfft.fftfreq(grid.n)
        return np.hypot(k[:, None], k[None, :]) <= band

    def _low_pass(self, x, keep):
        return self._chi_obj * np.real(sfft.ifft2(keep * sfft.fft2(x)))

    @staticmethod
    def _energy(u_next, u, lap_dt2, inv_c2, dt, h2):
        du = (u_next - u) / dt
        return h2 * (np.vdot(inv_c2 * du, du) - np.vdot(u_next, lap_dt2) / dt**2)


@numba.njit(cache=True)
def _leapfrog(u, u_prev, lap, k_u, k_prev, k_lap, out):
    # out = (2 u - (1 - b) u_prev + c^2 lap) / (1 + b), coefficients pre-divided
    n0, n1 = u.shape
    for i in range(n0):
        for j in range(n1):
            out[i, j] = k_u[i, j] * u[i, j] - k_prev[i, j] * u_prev[i, j] + k_lap[i, j] * lap[i, j]


def _arr(x):
    return None if x is None else np.array(x)


def energy_norm(f1, f2, grid, weight=1.0):
    """``sqrt(|grad f1|^2 + |f2|^2_{c^-2})`` with forward differences."""
    d1 = _fwd_diff(f1, 0)
    d2 = _fwd_diff(f1, 1)
    e = (np.sum(d1**2) + np.sum(d2**2)) + grid.h**2 * np.sum(weight * f2**2)
    return float(np.sqrt(e))


def _fwd_diff(f, axis):
    d = np.zeros_like(f)
    if axis == 0:
        d[:-1] = f[1:] - f[:-1]
    else:
        d[:, :-1] = f[:, 1:] - f[:, :-1]
    return d


@functools.lru_cache(maxsize=8)
def _laplace_system(grid, radius):
    """Five-point Dirichlet Laplacian on the nodes strictly inside the disc."""
    inside = grid.radius() < radius
    idx = -np.ones(grid.shape, dtype=np.int64)
    ii, jj = np.nonzero(inside)
    idx[ii, jj] = np.arange(ii.size)
    rows, cols, vals = [np.arange(ii.size)], [np.arange(ii.size)], [np.full(ii.size, 4.0)]
    bnd = []
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        ni, nj = ii + di, jj + dj
        if ni.min() < 0 or nj.min() < 0 or ni.max() >= grid.n or nj.max() >= grid.n:
            raise ConfigError("disc touches the grid boundary")
        nb = idx[ni, nj]
        interior = nb >= 0
        rows.append(np.nonzero(interior)[0])
        cols.append(nb[interior])
        vals.append(-np.ones(interior.sum()))
        ext = ~interior
        bnd.append((np.nonzero(ext)[0], ni[ext], nj[ext]))
    mat = sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(ii.size, ii.size),
    )
    return mat, splu(mat), (ii, jj), bnd


def harmonic_extend(g, grid, radius=1.0):
    """Replace ``g`` inside the disc by its discrete harmonic extension.

    The Dirichlet data are the values of ``g`` on the grid nodes outside the
    disc that neighbour an interior node; the five-point Laplace equation is
    solved on the interior nodes.  Values outside the disc are returned
    unchanged.
    """
    mat, lu, (ii, jj), bnd = _laplace_system(grid, radius)
    rhs = np.zeros(ii.size)
    for k, bi, bj in bnd:
        np.add.at(rhs, k, g[bi, bj])
    phi = lu.solve(rhs)
    res = np.linalg.norm(mat @ phi - rhs)
    if res > 1e-10 * max(np.linalg.norm(rhs), 1.0):
        raise NumericalError(f"Laplace solve residual {res:.2e} exceeds tolerance")
    out = np.array(g, dtype=float, copy=True)
    out[ii, jj] = phi
    return out


def project_P(g, h, phi, grid):
    """``(chi (g - phi), chi h)``: removes the harmonic part of ``g`` in the disc."""
    chi = disc_mask(grid)
    return chi * (g - phi), chi * h
