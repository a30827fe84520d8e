"""User-runnable property checks: adjoints, closed-form oracles, contraction."""
import warnings
from dataclasses import dataclass

import numpy as np

from .fields import Bump, Grid, Medium, PhantomSpec, build_phantom, default_phantoms, embed, restrict
from .operators import LinearOperator, VectorSpace, dot_test
from .radon import (MaskSpec, RadonTransform, SinogramGeom, lambda_operator, mask_operator)
from .recon import StopRule, gradient_operator, neumann_series_recon
from .wave import WaveConfig, WaveModel

__all__ = [
    "Check",
    "SUITES",
    "adjoint_checks",
    "oracle_checks",
    "contraction_checks",
    "run_suite",
    "wave_mode_error",
    "energy_trace",
    "disc_chord_error",
    "fbp_roundtrip_error",
]

SUITES = ("adjoints", "oracles", "contraction", "all")


@dataclass
class Check:
    name: str
    value: float
    tol: float
    detail: str = ""

    @property
    def passed(self):
        return bool(np.isfinite(self.value) and self.value <= self.tol)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.detail})" if self.detail else ""
        return f"{status}  {self.name}: {self.value:.3e} (limit {self.tol:.1e}){extra}"


# -- adjoints ----------------------------------------------------------------------

def _embed_operator(obj, sim):
    return LinearOperator(VectorSpace(obj.shape), VectorSpace(sim.shape),
                          lambda f: embed(f, obj, sim), lambda g: restrict(g, sim, obj), "embed")


def adjoint_checks(cfg, trials=10, include_expensive=True):
    """Dot tests for every building block and for the composed operator."""
    from .pipeline import build_operator

    sim, obj = cfg.sim_grid, cfg.object_grid
    geom = SinogramGeom.for_grid(sim, cfg.n_theta)
    radon = RadonTransform(sim, geom)
    spec = cfg.mask_spec()
    out = []
    blocks = [
        ("X / backprojection", radon.operator()),
        ("Λ filter", lambda_operator(geom, cfg.pad_filter)),
        ("mask M", mask_operator(geom, spec)),
        ("D / -div", gradient_operator(VectorSpace(obj.shape))),
        ("embed / restrict", _embed_operator(obj, sim)),
    ]
    for name, op in blocks:
        out.append(Check(f"dot test {name}", dot_test(op, trials).max_discrepancy, 1e-10))
    if include_expensive:
        f_spec, c_spec, a_spec = default_phantoms()
        medium = Medium.from_specs(c_spec, a_spec, sim)
        model = WaveModel(WaveConfig(medium, obj, cfg.T, cfg.nt))
        W = model.W_operator()
        out.append(Check("dot test W (c^-2 weights)", dot_test(W, trials).max_discrepancy, 2e-2))
        A = build_operator(model, radon, spec, cfg.pad_filter)
        out.append(Check("dot test A = M X W (Λ data norm)", dot_test(A, trials).max_discrepancy, 2e-2))
    return out


# -- closed-form oracles -------------------------------------------------------------

def _mode_model(c, a, n, extent, T, nt):
    sim = Grid(n, extent, periodic=True)
    h = sim.h
    half = int(round(1.0 / h))
    obj = Grid(2 * half + 1, half * h)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return WaveModel(WaveConfig(Medium.homogeneous(sim, c, a), obj, T, nt))


def wave_mode_error(damping=0.0, c=1.0, nt=200, T=1.0, n=128, extent=4.0, mode=(3, 2)):
    """Relative error of u(T) for ``u(0) = cos(k.x), u_t(0) = 0`` on a periodic grid.

    The exact solution is ``m(t) cos(k.x)`` with ``m'' + c^2 a m' + c^2 |k|^2 m = 0``.
    """
    model = _mode_model(c, damping, n, extent, T, nt)
    x1, x2 = model.cfg.sim_grid.mesh()
    k = np.pi * np.asarray(mode, dtype=float) / extent
    u0 = np.cos(k[0] * x1 + k[1] * x2)
    u = model.solve_forward(u0, np.zeros_like(u0)).u
    gamma = 0.5 * c**2 * damping
    w0 = c * np.hypot(*k)
    wd = np.sqrt(w0**2 - gamma**2)
    m = np.exp(-gamma * T) * (np.cos(wd * T) + gamma / wd * np.sin(wd * T))
    exact = m * u0
    return float(np.linalg.norm(u - exact) / np.linalg.norm(exact))


def energy_trace(cfg, damped=True):
    """Discrete energy at every half step for the default source and medium."""
    sim, obj = cfg.sim_grid, cfg.object_grid
    f_spec, c_spec, a_spec = default_phantoms()
    c = build_phantom(c_spec, sim)
    a = build_phantom(a_spec, sim) if damped else np.zeros(sim.shape)
    model = WaveModel(WaveConfig(Medium(sim, c, a), obj, cfg.T, cfg.nt))
    f = model.to_sim(build_phantom(f_spec, obj))
    return model.solve_forward(f, -c**2 * a * f, energy=True).energy


def disc_chord_error(R, center=(0.0, 0.0), grid=None, n_theta=180, tangent_band=0.0):
    """Max abs deviation of the sampled disc sinogram from ``2 sqrt(R^2 - s'^2)``.

    ``s' = s - center . (cos θ, sin θ)``.  Samples with ``||s'| - R| <
    tangent_band`` are skipped when ``tangent_band > 0`` (diagnostic only).
    """
    grid = grid or Grid(400, 4.0, periodic=True)
    x1, x2 = grid.mesh()
    img = (np.hypot(x1 - center[0], x2 - center[1]) <= R).astype(float)
    geom = SinogramGeom.for_grid(grid, n_theta)
    sino = RadonTransform(grid, geom).forward(img)
    th = geom.angles
    sp = geom.s[None, :] - (center[0] * np.cos(th) + center[1] * np.sin(th))[:, None]
    exact = 2.0 * np.sqrt(np.clip(R**2 - sp**2, 0.0, None))
    err = np.abs(sino - exact)
    if tangent_band > 0:
        err = err[np.abs(np.abs(sp) - R) >= tangent_band]
    return float(err.max())


def fbp_roundtrip_error(n=401, extent=4.0, n_theta=500, pad=True):
    grid = Grid(n, extent)
    bump = build_phantom(PhantomSpec((Bump((0.1, -0.2), 0.6, 1.0),), "source"), grid)
    radon = RadonTransform(grid, SinogramGeom.for_grid(grid, n_theta))
    rec = radon.fbp(radon.forward(bump), pad=pad)
    return float(np.linalg.norm(rec - bump) / np.linalg.norm(bump))


def oracle_checks(cfg):
    out = [
        Check("wave single mode, undamped", wave_mode_error(0.0), 1e-3, "nt=200, T=1"),
        Check("wave single mode, damped a=0.5", wave_mode_error(0.5), 1e-2, "nt=200, T=1"),
    ]
    e = energy_trace(cfg, damped=True)
    out.append(Check("energy increase per step (a >= 0)", float(np.max(np.diff(e)) / e[0]), 1e-3,
                     f"E_end/E_0 = {e[-1] / e[0]:.4f}"))
    e0 = energy_trace(cfg, damped=False)
    out.append(Check("energy drift (a = 0)", float(np.max(np.abs(e0 - e0[0])) / e0[0]), 1e-3))
    h = cfg.sim_grid.h
    for R in (0.3, 0.5):
        for center in ((0.0, 0.0), (0.3, 0.0)):
            err = disc_chord_error(R, center, cfg.sim_grid)
            inner = disc_chord_error(R, center, cfg.sim_grid, tangent_band=2 * h)
            out.append(Check(f"disc chord R={R} center={center} (/h)", err / h, 2.0,
                             f"{inner / h:.2f} h away from tangent rays"))
    out.append(Check("FBP round trip, smooth bump", fbp_roundtrip_error(), 0.05,
                     "n=401, 500 angles"))
    return out


def contraction_checks(cfg, lams=(1.0,), iters=20, tol=1.0, neumann=False):
    """Power-iteration estimates of |I - lam V U| in the energy norm."""
    f_spec, c_spec, a_spec = default_phantoms()
    medium = Medium.from_specs(c_spec, a_spec, cfg.sim_grid)
    model = WaveModel(WaveConfig(medium, cfg.object_grid, cfg.T, cfg.nt))
    out = []
    for lam in lams:
        est, _ = model.contraction_estimate(lam, iters, seed=cfg.seed)
        low, _ = model.contraction_estimate(lam, iters, seed=cfg.seed, band=0.75)
        out.append(Check(f"contraction |I - {lam} V U|", est, tol,
                         f"{iters} power iterations; {low:.3f} for |k| <= 0.75 Nyquist"))
    if neumann:
        f = build_phantom(f_spec, cfg.object_grid)
        g = model.exterior(model.forward_W(f))
        run = neumann_series_recon(model, g, 1.0, StopRule(15), truth=f)
        out.append(Check("Neumann series, noiseless, 15 iterations", run.rel_errors[-1], 0.05,
                         f"best {run.best_error:.4f} at {run.best_index}"))
    return out


def run_suite(name, cfg):
    if name not in SUITES:
        raise ValueError(f"unknown verify suite {name!r}; choose from {', '.join(SUITES)}")
    checks = []
    if name in ("adjoints", "all"):
        checks += adjoint_checks(cfg)
    if name in ("oracles", "all"):
        checks += oracle_checks(cfg)
    if name in ("contraction", "all"):
        checks += contraction_checks(cfg)
    return checks
