"""Iterative and variational reconstruction over an abstract linear operator.

All solvers take a :class:`~ffpat.operators.LinearOperator` ``A`` and data
``y`` in ``A.range``.  Norms and adjoints are those of the operator's
declared spaces, so a filtered data norm or a weighted image norm is
picked up automatically.
"""
import logging
import time
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator as ScipyOperator, cg

from .errors import DivergenceError, NumericalError
from .fields import rel_l2_error
from .operators import LinearOperator, VectorSpace, power_iter_norm, stack

log = logging.getLogger(__name__)

__all__ = [
    "StopRule",
    "ReconRun",
    "gradient",
    "divergence",
    "gradient_operator",
    "prox_quadratic",
    "cgne",
    "landweber",
    "steepest_descent",
    "fbs_quadratic",
    "chambolle_pock_tv",
    "neumann_series_recon",
]


@dataclass(frozen=True)
class StopRule:
    """When to stop: iteration cap, discrepancy principle, stagnation.

    ``discrepancy_tau`` requires ``noise_norm``: the run stops once
    ``|A x - y| <= tau * noise_norm``.
    """

    max_iters: int = 100
    discrepancy_tau: Optional[float] = None
    noise_norm: Optional[float] = None
    stagnation_eps: Optional[float] = None

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.discrepancy_tau is not None:
            if not self.discrepancy_tau > 1:
                raise ValueError("discrepancy tau must exceed 1")
            if self.noise_norm is None:
                raise ValueError("discrepancy stopping needs a noise norm")

    def done(self, residuals):
        if not residuals:
            return False
        if self.discrepancy_tau is not None and residuals[-1] <= self.discrepancy_tau * self.noise_norm:
            return True
        if self.stagnation_eps is not None and len(residuals) > 1:
            prev = residuals[-2]
            if abs(prev - residuals[-1]) <= self.stagnation_eps * prev:
                return True
        return False


@dataclass
class ReconRun:
    """Trajectory of one solver run; entry ``k`` belongs to iterate ``k + 1``."""

    solver: str
    x: Optional[np.ndarray] = None
    residual_norms: list = field(default_factory=list)
    rel_errors: list = field(default_factory=list)
    wall_times: list = field(default_factory=list)
    iterates: dict = field(default_factory=dict)
    best_x: Optional[np.ndarray] = None
    stop_reason: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def iterations(self):
        return len(self.residual_norms)

    @property
    def best_index(self):
        """1-based iteration with the smallest error (None without ground truth)."""
        if not self.rel_errors:
            return None
        return int(np.argmin(self.rel_errors)) + 1

    @property
    def best_error(self):
        return min(self.rel_errors) if self.rel_errors else None


class _Recorder:
    """Shared bookkeeping: timing, errors, snapshots, best iterate."""

    def __init__(self, name, truth, stop, snapshot_every, error_of=None):
        self.run = ReconRun(name)
        self.truth = truth
        self.stop = stop
        self.every = snapshot_every
        self.error_of = error_of or (lambda x: x)
        self.t0 = time.perf_counter()

    def record(self, x, residual):
        run = self.run
        k = run.iterations + 1
        if not np.isfinite(residual):
            raise DivergenceError(f"{run.solver}: non-finite residual at iteration {k}", step=k)
        run.residual_norms.append(float(residual))
        run.wall_times.append(time.perf_counter() - self.t0)
        if self.truth is not None:
            err = rel_l2_error(self.error_of(x), self.truth)
            if not run.rel_errors or err < min(run.rel_errors):
                run.best_x = np.copy(self.error_of(x))
            run.rel_errors.append(err)
        if self.every and k % self.every == 0:
            run.iterates[k] = np.copy(self.error_of(x))

    def finished(self):
        if self.run.iterations >= self.stop.max_iters:
            self.run.stop_reason = "max_iters"
            return True
        if self.stop.done(self.run.residual_norms):
            self.run.stop_reason = "stop_rule"
            return True
        return False

    def close(self, x):
        self.run.x = np.copy(self.error_of(x))
        if self.run.best_x is None:
            self.run.best_x = self.run.x
        return self.run


# -- discrete gradient ---------------------------------------------------------

def gradient(img):
    """Forward differences along both axes, zero in the last row/column."""
    g = np.zeros((2,) + img.shape)
    g[0, :-1, :] = img[1:, :] - img[:-1, :]
    g[1, :, :-1] = img[:, 1:] - img[:, :-1]
    return g


def divergence(g):
    """Negative transpose of :func:`gradient`."""
    d = np.zeros(g.shape[1:])
    d[:-1, :] += g[0, :-1, :]
    d[1:, :] -= g[0, :-1, :]
    d[:, :-1] += g[1, :, :-1]
    d[:, 1:] -= g[1, :, :-1]
    return d


def gradient_operator(space):
    """``D`` from ``space`` (possibly weighted) to uniform gradient fields."""
    rng = VectorSpace((2,) + space.shape, name="gradient")
    if space.weight is None:
        adj = lambda q: -divergence(q)
    else:
        w = space.weight
        adj = lambda q: -divergence(q) / w
    return LinearOperator(space, rng, gradient, adj, "D")


def prox_quadratic(v, t, space=None, tol=1e-10):
    """``argmin_z |z - v|^2 / 2 + t |D z|^2 / 2`` in the norm of ``space``.

    Solves ``(W + t D^T D) z = W v`` by conjugate gradients, ``W`` the
    pointwise weight of ``space``.
    """
    if t == 0:
        return np.array(v, copy=True)
    shape = v.shape
    w = np.ones(shape) if space is None or space.weight is None else space.weight

    def matvec(z):
        z = z.reshape(shape)
        return (w * z - t * divergence(gradient(z))).ravel()

    n = v.size
    op = ScipyOperator((n, n), matvec=matvec, dtype=float)
    rhs = (w * v).ravel()
    z, info = cg(op, rhs, x0=v.ravel().copy(), rtol=tol, atol=0.0, maxiter=10 * max(shape))
    if info != 0:
        raise NumericalError(f"proximal CG did not converge (info={info})")
    return z.reshape(shape)


# -- iterative regularization -----------------------------------------------------

def _zeros_like_domain(A, x0):
    return A.domain.zeros() if x0 is None else np.array(x0, dtype=float, copy=True)


def cgne(A, y, x0=None, stop=StopRule(), truth=None, snapshot_every=0):
    """Conjugate gradients on the normal equations ``A* A x = A* y``."""
    rec = _Recorder("cgne", truth, stop, snapshot_every)
    x = _zeros_like_domain(A, x0)
    p = y - A(x) if x0 is not None else np.array(y, dtype=float, copy=True)
    s = A.adjoint(p)
    d = s
    gnorm2 = A.domain.inner(s, s)
    while True:
        if gnorm2 == 0.0:
            rec.run.stop_reason = "zero gradient"
            break
        ad = A(d)
        adnorm2 = A.range.inner(ad, ad)
        if adnorm2 <= 0.0:
            raise NumericalError("CGNE breakdown: |A d| = 0 with nonzero gradient")
        alpha = gnorm2 / adnorm2
        x = x + alpha * d
        p = p - alpha * ad
        rec.record(x, A.range.norm(p))
        if rec.finished():
            break
        s = A.adjoint(p)
        new = A.domain.inner(s, s)
        beta = new / gnorm2
        d = s + beta * d
        gnorm2 = new
    return rec.close(x)


def _check_step(A, step, limit, op_norm, what):
    if op_norm is None:
        op_norm = power_iter_norm(A, iters=20)
    bound = limit / op_norm**2 if op_norm > 0 else np.inf
    if step >= bound:
        warnings.warn(f"{what} {step:.4g} exceeds the stable bound {bound:.4g}", RuntimeWarning)
    return op_norm


def _gradient_iteration(name, A, y, stepper, x0, stop, truth, snapshot_every):
    rec = _Recorder(name, truth, stop, snapshot_every)
    x = _zeros_like_domain(A, x0)
    r = y - A(x) if x0 is not None else np.array(y, dtype=float, copy=True)
    r0 = A.range.norm(r)
    while True:
        z = A.adjoint(r)
        az = A(z)
        gamma = stepper(z, az)
        if gamma == 0.0:
            rec.run.stop_reason = "zero gradient"
            break
        x = x + gamma * z
        r = r - gamma * az
        res = A.range.norm(r)
        rec.record(x, res)
        if res > 2.0 * r0 + 1e-300:
            raise DivergenceError(f"{name}: residual grew from {r0:.3e} to {res:.3e}",
                                  step=rec.run.iterations)
        if rec.finished():
            break
    return rec.close(x)


def landweber(A, y, gamma, x0=None, stop=StopRule(), truth=None, snapshot_every=0,
              op_norm=None, validate=True):
    """Fixed step gradient descent on ``|A x - y|^2 / 2``."""
    if validate:
        _check_step(A, gamma, 2.0, op_norm, "Landweber step")
    return _gradient_iteration("landweber", A, y, lambda z, az: gamma, x0, stop, truth,
                               snapshot_every)


def steepest_descent(A, y, x0=None, stop=StopRule(), truth=None, snapshot_every=0):
    """Gradient descent with the exact line-search step ``|A* r|^2 / |A A* r|^2``."""

    def step(z, az):
        den = A.range.inner(az, az)
        num = A.domain.inner(z, z)
        return 0.0 if num == 0.0 else num / den

    return _gradient_iteration("steepest_descent", A, y, step, x0, stop, truth, snapshot_every)


# -- variational regularization ---------------------------------------------------

def fbs_quadratic(A, y, lam, s, x0=None, stop=StopRule(), truth=None, snapshot_every=0,
                  op_norm=None, validate=True, inner_tol=1e-10):
    """Forward-backward splitting for ``|A x - y|^2 / 2 + lam |D x|^2 / 2``."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if validate:
        _check_step(A, s, 1.0 + 1e-12, op_norm, "FBS step")
    rec = _Recorder("fbs", truth, stop, snapshot_every)
    x = _zeros_like_domain(A, x0)
    r = y - A(x) if x0 is not None else np.array(y, dtype=float, copy=True)
    while True:
        v = x + s * A.adjoint(r)
        x = prox_quadratic(v, s * lam, A.domain, inner_tol)
        r = y - A(x)
        rec.record(x, A.range.norm(r))
        if rec.finished():
            break
    return rec.close(x)


def _project_dual(q, lam):
    mag = np.sqrt(q[0] ** 2 + q[1] ** 2)
    return lam * q / np.maximum(lam, mag)


def chambolle_pock_tv(A, y, lam, x0=None, stop=StopRule(), truth=None, snapshot_every=0,
                      op_norm=None, norm_iters=50, seed=0, track_dual=False):
    """Primal-dual iteration for ``|A x - y|^2 / 2 + lam |D x|_1`` (isotropic TV).

    ``op_norm`` is ``|(A, D)|``; estimated by power iteration when omitted.
    Steps are ``tau = sigma = 1 / op_norm`` with over-relaxation ``theta = 1``.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    D = gradient_operator(A.domain)
    if op_norm is None:
        op_norm = power_iter_norm(stack(A, D), iters=norm_iters, seed=seed)
    tau = sigma = 1.0 / op_norm
    rec = _Recorder("cp_tv", truth, stop, snapshot_every)
    x = _zeros_like_domain(A, x0)
    u = x.copy()
    p = A.range.zeros()
    q = D.range.zeros()
    ax = A(x) if x0 is not None else A.range.zeros()
    dual_max = []
    k = 0
    while True:
        au = A(u)
        if k > 0:
            # A u_k = 2 A x_k - A x_{k-1}
            ax = 0.5 * (au + ax)
            rec.record(x, A.range.norm(ax - y))
            if rec.finished():
                break
        p = (p + sigma * (au - y)) / (1.0 + sigma)
        q = _project_dual(q + sigma * D(u), lam)
        if track_dual:
            dual_max.append(float(np.sqrt(q[0] ** 2 + q[1] ** 2).max()))
        x_new = x - tau * (A.adjoint(p) + D.adjoint(q))
        u = 2.0 * x_new - x
        x = x_new
        k += 1
        if not np.isfinite(x.sum()):
            raise DivergenceError(f"cp_tv: non-finite iterate at iteration {k}", step=k)
    run = rec.close(x)
    run.extra["op_norm"] = op_norm
    if track_dual:
        run.extra["dual_max"] = dual_max
    return run


# -- wave-only inversion ------------------------------------------------------------

def neumann_series_recon(model, g, lam=1.0, stop=StopRule(max_iters=15), truth=None,
                         snapshot_every=0):
    """Iterative time reversal ``x <- x + lam V (g - U x)`` on initial pairs.

    ``g`` is final-time pressure outside the unit disc on the simulation
    grid.  ``truth`` may be the first component ``f1`` or a pair; errors are
    measured on ``f1``.  The final pair is stored in ``run.extra["pair"]``.
    """
    if not 0 < lam < 2:
        raise ValueError("lambda must lie in (0, 2)")
    if isinstance(truth, tuple):
        truth = truth[0]
    g = model.exterior(g)
    rec = _Recorder("neumann", truth, stop, snapshot_every, error_of=lambda pair: pair[0])
    shape = model.cfg.object_grid.shape
    x = (np.zeros(shape), np.zeros(shape))
    h = model.cfg.sim_grid.h
    r = g
    while True:
        v1, v2 = model.neumann_V(r)
        x = (x[0] + lam * v1, x[1] + lam * v2)
        r = g - model.forward_U(*x)
        rec.record(x, h * float(np.linalg.norm(r)))
        if rec.finished():
            break
    run = rec.close(x)
    run.extra["pair"] = x
    return run
