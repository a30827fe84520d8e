"""Composed forward operator, synthetic data and experiment configuration."""
import configparser
import io
import logging
from dataclasses import dataclass, field, fields, replace
from typing import Optional, Tuple

import numpy as np

from .errors import ConfigError
from .fields import Grid, Medium, build_phantom, default_phantoms
from .operators import VectorSpace, compose, make_rng, power_iter_norm
from .radon import (MaskSpec, RadonTransform, Sinogram, SinogramGeom, lambda_filter_values,
                    mask_array, mask_operator)
from .wave import WaveConfig, WaveModel

log = logging.getLogger(__name__)

__all__ = [
    "ExperimentConfig",
    "Problem",
    "PROFILES",
    "SOLVERS",
    "add_noise",
    "build_problem",
    "data_space",
]

SOLVERS = ("cgne", "landweber", "sd", "fbs", "cp", "neumann")


def add_noise(sin, level, seed):
    """Gaussian noise with std ``level * mean(|active values|)`` on active samples.

    Masked samples stay zero.  ``level = 0`` returns an identical copy.
    """
    if level < 0:
        raise ValueError("noise level must be nonnegative")
    values = np.array(sin.values, copy=True)
    if level == 0:
        return Sinogram(sin.geom, values, sin.mask.copy())
    active = sin.mask
    sigma = level * float(np.mean(np.abs(values[active]))) if active.any() else 0.0
    noise = make_rng(seed).standard_normal(values.shape)
    values[active] += sigma * noise[active]
    values[~active] = 0.0
    return Sinogram(sin.geom, values, sin.mask.copy())


def data_space(geom, pad=True):
    """Sinogram space with the filtered inner product ``<Λ y, z>``."""
    return VectorSpace(geom.shape, gram=lambda y: lambda_filter_values(y, geom, pad),
                       cell=1.0, name="sinogram Λ")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one experiment.

    Angles are in degrees.  ``angular_range`` selects the measured part of
    the half circle; directions are always spread uniformly over
    ``[0, 180)``.
    """

    object_n: int = 101
    object_extent: float = 1.0
    sim_n: int = 400
    sim_extent: float = 4.0
    T: float = 3.0
    nt: int = 300
    n_theta: int = 250
    angular_range: Tuple[float, float] = (0.0, 180.0)
    exterior_radius: float = 1.0
    pad_filter: bool = True
    noise: float = 0.005
    seed: int = 0
    solvers: Tuple[str, ...] = ("cgne", "fbs", "cp")
    max_iters: int = 100
    cgne_iters: int = 40
    landweber_gamma: float = 1.0
    # penalty weights: minimum best error over half-decade grids at desk scale, 0.5% noise
    fbs_lambda: float = 1e-3
    fbs_step: float = 1.0
    cp_lambda: float = 1e-4
    neumann_lambda: float = 1.0
    neumann_iters: int = 15
    neumann_input: str = "fbp"
    norm_iters: int = 20
    cp_norm_iters: int = 50
    snapshots: int = 0
    out: str = "ffpat-out"

    def __post_init__(self):
        for name in ("object_n", "sim_n", "nt", "n_theta", "max_iters", "cgne_iters",
                     "neumann_iters", "norm_iters", "cp_norm_iters"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.object_n < 3 or self.sim_n < 3:
            raise ConfigError("grids need at least 3 nodes per axis")
        if self.noise < 0:
            raise ConfigError("noise level must be nonnegative")
        if self.snapshots < 0:
            raise ConfigError("snapshot stride must be nonnegative")
        lo, hi = self.angular_range
        if not 0.0 <= lo < hi <= 180.0:
            raise ConfigError(f"angular range must satisfy 0 <= lo < hi <= 180, got {lo}, {hi}")
        bad = [s for s in self.solvers if s not in SOLVERS]
        if bad or not self.solvers:
            raise ConfigError(f"unknown solver(s) {bad}; choose from {', '.join(SOLVERS)}")
        for name in ("landweber_gamma", "fbs_step", "cp_lambda"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.fbs_lambda < 0:
            raise ConfigError("fbs_lambda must be nonnegative")
        if self.neumann_input not in ("fbp", "exact"):
            raise ConfigError("neumann_input must be 'fbp' or 'exact'")
        if not 0 < self.neumann_lambda < 2:
            raise ConfigError("neumann_lambda must lie in (0, 2)")

    @property
    def object_grid(self):
        return Grid(self.object_n, self.object_extent)

    @property
    def sim_grid(self):
        return Grid(self.sim_n, self.sim_extent, periodic=True)

    def mask_spec(self):
        return MaskSpec(self.exterior_radius, tuple(self.angular_range))

    def with_overrides(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        try:
            return replace(self, **kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    # -- text round trip ---------------------------------------------------

    def to_ini(self):
        cp = configparser.ConfigParser()
        cp.optionxform = str
        cp["experiment"] = {f.name: _fmt(getattr(self, f.name)) for f in fields(self)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text, base=None):
        """Parse ``[experiment]`` keys over ``base`` (default: desk profile)."""
        cp = configparser.ConfigParser()
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config: {exc}") from None
        base = base or cls()
        if not cp.has_section("experiment"):
            raise ConfigError("config needs an [experiment] section")
        known = {f.name: f for f in fields(cls)}
        kw = {}
        for key, raw in cp["experiment"].items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            kw[key] = _parse(raw, getattr(base, key), key)
        return base.with_overrides(**kw)


def _fmt(v):
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def _parse(raw, like, key):
    raw = raw.strip()
    try:
        if isinstance(like, bool):
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1", "yes")
        if isinstance(like, int):
            return int(raw)
        if isinstance(like, float):
            return float(raw)
        if isinstance(like, tuple):
            parts = [p.strip() for p in raw.split(",") if p.strip()]
            if like and isinstance(like[0], float):
                return tuple(float(p) for p in parts)
            return tuple(parts)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


PROFILES = {
    "desk": ExperimentConfig(),
    "paper": ExperimentConfig(object_n=201, sim_n=800, nt=600, n_theta=1000),
}


@dataclass
class Problem:
    """Wave model, Radon transform, composed operator and synthetic data."""

    cfg: ExperimentConfig
    model: WaveModel
    radon: RadonTransform
    A: object
    truth: np.ndarray
    clean: Sinogram
    noisy: Sinogram
    _norm: Optional[float] = field(default=None, repr=False)

    def op_norm(self):
        """``|A|`` by power iteration, cached."""
        if self._norm is None:
            self._norm = power_iter_norm(self.A, iters=self.cfg.norm_iters, seed=self.cfg.seed)
            log.info("estimated |A| = %.6g", self._norm)
        return self._norm


def build_operator(model, radon, mask_spec, pad=True):
    """``A = M X W`` from weighted object space to the Λ-weighted sinogram space."""
    W = model.W_operator()
    X = radon.operator(domain=W.range)
    M = mask_operator(radon.geom, mask_spec)
    A = compose(M, X, W)
    return A.reweighted(range=data_space(radon.geom, pad))


def build_problem(cfg):
    f_spec, c_spec, a_spec = default_phantoms()
    sim, obj = cfg.sim_grid, cfg.object_grid
    medium = Medium.from_specs(c_spec, a_spec, sim)
    model = WaveModel(WaveConfig(medium, obj, cfg.T, cfg.nt))
    geom = SinogramGeom.for_grid(sim, cfg.n_theta)
    radon = RadonTransform(sim, geom)
    spec = cfg.mask_spec()
    A = build_operator(model, radon, spec, cfg.pad_filter)
    truth = build_phantom(f_spec, obj)
    clean = Sinogram(geom, A(truth), mask_array(geom, spec))
    noisy = add_noise(clean, cfg.noise, cfg.seed)
    return Problem(cfg, model, radon, A, truth, clean, noisy)
