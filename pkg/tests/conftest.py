import warnings

import numpy as np
import pytest

from ffpat.fields import Grid, Medium, default_phantoms
from ffpat.pipeline import ExperimentConfig
from ffpat.wave import WaveConfig, WaveModel


def small_config(**kw):
    """Coarse grids (h = 0.1) that keep every invariant of the desk profile."""
    base = dict(object_n=21, sim_n=80, nt=60, n_theta=40, max_iters=20, cgne_iters=10,
                norm_iters=10, cp_norm_iters=10, neumann_iters=5, out="unused")
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.fixture(scope="session")
def small_cfg():
    return small_config()


@pytest.fixture(scope="session")
def small_model():
    cfg = small_config()
    _, c_spec, a_spec = default_phantoms()
    medium = Medium.from_specs(c_spec, a_spec, cfg.sim_grid)
    return WaveModel(WaveConfig(medium, cfg.object_grid, cfg.T, cfg.nt))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
