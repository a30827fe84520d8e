import numpy as np
import pytest

from ffpat.errors import ConfigError
from ffpat.operators import dot_test
from ffpat.pipeline import PROFILES, ExperimentConfig, add_noise, build_problem
from ffpat.radon import MaskSpec, Sinogram, SinogramGeom, apply_mask

from conftest import small_config


def _sino(shape=(500, 301), seed=0):
    geom = SinogramGeom(shape[0], shape[1], 0.02)
    vals = np.random.default_rng(seed).standard_normal(geom.shape)
    return apply_mask(Sinogram(geom, vals), MaskSpec(1.0))


def test_zero_noise_is_identity():
    sin = _sino()
    out = add_noise(sin, 0.0, 3)
    assert np.array_equal(out.values, sin.values)


def test_noise_std_matches_level():
    sin = _sino()
    level = 0.01
    out = add_noise(sin, level, 5)
    active = sin.mask
    assert active.sum() >= 1e5
    sigma = level * np.mean(np.abs(sin.values[active]))
    emp = np.std(out.values[active] - sin.values[active])
    assert abs(emp / sigma - 1) < 0.02
    assert np.all(out.values[~active] == 0)


def test_noise_deterministic_per_seed():
    sin = _sino((50, 101))
    a, b = add_noise(sin, 0.05, 11), add_noise(sin, 0.05, 11)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, add_noise(sin, 0.05, 12).values)
    with pytest.raises(ValueError):
        add_noise(sin, -0.1, 0)


def test_config_round_trip():
    for cfg in list(PROFILES.values()) + [small_config(angular_range=(45.0, 180.0), noise=0.0)]:
        assert ExperimentConfig.from_ini(cfg.to_ini()) == cfg


def test_profiles():
    desk, paper = PROFILES["desk"], PROFILES["paper"]
    assert (desk.object_n, desk.sim_n, desk.nt, desk.n_theta) == (101, 400, 300, 250)
    assert (paper.object_n, paper.sim_n, paper.nt, paper.n_theta) == (201, 800, 600, 1000)
    assert desk.object_grid.offset_in(desk.sim_grid) is not None
    assert paper.object_grid.h == pytest.approx(0.01)


@pytest.mark.parametrize("text", [
    "[experiment]\nobject_n = 0\n",
    "[experiment]\nnoise = -1\n",
    "[experiment]\nsolvers = cgne, magic\n",
    "[experiment]\nunknown_key = 3\n",
    "[experiment]\nnt = many\n",
    "[experiment]\nangular_range = 90, 45\n",
    "[other]\nnt = 3\n",
    "not an ini file",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_ini(text)


def test_composed_operator_adjoint():
    prob = build_problem(small_config())
    assert dot_test(prob.A, trials=5).max_discrepancy <= 2e-2


def test_problem_data_masked():
    prob = build_problem(small_config(angular_range=(45.0, 180.0)))
    assert np.all(prob.clean.values[~prob.clean.mask] == 0)
    assert np.all(prob.noisy.values[~prob.noisy.mask] == 0)
    assert not prob.noisy.mask[prob.clean.geom.angles_deg < 45].any()
    assert prob.op_norm() > 0
