import warnings

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from ffpat.errors import ConfigError, DivergenceError
from ffpat.fields import Grid, Medium, default_phantoms, build_phantom, disc_mask
from ffpat.operators import dot_test
from ffpat.verify import wave_mode_error
from ffpat.wave import WaveConfig, WaveModel, energy_norm, harmonic_extend, project_P

from conftest import small_config


def _homogeneous(n=64, extent=4.0, c=1.0, a=0.0, T=1.0, nt=100):
    sim = Grid(n, extent, periodic=True)
    half = int(round(1.0 / sim.h))
    obj = Grid(2 * half + 1, half * sim.h)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return WaveModel(WaveConfig(Medium.homogeneous(sim, c, a), obj, T, nt))


def test_single_mode_undamped():
    assert wave_mode_error(0.0, nt=200, T=1.0) <= 1e-3


def test_single_mode_damped():
    assert wave_mode_error(0.5, nt=200, T=1.0) <= 1e-2


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 12), st.integers(0, 12), st.floats(0.5, 1.5))
def test_undamped_modes_exact_in_time(m1, m2, c):
    # the corrected Laplacian makes constant-speed stepping exact per mode
    # relative error is undefined where the exact mode crosses zero at T
    assume((m1 or m2) and abs(np.cos(c * np.pi * np.hypot(m1, m2) / 4.0)) > 1e-3)
    assert wave_mode_error(0.0, c=c, nt=50, T=1.0, n=64, mode=(m1, m2)) <= 1e-9


def test_damped_mode_second_order_in_time():
    e1 = wave_mode_error(1.0, nt=100, T=1.0, n=64)
    e2 = wave_mode_error(1.0, nt=200, T=1.0, n=64)
    assert 3.0 < e1 / e2 < 5.0


def test_damped_mode_against_ode_integrator():
    from scipy.integrate import solve_ivp

    a, k = 0.7, np.pi * np.hypot(3, 2) / 4.0
    sol = solve_ivp(lambda t, y: [y[1], -a * y[1] - k**2 * y[0]], (0, 1), [1.0, 0.0],
                    rtol=1e-12, atol=1e-12)
    model = _homogeneous(a=a, nt=400)
    x1, x2 = model.cfg.sim_grid.mesh()
    u0 = np.cos(np.pi * (3 * x1 + 2 * x2) / 4.0)
    u = model.solve_forward(u0, np.zeros_like(u0)).u
    assert np.allclose(u, sol.y[0, -1] * u0, atol=1e-3)


def test_zero_data_stays_zero(small_model):
    z = np.zeros(small_model.cfg.sim_grid.shape)
    assert np.all(small_model.solve_forward(z, z).u == 0)


def test_energy_monotone_and_conserved():
    cfg = small_config()
    sim, obj = cfg.sim_grid, cfg.object_grid
    f_spec, c_spec, a_spec = default_phantoms()
    c = build_phantom(c_spec, sim)
    for damped in (True, False):
        a = build_phantom(a_spec, sim) if damped else np.zeros(sim.shape)
        model = WaveModel(WaveConfig(Medium(sim, c, a), obj, cfg.T, cfg.nt))
        f = model.to_sim(build_phantom(f_spec, obj))
        e = model.solve_forward(f, np.zeros_like(f), energy=True).energy
        assert len(e) == cfg.nt
        if damped:
            assert np.all(np.diff(e) <= 1e-12 * e[0])
            assert e[-1] < 0.9 * e[0]
        else:
            assert np.max(np.abs(e - e[0])) <= 1e-10 * e[0]


def test_velocity_output_matches_mode():
    model = _homogeneous(nt=200)
    x1, x2 = model.cfg.sim_grid.mesh()
    k = np.pi * np.hypot(3, 2) / 4.0
    u0 = np.cos(np.pi * (3 * x1 + 2 * x2) / 4.0)
    sol = model.solve_forward(u0, np.zeros_like(u0), velocity=True)
    assert np.allclose(sol.ut, -k * np.sin(k) * u0, atol=1e-3)


def test_divergence_detected(small_model):
    f = np.zeros(small_model.cfg.sim_grid.shape)
    f[40, 40] = np.inf
    with pytest.raises(DivergenceError) as info:
        small_model.solve_forward(f, np.zeros_like(f))
    assert info.value.step >= 1


def test_config_validation():
    cfg = small_config()
    _, c_spec, a_spec = default_phantoms()
    medium = Medium.from_specs(c_spec, a_spec, cfg.sim_grid)
    with pytest.raises(ConfigError, match="time step"):
        WaveConfig(medium, cfg.object_grid, 3.0, 5)
    with pytest.raises(ConfigError, match="wrap"):
        WaveConfig(medium, cfg.object_grid, 4.0, 400)
    with pytest.raises(ConfigError):
        WaveConfig(medium, Grid(20, 1.0), 3.0, 60)
    with pytest.warns(UserWarning, match="not unique"):
        WaveConfig(medium, cfg.object_grid, 1.5, 60)


def test_W_adjoint(small_model):
    rep = dot_test(small_model.W_operator(), trials=5)
    assert rep.max_discrepancy <= 2e-2


def test_W_linear(small_model, rng):
    f = rng.standard_normal(small_model.cfg.object_grid.shape)
    g = rng.standard_normal(f.shape)
    W = small_model.forward_W
    assert np.allclose(W(2 * f - g), 2 * W(f) - W(g), atol=1e-12 * np.abs(W(f)).max())


@pytest.mark.parametrize("poly", [
    lambda x, y: np.ones_like(x),
    lambda x, y: 2 * x - y,
    lambda x, y: x**2 - y**2,
    lambda x, y: x * y,
    lambda x, y: x**3 - 3 * x * y**2,
])
def test_harmonic_extension_exact_for_harmonic_polynomials(poly):
    g = Grid(41, 1.5)
    x1, x2 = g.mesh()
    exact = poly(x1, x2)
    data = np.where(g.radius() < 1, 0.0, exact)
    assert np.allclose(harmonic_extend(data, g), exact, atol=1e-10)


def test_harmonic_extension_keeps_exterior(rng):
    g = Grid(41, 1.5)
    data = rng.standard_normal(g.shape)
    out = harmonic_extend(data, g)
    ext = g.radius() >= 1
    assert np.array_equal(out[ext], data[ext])


def test_projection_idempotent(rng):
    g = Grid(41, 1.0)
    u, v = rng.standard_normal(g.shape), rng.standard_normal(g.shape)
    p1, q1 = project_P(u, v, harmonic_extend(u, g), g)
    p2, q2 = project_P(p1, q1, harmonic_extend(p1, g), g)
    assert np.allclose(p1, p2, atol=1e-12) and np.allclose(q1, q2, atol=1e-12)
    assert np.all(p1[g.radius() >= 1] == 0)


def test_time_reverse_of_zero(small_model):
    z = np.zeros(small_model.cfg.sim_grid.shape)
    v0, v1 = small_model.time_reverse(z)
    assert np.all(v0 == 0) and np.all(v1 == 0)
    w1, w2 = small_model.neumann_V(z)
    assert np.all(w1 == 0) and np.all(w2 == 0)


def test_time_reverse_undoes_undamped_propagation():
    # without damping, reversing the final state (u(T), u_t(T)) recovers (f, 0) exactly
    model = _homogeneous(n=128, T=1.0, nt=100)
    sim = model.cfg.sim_grid
    r = sim.radius()
    f = np.where(r < 0.5, np.cos(np.pi * r) ** 4, 0.0)
    sol = model.solve_forward(f, np.zeros_like(f), velocity=True)
    back = model.solve_forward(sol.u, -sol.ut)
    assert np.linalg.norm(back.u - f) / np.linalg.norm(f) < 1e-3


def test_forward_U_is_exterior(small_model, rng):
    chi = disc_mask(small_model.cfg.object_grid)
    f1 = chi * rng.standard_normal(chi.shape)
    g = small_model.forward_U(f1, np.zeros_like(f1))
    assert np.all(g[small_model.cfg.sim_grid.radius() < 1] == 0)


def test_contraction_below_one(small_model):
    est, hist = small_model.contraction_estimate(1.0, iters=8)
    assert 0 < est < 1
    assert len(hist) == 8


def test_band_limited_iterates_stay_in_band(small_model):
    keep = small_model._band_mask(0.5)
    rng = np.random.default_rng(3)
    x = small_model._low_pass(rng.standard_normal(keep.shape), keep)
    spec = np.abs(np.fft.fft2(x))
    # the disc mask leaks a little energy out of band, nothing more
    assert np.sum(spec[~keep] ** 2) < 0.2 * np.sum(spec**2)
    est, _ = small_model.contraction_estimate(1.0, iters=4, band=0.5)
    assert 0 < est < 1


def test_energy_norm_of_constant_displacement():
    g = Grid(11, 1.0)
    assert energy_norm(np.ones(g.shape), np.zeros(g.shape), g) == 0.0
    assert energy_norm(np.zeros(g.shape), np.ones(g.shape), g) == pytest.approx(np.sqrt(121) * g.h)
