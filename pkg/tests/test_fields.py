import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ffpat.errors import ConfigError, ShapeError
from ffpat.fields import (Bump, Grid, Medium, PhantomSpec, build_phantom, default_phantoms,
                          disc_mask, embed, rel_l2_error, restrict)
from ffpat.operators import LinearOperator, VectorSpace, dot_test

OBJ = Grid(101, 1.0)
SIM = Grid(400, 4.0, periodic=True)


def test_grid_spacing_conventions():
    assert Grid(201, 1.0).h == pytest.approx(0.01)
    assert Grid(801, 4.0).h == pytest.approx(0.01)
    assert SIM.h == pytest.approx(0.02)
    assert OBJ.offset_in(SIM) == 150
    assert Grid(100, 1.0).offset_in(SIM) is None
    with pytest.raises(ConfigError):
        Grid(2, 1.0)


def test_empty_phantoms():
    assert np.all(build_phantom(PhantomSpec((), "source"), OBJ) == 0)
    assert np.all(build_phantom(PhantomSpec((), "speed-perturbation"), OBJ) == 1)


def test_bump_center_and_edge_values():
    g = Grid(101, 1.0)
    f = build_phantom(PhantomSpec((Bump((0.0, 0.0), 0.5, 1.0),), "source"), g)
    assert f[50, 50] == pytest.approx(1.0)
    assert f[75, 50] == 0.0  # x = (0.5, 0)


def test_gaussian_truncated_profile():
    g = Grid(101, 1.0)
    f = build_phantom(PhantomSpec((Bump((0.0, 0.0), 0.5, 2.0, "gaussian-truncated"),), "source"), g)
    assert f[50, 50] == pytest.approx(2.0)
    assert f[60, 50] == pytest.approx(2.0 * np.exp(-4.5 * 0.2**2 / 0.25))


def test_bump_support_validation():
    with pytest.raises(ConfigError):
        build_phantom(PhantomSpec((Bump((0.8, 0.0), 0.2, 1.0),), "source"), OBJ)
    with pytest.raises(ConfigError):
        build_phantom(PhantomSpec((Bump((0.0, 0.0), 0.2, 1.0, "square"),), "source"), OBJ)
    with pytest.raises(ConfigError):
        build_phantom(PhantomSpec((), "pressure"), OBJ)


def test_default_phantom_bounds():
    f_spec, c_spec, a_spec = default_phantoms()
    for g in (OBJ, SIM):
        c = build_phantom(c_spec, g)
        a = build_phantom(a_spec, g)
        f = build_phantom(f_spec, g)
        assert c.max() <= 1.2 + 1e-12 and c.min() >= 1 - 1e-12
        assert a.min() >= 0
        assert np.all(f[g.radius() >= 0.95] == 0)
        Medium(SIM, build_phantom(c_spec, SIM), build_phantom(a_spec, SIM))


def test_phantoms_bit_identical():
    f_spec, _, _ = default_phantoms()
    assert np.array_equal(build_phantom(f_spec, OBJ), build_phantom(f_spec, OBJ))


def test_medium_validation():
    c = np.ones(SIM.shape)
    a = np.zeros(SIM.shape)
    bad_c = c.copy()
    bad_c[0, 0] = 1.1
    with pytest.raises(ConfigError):
        Medium(SIM, bad_c, a)
    bad_a = a.copy()
    bad_a[200, 200] = -0.1
    with pytest.raises(ConfigError):
        Medium(SIM, c, bad_a)
    nan_c = c.copy()
    nan_c[200, 200] = np.nan
    with pytest.raises(ConfigError):
        Medium(SIM, nan_c, a)
    with pytest.raises(ShapeError):
        Medium(SIM, np.ones((3, 3)), a)


def test_embed_restrict_round_trip(rng):
    f = rng.standard_normal(OBJ.shape)
    big = embed(f, OBJ, SIM)
    assert np.array_equal(restrict(big, SIM, OBJ), f)
    assert np.all(embed(np.zeros(OBJ.shape), OBJ, SIM) == 0)
    assert big.sum() == pytest.approx(f.sum(), rel=1e-12)


def test_embed_mass_preserved():
    f_spec, _, _ = default_phantoms()
    f = build_phantom(f_spec, OBJ)
    mass = f.sum() * OBJ.h**2
    assert embed(f, OBJ, SIM).sum() * SIM.h**2 == pytest.approx(mass, rel=1e-3)


def test_embed_background():
    out = embed(np.zeros(OBJ.shape), OBJ, SIM, background=1.0)
    assert out[0, 0] == 1.0 and out[200, 200] == 0.0


def test_restrict_mask_unit_disc(rng):
    g = rng.standard_normal(SIM.shape)
    out = restrict(g, SIM, OBJ, mask_unit_disc=True)
    assert np.all(out[OBJ.radius() >= 1.0] == 0)


def test_embed_restrict_adjoint():
    op = LinearOperator(VectorSpace(OBJ.shape), VectorSpace(SIM.shape),
                        lambda f: embed(f, OBJ, SIM), lambda g: restrict(g, SIM, OBJ))
    assert dot_test(op).max_discrepancy <= 1e-12


def test_non_nested_embed_interpolates():
    coarse = Grid(11, 1.0)
    fine = Grid(41, 2.0)
    x1, _ = coarse.mesh()
    out = embed(x1, coarse, fine)
    fx1, fx2 = fine.mesh()
    inside = (np.abs(fx1) <= 1) & (np.abs(fx2) <= 1)
    assert np.allclose(out[inside], fx1[inside])
    assert np.all(out[~inside] == 0)


def test_rel_l2_error_examples(rng):
    ref = rng.standard_normal((5, 5))
    assert rel_l2_error(ref, ref) == 0
    assert rel_l2_error(np.zeros_like(ref), ref) == 1
    assert rel_l2_error(1.1 * ref, ref) == pytest.approx(0.1, abs=1e-12)
    with pytest.raises(ValueError):
        rel_l2_error(ref, np.zeros_like(ref))


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.6, 0.6), st.floats(-0.6, 0.6), st.floats(0.05, 0.3))
def test_bump_support_property(cx, cy, r):
    spec = PhantomSpec((Bump((cx, cy), r, 1.0),), "source")
    if np.hypot(cx, cy) + r > 0.95:
        with pytest.raises(ConfigError):
            spec.validate()
        return
    f = build_phantom(spec, OBJ)
    x1, x2 = OBJ.mesh()
    assert np.all(f[np.hypot(x1 - cx, x2 - cy) >= r] == 0)
    assert f.max() <= 1.0 + 1e-12


def test_disc_mask_is_open():
    m = disc_mask(OBJ)
    assert m[50, 50] == 1 and m[100, 50] == 0 and m[0, 50] == 0
