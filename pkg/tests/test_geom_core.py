import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srnf_lab.examples import gen_paraboloid, paraboloid_cross
from srnf_lab.exceptions import DegenerateImmersion, GridMismatch, InvalidParam, NotARotation
from srnf_lab.geom_core import (ParamPatch, RigidMotion, SrnfField, SurfaceImmersion,
                                area_factor, area_factors, quadrature_weights_1d, srnf,
                                translate_invariance_check, unit_normal, unit_normals)
from srnf_lab.surfaces import quadric_graph, sphere, unit_sphere

BOX = ((-1.0, 1.0), (-1.0, 1.0))


def _graph(height, n=33, order=4):
    u, v = np.meshgrid(np.linspace(-1, 1, n), np.linspace(-1, 1, n), indexing="ij")
    return SurfaceImmersion([ParamPatch(BOX, np.stack([u, v, height(u, v)], -1))],
                            fd_order=order)


def test_simpson_weights_integrate_cubics_exactly():
    x = np.linspace(0, 2, 9)
    w = quadrature_weights_1d(9, 2.0)
    assert w.sum() == pytest.approx(2.0, abs=1e-15)
    assert w @ x**3 == pytest.approx(4.0, abs=1e-14)


def test_periodic_weights_fall_back_to_trapezoid():
    w = quadrature_weights_1d(8, 1.0, periodic=True)
    assert w[0] == pytest.approx(w[1] / 2)
    assert w.sum() == pytest.approx(1.0)


def test_patch_rejects_bad_input():
    with pytest.raises(InvalidParam):
        ParamPatch(BOX, np.zeros((5, 5, 2)))
    with pytest.raises(InvalidParam):
        ParamPatch(BOX, np.full((5, 5, 3), np.nan))
    with pytest.raises(InvalidParam):
        ParamPatch(BOX, np.zeros((5, 5, 3)), density=-np.ones((5, 5)))
    with pytest.raises(InvalidParam):
        ParamPatch(((0, 0), (0, 1)), np.zeros((5, 5, 3)))


def test_positions_are_read_only():
    p = ParamPatch(BOX, np.zeros((5, 5, 3)))
    with pytest.raises(ValueError):
        p.positions[0, 0, 0] = 1.0


def test_immersion_checks_stencil_size_and_order():
    p = ParamPatch(BOX, np.random.default_rng(0).normal(size=(5, 5, 3)))
    with pytest.raises(InvalidParam):
        SurfaceImmersion([p], fd_order=4)
    with pytest.raises(InvalidParam):
        SurfaceImmersion([p], fd_order=3)
    with pytest.raises(InvalidParam):
        SurfaceImmersion([p], orientation=0)


def test_paraboloid_srnf_matches_closed_form(oracles):
    f = gen_paraboloid(1, 1, nu=65, nv=65)
    q = srnf(f).values[0]
    ref = oracles["paraboloid"]["1,1@1,0"]
    # (x, y) = (1, 0) is the last u sample on the middle v line
    assert np.allclose(q[-1, 32], ref["srnf"], atol=1e-12)
    assert np.allclose(ref["srnf"], np.array([-2.0, 0.0, 1.0]) / 5**0.25)
    u, v = f.patches[0].grid()
    exact = paraboloid_cross(1, 1, u, v)
    assert np.max(np.abs(f.patches[0].cross() - exact)) < 1e-12


def test_unit_sphere_has_unit_area_factor_and_radial_normals():
    f = unit_sphere(33)
    for a, n, p in zip(area_factors(f), unit_normals(f), f.patches):
        assert np.max(np.abs(a - 1)) < 1e-13
        assert np.max(np.abs(n - p.positions)) < 1e-5


def test_scaled_sphere_area_factor_is_r_squared():
    f = sphere(33, radius=2.0)
    assert area_factor(f, 2, 10, 12) == pytest.approx(4.0, abs=1e-12)
    assert np.linalg.norm(unit_normal(f, 0, 3, 4)) == pytest.approx(1.0)


def test_degenerate_sample_is_located():
    pos = np.zeros((9, 9, 3))
    u, v = np.meshgrid(np.linspace(-1, 1, 9), np.linspace(-1, 1, 9), indexing="ij")
    pos[..., 0] = u
    pos[..., 1] = 0.0  # f_v vanishes everywhere
    f = SurfaceImmersion([ParamPatch(BOX, pos)])
    with pytest.raises(DegenerateImmersion) as err:
        srnf(f)
    assert err.value.patch == 0


def test_orientation_flips_field():
    f = quadric_graph(0.3, 0.2, n=17)
    q1, q2 = srnf(f), srnf(f.flipped())
    assert (q1 + q2).max_abs() == 0.0


def test_field_layout_mismatch():
    a = srnf(quadric_graph(0.3, 0.2, n=17))
    b = srnf(quadric_graph(0.3, 0.2, n=19))
    with pytest.raises(GridMismatch):
        a - b
    with pytest.raises(GridMismatch):
        SrnfField([np.zeros((3, 3, 3))], a.patches)


def test_rigid_motion_rejects_reflections():
    with pytest.raises(NotARotation):
        RigidMotion(np.diag([1.0, 1.0, -1.0]))
    with pytest.raises(NotARotation):
        RigidMotion(np.eye(3), np.zeros(2))


def test_check_seams_on_cubed_sphere():
    assert unit_sphere(17).check_seams() < 1e-14


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=3, max_size=3))
def test_translation_leaves_srnf_unchanged(t):
    f = _graph(lambda u, v: 0.3 * np.sin(u + v) + u * v, n=17)
    # differences of translated samples carry rounding proportional to |t|
    assert translate_invariance_check(f, t) <= 1e-13 * (1.0 + np.max(np.abs(t)))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 4]))
def test_srnf_norm_squared_is_area_factor(seed, order):
    rng = np.random.default_rng(seed)
    c = rng.uniform(-1, 1, size=4)
    f = _graph(lambda u, v: c[0] * u**2 + c[1] * v**2 + c[2] * np.sin(c[3] * u * v), n=17,
               order=order)
    q = srnf(f).values[0]
    a = area_factors(f)[0]
    assert np.max(np.abs(np.sum(q * q, axis=-1) - a)) <= 1e-12 * a.max()


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_rotating_the_surface_rotates_its_field(seed):
    rng = np.random.default_rng(seed)
    m = RigidMotion.random(rng)
    f = _graph(lambda u, v: 0.4 * u**2 - 0.2 * v * u, n=17)
    q = srnf(f).flat()
    qm = srnf(m.apply(f)).flat()
    assert np.max(np.abs(qm - q @ m.rotation.T)) < 1e-12
