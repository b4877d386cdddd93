import numpy as np
import pytest

from srnf_lab.curvature import (convex_uniqueness_probe, convexity_check,
                                curvature_signature_distance, gauss_bonnet_check,
                                gauss_map_area_factor, gaussian_curvature, is_closed,
                                principal_curvatures, sphere_rigidity_probe, total_curvature)
from srnf_lab.exceptions import GridMismatch, NotClosed, NotConvex
from srnf_lab.geom_core import RigidMotion
from srnf_lab.surfaces import (convex_blob, ellipsoid, perturbed_sphere, quadric_curvature,
                               quadric_graph, sphere, torus_curvature, torus_patch, unit_sphere)


def _grid_index(n, value):
    i = (value + 1.0) / 2.0 * (n - 1)
    assert abs(i - round(i)) < 1e-9
    return int(round(i))


def test_quadric_curvature_matches_symbolic_values(oracles):
    ref = oracles["quadric"]
    a, b, c = ref["coeffs"]
    n = 81
    cf = gaussian_curvature(quadric_graph(a, b, c, n=n))
    for (x, y), k, h in zip(ref["points"], ref["K"], ref["H"]):
        i, j = _grid_index(n, x), _grid_index(n, y)
        assert cf.K[0][i, j] == pytest.approx(k, abs=1e-10)
        assert cf.H[0][i, j] == pytest.approx(h, abs=1e-10)
        assert quadric_curvature(a, b, c, x, y)[0] == pytest.approx(k, rel=1e-12)


def test_torus_closed_form_matches_symbolic_values(oracles):
    ref = oracles["torus"]
    got = torus_curvature(ref["major"], ref["minor"], np.array(ref["v"]))
    assert np.allclose(got, ref["K"], rtol=1e-12)


def test_torus_patch_curvature():
    f = torus_patch(129)
    _, v = f.patches[0].grid()
    k = gaussian_curvature(f).K[0]
    assert np.max(np.abs(k - torus_curvature(2.0, 0.7, v))) < 1e-6


def test_sphere_principal_curvatures_are_minus_inverse_radius():
    # outward normals: the surface bends away from n, so both are -1/r
    f = sphere(65, radius=2.0)
    for k1, k2 in principal_curvatures(f):
        assert np.allclose(k1, -0.5, atol=1e-5) and np.allclose(k2, -0.5, atol=1e-5)


def test_gauss_map_factor_equals_abs_k_on_saddle():
    f = quadric_graph(0.4, -0.3, 0.25, n=129)
    g = gauss_map_area_factor(f)[0]
    k = gaussian_curvature(f).K[0]
    assert np.max(np.abs(g - np.abs(k))) < 1e-6


def test_gauss_bonnet_on_closed_surfaces():
    for f in (unit_sphere(33), ellipsoid(33), convex_blob(33)):
        assert gauss_bonnet_check(f) == pytest.approx(4 * np.pi, abs=1e-3)


def test_gauss_bonnet_needs_a_closed_surface():
    f = quadric_graph(0.1, 0.1, n=17)
    assert not is_closed(f)
    with pytest.raises(NotClosed):
        gauss_bonnet_check(f)
    assert np.isfinite(total_curvature(f))


def test_sphere_rigidity_probe_reports_translation():
    rep = sphere_rigidity_probe(unit_sphere(33).translate((1.0, 2.0, 3.0)))
    assert rep.passed and rep.details["is_translate"]
    assert np.allclose(rep.details["mean_translation"], (1.0, 2.0, 3.0))


def test_sphere_rigidity_probe_separates_ellipsoid():
    rep = sphere_rigidity_probe(ellipsoid(33))
    assert rep.passed and rep.distance > 0.05 and not rep.details["is_translate"]


def test_sphere_rigidity_probe_needs_cubed_grid():
    with pytest.raises(GridMismatch):
        sphere_rigidity_probe(quadric_graph(0.1, 0.1, n=33))


def test_convexity_check():
    ok, k_min, degree = convexity_check(convex_blob(33, seed=2))
    assert ok and k_min > 0 and degree == pytest.approx(1.0, abs=1e-3)


def test_convex_probe_rejects_nonconvex_input():
    bumpy = perturbed_sphere(33, amplitude=0.3, seed=1)
    with pytest.raises(NotConvex):
        convex_uniqueness_probe(bumpy, bumpy)


def test_convex_probe_witness_between_sphere_and_ellipsoid():
    rep = convex_uniqueness_probe(unit_sphere(33), ellipsoid(33))
    assert rep.passed and rep.translate_residual is None
    assert rep.details["k_discrepancy"] > 0.1


def test_curvature_signature_ignores_rigid_motion():
    f = ellipsoid(33)
    moved = RigidMotion.random(np.random.default_rng(0)).apply(f)
    same = curvature_signature_distance(f, moved)
    other = curvature_signature_distance(f, unit_sphere(33))
    assert same < 1e-6 < other


def test_unit_sphere_curvature_is_one():
    k = gaussian_curvature(unit_sphere(129)).flat_K()
    assert np.max(np.abs(k - 1.0)) <= 1e-6
