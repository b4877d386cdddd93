"""Seeded verification batteries behind ``srnf-lab verify``.

Every check returns a :class:`Check` with the measured residual, the bound
it is held to and a pass flag; the batteries only sample claims on a fixed
set of surfaces, so a pass is evidence, not proof.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .curvature import (convex_uniqueness_probe, gauss_bonnet_check, gauss_map_area_factor,
                        gaussian_curvature, sphere_rigidity_probe)
from .geom_core import ParamPatch, RigidMotion, SurfaceImmersion, srnf
from .shape_metric import Reparametrization, field_norm, reparam_act, srnf_distance
from .surfaces import convex_blob, ellipsoid, quadric_graph, sphere, torus_patch, unit_sphere

BOX = ((-1.0, 1.0), (-1.0, 1.0))


@dataclass
class Check:
    name: str
    value: float
    bound: float
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def _le(name, value, bound, **details):
    value = float(value)
    return Check(name, value, float(bound), bool(value <= bound), details)


def _ge(name, value, bound, **details):
    value = float(value)
    return Check(name, value, float(bound), bool(value > bound), details)


# --- analytic graphs and their reparametrizations -------------------------------

def _graph(coeffs):
    a, b, c = coeffs

    def fn(x, y):
        return np.stack([x, y, a * x**2 + b * y**2 + c * x * y + 0.3 * np.sin(x + 2 * y)],
                        axis=-1)
    return fn


def _sample(fn, u, v):
    return ParamPatch(BOX, fn(u, v))


def random_warp(rng, amplitude=0.08):
    """Smooth self-map of the square [-1, 1]^2 fixing its boundary pointwise."""
    k = rng.integers(1, 3, size=2)
    ph = rng.uniform(0, 2 * np.pi, size=2)
    amp = amplitude * rng.uniform(0.5, 1.0, size=2)

    def phi(u, v):
        s = (1 - u**2) * (1 - v**2)
        return (u + amp[0] * s * np.sin(k[0] * np.pi * v + ph[0]),
                v + amp[1] * s * np.sin(k[1] * np.pi * u + ph[1]))
    return phi


def invariance_battery(seed=0, n_trials=20, n=129, tol=1e-6):
    """d(f1, f2) against d(A f1 o phi + t, A f2 o phi + t) and equivariance of srnf.

    Returns
    -------
    list of Check
        One invariance and one equivariance check per trial.
    """
    rng = np.random.default_rng(seed)
    u, v = np.meshgrid(np.linspace(-1, 1, n), np.linspace(-1, 1, n), indexing="ij")
    g1, g2 = _graph((0.5, -0.3, 0.2)), _graph((0.2, 0.6, -0.4))
    f1 = SurfaceImmersion([_sample(g1, u, v)])
    f2 = SurfaceImmersion([_sample(g2, u, v)])
    d = srnf_distance(f1, f2)
    q1 = srnf(f1)
    norm1 = field_norm(q1)
    out = []
    for trial in range(n_trials):
        motion = RigidMotion.random(rng)
        phi = random_warp(rng)
        pu, pv = phi(u, v)
        h1 = SurfaceImmersion([ParamPatch(BOX, motion(g1(pu, pv)))])
        h2 = SurfaceImmersion([ParamPatch(BOX, motion(g2(pu, pv)))])
        dev = abs(srnf_distance(h1, h2) - d)
        out.append(_le(f"invariance[{trial}]", dev / d, tol, distance=d))
        rep = Reparametrization.from_function(f1.patches, lambda k, a, b: phi(a, b))
        moved = SurfaceImmersion([ParamPatch(BOX, g1(pu, pv))])
        res = field_norm(reparam_act(q1, rep) - srnf(moved)) / norm1
        out.append(_le(f"equivariance[{trial}]", res, tol))
    return out


# --- curvature identities ---------------------------------------------------------

def analytic_battery(n=129):
    """Named analytic surfaces used for the Gauss-map identity."""
    return {
        "sphere": unit_sphere(n),
        "ellipsoid": ellipsoid(n, (1.0, 1.0, 1.2)),
        "quadric": quadric_graph(0.4, -0.3, 0.25, n=n),
        "torus": torus_patch(n),
    }


def gauss_identity_battery(n=129, tol=1e-4):
    out = []
    for name, f in analytic_battery(n).items():
        g = np.concatenate([x.ravel() for x in gauss_map_area_factor(f)])
        k = np.abs(gaussian_curvature(f).flat_K())
        out.append(_le(f"gauss_factor[{name}]", np.max(np.abs(g - k)), tol))
    return out


def gauss_bonnet_battery(surfaces, tol=1e-2):
    """Total curvature of closed genus-0 surfaces against 4 pi."""
    return [_le(f"gauss_bonnet[{name}]", abs(gauss_bonnet_check(f) - 4 * np.pi), tol)
            for name, f in surfaces.items()]


# --- rigidity and uniqueness probes -----------------------------------------------

def sphere_battery(n=65):
    ell = sphere_rigidity_probe(ellipsoid(n, (1.0, 1.0, 1.2)))
    moved = sphere_rigidity_probe(unit_sphere(n).translate((0.3, -0.2, 0.5)))
    return [
        _ge("sphere_vs_ellipsoid_distance", ell.distance, 0.05),
        _le("sphere_vs_translate_distance", moved.distance, 1e-10),
        _le("sphere_translate_residual", moved.translate_residual, 1e-10),
    ]


def convex_battery(n=65, seed=0):
    blob = convex_blob(n, seed=seed)
    rep = convex_uniqueness_probe(blob, blob.translate((0.4, 0.1, -0.7)))
    witness = convex_uniqueness_probe(sphere(n), ellipsoid(n, (1.0, 1.0, 1.2)))
    return [
        _le("convex_translate_residual", rep.translate_residual / rep.diagonal, 1e-10),
        _ge("convex_k_witness", witness.details["k_discrepancy"], 0.0),
    ]


def orientation_check(f: SurfaceImmersion, name="fixture"):
    """Closed surfaces must be oriented by the outward normal.

    The enclosed volume (1/3) * integral of <x, n> dA is positive exactly
    when the normals point outward; a flipped fixture turns it negative.
    """
    vol = 0.0
    q = srnf(f)
    for p, val in zip(f.patches, q.values):
        # q sqrt(a) dA_domain = n a dA_domain = n dA
        a = np.einsum("ijk,ijk->ij", val, val)
        n = val / np.sqrt(a)[..., None]
        vol += float(np.sum(np.einsum("ijk,ijk->ij", p.positions, n) * a * p.density
                            * p.weights)) / 3.0
    return _ge(f"orientation[{name}]", vol, 0.0)


BATTERIES = ("invariance", "gauss", "sphere", "convex")


def run(battery="all", seed=0, n=65, fixture=None):
    """Run one battery (or all) and return the list of checks."""
    names = BATTERIES if battery == "all" else (battery,)
    checks = []
    for name in names:
        if name == "invariance":
            checks += invariance_battery(seed=seed)
        elif name == "gauss":
            checks += gauss_identity_battery()
            checks += gauss_bonnet_battery({"sphere": unit_sphere(n),
                                            "ellipsoid": ellipsoid(n, (1.0, 1.0, 1.2))})
        elif name == "sphere":
            checks += sphere_battery(n)
        elif name == "convex":
            checks += convex_battery(n, seed)
        else:
            raise ValueError(f"unknown battery {name!r}")
    if fixture is not None:
        checks.append(orientation_check(fixture))
    return checks
