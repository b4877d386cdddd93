#!/usr/bin/env python3
"""Freeze reference values used by the test suite.

Everything here is computed symbolically (sympy) or by adaptive quadrature
on closed forms (scipy), never through srnf_lab, so the frozen numbers
are an independent check on the sampled pipeline.

    python tools/make_oracles.py > tests/data/oracles.json
"""
from __future__ import annotations

import json
import sys

import numpy as np
import sympy as sp
from scipy import integrate

x, y, z = sp.symbols("x y z", real=True)


def _cross(f, u, v):
    fu = sp.Matrix([sp.diff(c, u) for c in f])
    fv = sp.Matrix([sp.diff(c, v) for c in f])
    return fu.cross(fv)


def paraboloid():
    out = {}
    for a, b in ((1, 4), (2, 2), (1, 1)):
        f = [x / sp.Integer(a), y / sp.Integer(b), x**2 / a + y**2 / sp.Integer(b)]
        c = sp.simplify(_cross(f, x, y))
        for px, py in ((1, 0), (0, 0), (-0.5, 0.75), (1, -1)):
            cv = [float(ci.subs({x: px, y: py})) for ci in c]
            nrm = float(np.linalg.norm(cv))
            out[f"{a},{b}@{px},{py}"] = {"cross": cv, "srnf": [ci / np.sqrt(nrm) for ci in cv]}
    return out


def cylinder_cross():
    th, h, r = sp.symbols("theta h r", positive=True)
    ident = [sp.cos(th), sp.sin(th), h]
    lin = [r * sp.cos(th), r * sp.sin(th), h / r]
    diff = sp.simplify(_cross(ident, th, h) - _cross(lin, th, h))
    return {"cross_difference_is_zero": all(d == 0 for d in diff)}


def twist_det():
    rho, phi = sp.symbols("rho phi", positive=True)
    theta = sp.Function("theta")
    # the twist in polar coordinates is (rho, phi) -> (rho, phi + theta(rho));
    # with area form rho d rho d phi on both sides the Jacobian determinant is
    jac = sp.Matrix([[1, 0], [sp.diff(theta(rho), rho), 1]])
    return {"polar_det": str(sp.simplify(jac.det()))}


def quadric_curvature():
    a, b, c = sp.Rational(2, 5), sp.Rational(-3, 10), sp.Rational(1, 4)
    h = a * x**2 + b * y**2 + c * x * y
    f = [x, y, h]
    fu = sp.Matrix([sp.diff(t, x) for t in f])
    fv = sp.Matrix([sp.diff(t, y) for t in f])
    n = fu.cross(fv)
    n = n / sp.sqrt(n.dot(n))
    e_, f_, g_ = fu.dot(fu), fu.dot(fv), fv.dot(fv)
    l_ = sp.Matrix([sp.diff(t, x, 2) for t in f]).dot(n)
    m_ = sp.Matrix([sp.diff(sp.diff(t, x), y) for t in f]).dot(n)
    n_ = sp.Matrix([sp.diff(t, y, 2) for t in f]).dot(n)
    k = sp.simplify((l_ * n_ - m_**2) / (e_ * g_ - f_**2))
    hm = sp.simplify((e_ * n_ - 2 * f_ * m_ + g_ * l_) / (2 * (e_ * g_ - f_**2)))
    pts = ((0, 0), (0.5, -0.25), (-1, 1), (0.8, 0.3))
    return {"coeffs": [float(a), float(b), float(c)],
            "points": [list(p) for p in pts],
            "K": [float(k.subs({x: p[0], y: p[1]})) for p in pts],
            "H": [float(hm.subs({x: p[0], y: p[1]})) for p in pts]}


def torus_curvature():
    big, small = sp.Integer(2), sp.Rational(7, 10)
    u, v = sp.symbols("u v", real=True)
    f = [(big + small * sp.cos(v)) * sp.cos(u), (big + small * sp.cos(v)) * sp.sin(u),
         small * sp.sin(v)]
    fu = sp.Matrix([sp.diff(t, u) for t in f])
    fv = sp.Matrix([sp.diff(t, v) for t in f])
    n = fu.cross(fv)
    n = n / sp.sqrt(sp.simplify(n.dot(n)))
    l_ = sp.Matrix([sp.diff(t, u, 2) for t in f]).dot(n)
    m_ = sp.Matrix([sp.diff(sp.diff(t, u), v) for t in f]).dot(n)
    n_ = sp.Matrix([sp.diff(t, v, 2) for t in f]).dot(n)
    k = sp.simplify((l_ * n_ - m_**2) / (fu.dot(fu) * fv.dot(fv) - fu.dot(fv)**2))
    vs = (0.0, 0.5, 1.2, -0.9)
    return {"major": 2.0, "minor": 0.7, "v": list(vs),
            "K": [float(k.subs({u: 0.3, v: t})) for t in vs]}


def _sphere_integral(fn):
    val, err = integrate.dblquad(
        lambda t, p: fn(np.array([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)]))
        * np.sin(t), 0.0, 2 * np.pi, 0.0, np.pi, epsabs=1e-13, epsrel=1e-13)
    return val, err


def ellipsoid_distance():
    """d(Id, D) for the unit sphere and x -> D x with D = diag(1, 1, 1.2).

    The area factor of D on the sphere at x is det(D) |D^{-1} x| and the
    normal is D^{-1} x / |D^{-1} x|.
    """
    d = np.array([1.0, 1.0, 1.2])
    det = float(np.prod(d))

    def sq(xv):
        m = xv / d
        nm = np.linalg.norm(m)
        q = np.sqrt(det * nm) * m / nm
        return float(np.sum((xv - q) ** 2))

    val, err = _sphere_integral(sq)
    area, _ = _sphere_integral(lambda xv: det * np.linalg.norm(xv / d))
    return {"axes": d.tolist(), "distance": float(np.sqrt(val)), "quad_error": float(err),
            "area": area}


def main():
    data = {
        "paraboloid": paraboloid(),
        "cylinder": cylinder_cross(),
        "twist": twist_det(),
        "quadric": quadric_curvature(),
        "torus": torus_curvature(),
        "ellipsoid": ellipsoid_distance(),
        "sphere_radius_2_distance": float(np.sqrt(4 * np.pi)),
    }
    json.dump(data, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
