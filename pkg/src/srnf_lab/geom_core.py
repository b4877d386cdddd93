"""Discretized immersed surfaces and their square root normal field.

A surface is a collection of :class:`ParamPatch` objects, each a sampled map
from a parameter rectangle into R^3.  First derivatives are finite
differences (2nd or 4th order, one-sided at free boundaries, wrapped on
periodic axes).  The Riemannian structure of the domain is carried per
sample by ``density`` (area of the domain metric per unit parameter area),
so that the area factor is ``|f_u x f_v| / density``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _fd
from .exceptions import DegenerateImmersion, GridMismatch, InvalidParam, NotARotation

EDGES = ("u0", "u1", "v0", "v1")
DEFAULT_ORDER = 4


def quadrature_weights_1d(n, length, periodic=False):
    """Composite Simpson weights (trapezoid for periodic or even counts)."""
    h = length / (n - 1)
    w = np.full(n, h)
    if periodic or n % 2 == 0:
        w[0] = w[-1] = h / 2
        return w
    w[1:-1:2] = 4 * h / 3
    w[2:-1:2] = 2 * h / 3
    w[0] = w[-1] = h / 3
    return w


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


class ParamPatch:
    """One rectangular parameter patch with sampled positions.

    Parameters
    ----------
    domain : ((u0, u1), (v0, v1))
        Parameter rectangle.
    positions : array_like, shape (nu, nv, 3)
        Sampled immersion on the regular grid, v varying fastest.
    weights : array_like, shape (nu, nv), optional
        Quadrature weights in parameter-area units.  Defaults to the tensor
        Simpson rule (trapezoid along periodic axes).
    density : array_like, shape (nu, nv), optional
        Domain-metric area density per parameter area; defaults to 1.
    periodic : (bool, bool)
        Whether the u / v axis wraps (last sample duplicates the first).
    boundary_tags : dict, optional
        Edge name -> ``"free"`` or ``"seam:<id>"``.
    """

    def __init__(self, domain, positions, weights=None, density=None,
                 periodic=(False, False), boundary_tags=None, name=None):
        (u0, u1), (v0, v1) = domain
        self.domain = ((float(u0), float(u1)), (float(v0), float(v1)))
        self.positions = _readonly(positions)
        if self.positions.ndim != 3 or self.positions.shape[2] != 3:
            raise InvalidParam("positions must have shape (nu, nv, 3)")
        nu, nv = self.positions.shape[:2]
        if nu < 3 or nv < 3:
            raise InvalidParam("need at least 3 samples per axis")
        if not (u1 > u0 and v1 > v0):
            raise InvalidParam("empty parameter rectangle")
        if not np.all(np.isfinite(self.positions)):
            raise InvalidParam("positions must be finite")
        self.periodic = (bool(periodic[0]), bool(periodic[1]))
        if weights is None:
            weights = np.outer(
                quadrature_weights_1d(nu, u1 - u0, self.periodic[0]),
                quadrature_weights_1d(nv, v1 - v0, self.periodic[1]),
            )
        self.weights = _readonly(weights)
        if self.weights.shape != (nu, nv) or np.any(self.weights <= 0):
            raise InvalidParam("weights must be positive with shape (nu, nv)")
        area = (u1 - u0) * (v1 - v0)
        if abs(self.weights.sum() - area) > 1e-12 * area:
            raise InvalidParam("weights must sum to the parameter area")
        self.density = _readonly(np.ones((nu, nv)) if density is None else density)
        if self.density.shape != (nu, nv) or np.any(self.density <= 0):
            raise InvalidParam("density must be positive with shape (nu, nv)")
        tags = {e: "free" for e in EDGES}
        if self.periodic[0]:
            tags["u0"] = tags["u1"] = "periodic"
        if self.periodic[1]:
            tags["v0"] = tags["v1"] = "periodic"
        tags.update(boundary_tags or {})
        self.boundary_tags = tags
        self.name = name
        self._cache = {}

    @property
    def shape(self):
        return self.positions.shape[:2]

    @property
    def spacing(self):
        (u0, u1), (v0, v1) = self.domain
        nu, nv = self.shape
        return (u1 - u0) / (nu - 1), (v1 - v0) / (nv - 1)

    def grid(self):
        """Parameter sample coordinates, two (nu, nv) arrays."""
        (u0, u1), (v0, v1) = self.domain
        nu, nv = self.shape
        return np.meshgrid(np.linspace(u0, u1, nu), np.linspace(v0, v1, nv), indexing="ij")

    def with_positions(self, positions, density=None):
        """Same grid and metric, new sampled map."""
        return ParamPatch(self.domain, positions, self.weights,
                          self.density if density is None else density,
                          self.periodic, self.boundary_tags, self.name)

    def same_layout(self, other):
        return (self.domain == other.domain and self.shape == other.shape
                and self.periodic == other.periodic
                and np.array_equal(self.weights, other.weights)
                and np.allclose(self.density, other.density, rtol=1e-12, atol=0))

    def edge_samples(self, edge):
        p = self.positions
        return {"u0": p[0], "u1": p[-1], "v0": p[:, 0], "v1": p[:, -1]}[edge]

    def tangents(self, order=DEFAULT_ORDER):
        key = ("tan", order)
        if key not in self._cache:
            hu, hv = self.spacing
            fu = _fd.diff(self.positions, 0, hu, 1, order, self.periodic[0])
            fv = _fd.diff(self.positions, 1, hv, 1, order, self.periodic[1])
            fu.setflags(write=False)
            fv.setflags(write=False)
            self._cache[key] = (fu, fv)
        return self._cache[key]

    def second_derivatives(self, order=DEFAULT_ORDER):
        key = ("sec", order)
        if key not in self._cache:
            hu, hv = self.spacing
            fu, _ = self.tangents(order)
            fuu = _fd.diff(self.positions, 0, hu, 2, order, self.periodic[0])
            fvv = _fd.diff(self.positions, 1, hv, 2, order, self.periodic[1])
            fuv = _fd.diff(fu, 1, hv, 1, order, self.periodic[1])
            self._cache[key] = (fuu, fuv, fvv)
        return self._cache[key]

    def cross(self, order=DEFAULT_ORDER):
        """Parametric normal f_u x f_v."""
        key = ("cross", order)
        if key not in self._cache:
            fu, fv = self.tangents(order)
            c = np.cross(fu, fv)
            c.setflags(write=False)
            self._cache[key] = c
        return self._cache[key]

    def __repr__(self):
        return f"ParamPatch(name={self.name!r}, shape={self.shape}, domain={self.domain})"


class SurfaceImmersion:
    """An immersion given as an ordered list of patches.

    Parameters
    ----------
    patches : sequence of ParamPatch
    orientation : {+1, -1}
        Global sign applied to every normal.
    seams : list of (int, str, int, str)
        Identified patch edges.
    fd_order : {2, 4}
        Accuracy order of the finite-difference derivatives.
    """

    def __init__(self, patches, orientation=1, seams=(), fd_order=DEFAULT_ORDER):
        self.patches = tuple(patches)
        if not self.patches:
            raise InvalidParam("an immersion needs at least one patch")
        if orientation not in (1, -1):
            raise InvalidParam("orientation must be +1 or -1")
        if fd_order not in (2, 4):
            raise InvalidParam("fd_order must be 2 or 4")
        need = 4 if fd_order == 2 else 7
        for p in self.patches:
            if min(p.shape) < need:
                raise InvalidParam(f"order-{fd_order} stencils need {need} samples per axis")
        self.orientation = orientation
        self.seams = [tuple(s) for s in seams]
        self.fd_order = fd_order

    def __len__(self):
        return len(self.patches)

    @property
    def n_samples(self):
        return sum(p.shape[0] * p.shape[1] for p in self.patches)

    def points(self):
        return np.concatenate([p.positions.reshape(-1, 3) for p in self.patches])

    def bbox_diagonal(self):
        pts = self.points()
        return float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))

    def with_positions(self, positions):
        """New immersion on the same domain with per-patch positions replaced."""
        patches = [p.with_positions(x) for p, x in zip(self.patches, positions)]
        return SurfaceImmersion(patches, self.orientation, self.seams, self.fd_order)

    def map_points(self, fn):
        """Compose with a map of R^3: returns ``fn o f``."""
        return self.with_positions([fn(p.positions) for p in self.patches])

    def translate(self, t):
        t = np.asarray(t, dtype=float)
        return self.map_points(lambda x: x + t)

    def with_order(self, fd_order):
        return SurfaceImmersion(self.patches, self.orientation, self.seams, fd_order)

    def flipped(self):
        return SurfaceImmersion(self.patches, -self.orientation, self.seams, self.fd_order)

    def same_layout(self, other):
        return (len(self.patches) == len(other.patches)
                and all(a.same_layout(b) for a, b in zip(self.patches, other.patches)))

    def check_seams(self):
        """Largest seam mismatch relative to the bounding-box diagonal.

        Each sample of the shorter edge is matched to its nearest sample on
        the partner edge, so stride-matched seams are accepted.
        """
        diag = self.bbox_diagonal()
        worst = 0.0
        for pa, ea, pb, eb in self.seams:
            a = self.patches[pa].edge_samples(ea)
            b = self.patches[pb].edge_samples(eb)
            if len(a) > len(b):
                a, b = b, a
            d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1).min(axis=1)
            worst = max(worst, float(d.max()))
        return worst / diag if diag > 0 else worst

    def __repr__(self):
        return (f"SurfaceImmersion({len(self.patches)} patches, "
                f"{self.n_samples} samples, orientation={self.orientation:+d})")


class SrnfField:
    """Per-sample 3-vectors over a patch layout, with the layout's quadrature."""

    def __init__(self, values, patches):
        self.values = tuple(_readonly(v) for v in values)
        self.patches = tuple(patches)
        for v, p in zip(self.values, self.patches):
            if v.shape != p.shape + (3,):
                raise GridMismatch("field values do not match the patch grid")
            if not np.all(np.isfinite(v)):
                raise InvalidParam("field values must be finite")

    def _check(self, other):
        if len(self.patches) != len(other.patches) or not all(
                a.same_layout(b) for a, b in zip(self.patches, other.patches)):
            raise GridMismatch("fields live on different patch layouts")

    def __sub__(self, other):
        self._check(other)
        return SrnfField([a - b for a, b in zip(self.values, other.values)], self.patches)

    def __add__(self, other):
        self._check(other)
        return SrnfField([a + b for a, b in zip(self.values, other.values)], self.patches)

    def __neg__(self):
        return SrnfField([-a for a in self.values], self.patches)

    def __mul__(self, scalar):
        return SrnfField([scalar * a for a in self.values], self.patches)

    __rmul__ = __mul__

    def max_abs(self):
        return max(float(np.max(np.abs(v))) for v in self.values)

    def flat(self):
        return np.concatenate([v.reshape(-1, 3) for v in self.values])


@dataclass(frozen=True)
class RigidMotion:
    """x -> R x + t with R proper orthogonal."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        r = np.array(self.rotation, dtype=float)
        t = np.array(self.translation, dtype=float)
        if r.shape != (3, 3) or t.shape != (3,):
            raise NotARotation("rotation must be 3x3 and translation a 3-vector")
        if (np.max(np.abs(r.T @ r - np.eye(3))) > 1e-12
                or abs(np.linalg.det(r) - 1.0) > 1e-12):
            raise NotARotation("rotation is not proper orthogonal")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def random(cls, rng, scale=1.0):
        from scipy.spatial.transform import Rotation
        r = Rotation.random(random_state=rng).as_matrix()
        # re-orthonormalize so the 1e-12 invariant holds exactly
        u, _, vt = np.linalg.svd(r)
        return cls(u @ vt, scale * rng.normal(size=3))

    def __call__(self, x):
        return np.asarray(x) @ self.rotation.T + self.translation

    def apply(self, f: SurfaceImmersion) -> SurfaceImmersion:
        return f.map_points(self)


def _sample_quantities(f, order=None):
    order = f.fd_order if order is None else order
    diag = f.bbox_diagonal()
    floor = 1e-14 * diag**2
    out = []
    for k, p in enumerate(f.patches):
        c = p.cross(order)
        norm = np.linalg.norm(c, axis=-1)
        bad = norm < floor
        if np.any(bad):
            i, j = np.argwhere(bad)[0]
            raise DegenerateImmersion(
                f"degenerate tangent plane at patch {k}, sample ({i}, {j})", k, (i, j))
        out.append((c, norm))
    return out


def area_factors(f: SurfaceImmersion):
    """Per-patch arrays of a = |f_u x f_v| / density."""
    return [norm / p.density for p, (_, norm) in zip(f.patches, _sample_quantities(f))]


def unit_normals(f: SurfaceImmersion):
    return [f.orientation * c / norm[..., None] for c, norm in _sample_quantities(f)]


def area_factor(f: SurfaceImmersion, patch, i, j):
    """Local area multiplication factor at one sample."""
    return float(area_factors(f)[patch][i, j])


def unit_normal(f: SurfaceImmersion, patch, i, j):
    """Oriented unit normal at one sample."""
    return unit_normals(f)[patch][i, j].copy()


def srnf(f: SurfaceImmersion) -> SrnfField:
    """Square root normal field q = sqrt(a) n of every sample."""
    values = []
    for p, (c, norm) in zip(f.patches, _sample_quantities(f)):
        # cross / sqrt|cross| rescaled by the domain metric density
        values.append(f.orientation * c / np.sqrt(norm * p.density)[..., None])
    return SrnfField(values, f.patches)


def translate_invariance_check(f: SurfaceImmersion, t) -> float:
    """Max samplewise change of the SRNF when ``f`` is translated by ``t``."""
    q0 = srnf(f)
    q1 = srnf(f.translate(t))
    return (q1 - q0).max_abs()
