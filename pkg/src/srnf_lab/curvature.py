"""Second-derivative quantities and the rigidity/uniqueness probes.

The probes are numerical evidence on a fixed battery of surfaces, not
proofs: they compute the SRNF distance to a reference and, when it is
(numerically) zero, check that the two immersions differ by a translation.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import _fd
from .exceptions import GridMismatch, NotClosed, NotConvex
from .geom_core import SurfaceImmersion
from .shape_metric import srnf_distance


@dataclass
class CurvatureField:
    K: list
    H: list
    shape_operator_ok: list

    def flat_K(self):
        return np.concatenate([k.ravel() for k in self.K])

    def flat_H(self):
        return np.concatenate([h.ravel() for h in self.H])


def _fundamental_forms(p, order, orientation):
    fu, fv = p.tangents(order)
    fuu, fuv, fvv = p.second_derivatives(order)
    c = p.cross(order)
    cn = np.linalg.norm(c, axis=-1)
    n = orientation * c / cn[..., None]
    e = np.einsum("ijk,ijk->ij", fu, fu)
    f_ = np.einsum("ijk,ijk->ij", fu, fv)
    g = np.einsum("ijk,ijk->ij", fv, fv)
    l_ = np.einsum("ijk,ijk->ij", fuu, n)
    m = np.einsum("ijk,ijk->ij", fuv, n)
    nn = np.einsum("ijk,ijk->ij", fvv, n)
    return e, f_, g, l_, m, nn


def gaussian_curvature(f: SurfaceImmersion, order=None) -> CurvatureField:
    """K = det II / det I and H = tr(I^-1 II) / 2 at every sample."""
    order = f.fd_order if order is None else order
    ks, hs, oks = [], [], []
    for p in f.patches:
        e, f_, g, l_, m, n = _fundamental_forms(p, order, f.orientation)
        det1 = e * g - f_**2
        k = (l_ * n - m**2) / det1
        h = (e * n - 2 * f_ * m + g * l_) / (2 * det1)
        ks.append(k)
        hs.append(h)
        oks.append(np.isfinite(k) & np.isfinite(h) & (det1 > 0))
    return CurvatureField(ks, hs, oks)


def principal_curvatures(f: SurfaceImmersion, order=None):
    """Per-patch (k_min, k_max) arrays."""
    cf = gaussian_curvature(f, order)
    out = []
    for k, h in zip(cf.K, cf.H):
        disc = np.sqrt(np.maximum(h**2 - k, 0.0))
        out.append((h - disc, h + disc))
    return out


def gauss_map_area_factor(f: SurfaceImmersion, order=None):
    """Area factor of x -> n(x) relative to f's area: |n_u x n_v| / |f_u x f_v|."""
    order = f.fd_order if order is None else order
    out = []
    for p in f.patches:
        c = p.cross(order)
        cn = np.linalg.norm(c, axis=-1)
        n = c / cn[..., None]
        hu, hv = p.spacing
        nu = _fd.diff(n, 0, hu, 1, order, p.periodic[0])
        nv = _fd.diff(n, 1, hv, 1, order, p.periodic[1])
        out.append(np.linalg.norm(np.cross(nu, nv), axis=-1) / cn)
    return out


def is_closed(f: SurfaceImmersion) -> bool:
    return all(tag != "free" for p in f.patches for tag in p.boundary_tags.values())


def total_curvature(f: SurfaceImmersion, order=None) -> float:
    order = f.fd_order if order is None else order
    cf = gaussian_curvature(f, order)
    return sum(float(np.sum(k * np.linalg.norm(p.cross(order), axis=-1) * p.weights))
               for k, p in zip(cf.K, f.patches))


def gauss_bonnet_check(f: SurfaceImmersion, order=None) -> float:
    """Integral of K dA over a closed surface (4 pi (1 - genus) in theory)."""
    if not is_closed(f):
        raise NotClosed("every patch edge must be seam-tagged")
    return total_curvature(f, order)


def curvature_signature_distance(f1, f2, bins=64, order=None):
    """Area-weighted L1 distance between principal-curvature histograms.

    Rigid motions and reparametrizations leave the histogram unchanged, so
    a value well above the noise floor certifies non-equivalence.
    """
    def hist(f):
        o = f.fd_order if order is None else order
        vals, wts = [], []
        for (k1, k2), p in zip(principal_curvatures(f, o), f.patches):
            area = np.linalg.norm(p.cross(o), axis=-1) * p.weights
            vals.append(np.stack([k1.ravel(), k2.ravel()], axis=1))
            wts.append(area.ravel())
        return np.concatenate(vals), np.concatenate(wts)

    v1, w1 = hist(f1)
    v2, w2 = hist(f2)
    lo = min(v1.min(), v2.min()) - 1e-9
    hi = max(v1.max(), v2.max()) + 1e-9
    edges = np.linspace(lo, hi, bins + 1)
    h1, _, _ = np.histogram2d(v1[:, 0], v1[:, 1], bins=[edges, edges], weights=w1)
    h2, _, _ = np.histogram2d(v2[:, 0], v2[:, 1], bins=[edges, edges], weights=w2)
    return float(np.abs(h1 / w1.sum() - h2 / w2.sum()).sum())


def _translate_residual(f1, f2):
    d = f2.points() - f1.points()
    t = d.mean(axis=0)
    return float(np.max(np.linalg.norm(d - t, axis=1))), t


@dataclass
class ProbeReport:
    claim: str
    distance: float
    translate_residual: float | None
    diagonal: float
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def sphere_rigidity_probe(f: SurfaceImmersion, floor=1e-8) -> ProbeReport:
    """Compare ``f`` against the unit sphere on f's own cubed-sphere grid.

    When d(Id, f) <= floor, f must be a translate of Id; otherwise d > floor
    is the (expected) distinguishing evidence.  ``passed`` is False only
    for a near-zero distance that is not a translation.
    """
    from .surfaces import unit_sphere

    ref = unit_sphere(f.patches[0].shape[0], f.fd_order)
    if not ref.same_layout(f):
        raise GridMismatch("f must live on the unit sphere's cubed grid")
    d = srnf_distance(ref, f)
    res, t = _translate_residual(ref, f)
    if d <= floor:
        passed = res <= 1e-10 * max(ref.bbox_diagonal(), 1.0)
    else:
        passed = True
    return ProbeReport("sphere_rigidity", d, res, ref.bbox_diagonal(), bool(passed),
                       {"floor": floor, "mean_translation": t.tolist(), "is_translate": bool(d <= floor and passed)})


def convexity_check(f: SurfaceImmersion, order=None):
    """Strict convexity: K > 1e-8 / diag^2 everywhere and Gauss-map degree 1."""
    cf = gaussian_curvature(f, order)
    diag = f.bbox_diagonal()
    k_min = float(cf.flat_K().min())
    degree = total_curvature(f, order) / (4 * np.pi)
    return k_min > 1e-8 / diag**2 and abs(degree - 1.0) < 0.05, k_min, degree


def _k_discrepancy(f1, f2, order=None):
    # compare K at samples with (nearly) the same unit normal
    from .geom_core import unit_normals

    n1 = np.concatenate([n.reshape(-1, 3) for n in unit_normals(f1)])
    n2 = np.concatenate([n.reshape(-1, 3) for n in unit_normals(f2)])
    k1 = gaussian_curvature(f1, order).flat_K()
    k2 = gaussian_curvature(f2, order).flat_K()
    _, idx = cKDTree(n2).query(n1)
    return float(np.max(np.abs(k1 - k2[idx])))


def convex_uniqueness_probe(f1: SurfaceImmersion, f2: SurfaceImmersion, tol=1e-8,
                            order=None) -> ProbeReport:
    """Same SRNF and strictly convex => translates; else report a K witness."""
    for name, f in (("f1", f1), ("f2", f2)):
        ok, k_min, degree = convexity_check(f, order)
        if not ok:
            raise NotConvex(f"{name} is not strictly convex (min K={k_min:.3g}, degree={degree:.4f})")
    d = srnf_distance(f1, f2)
    diag = f1.bbox_diagonal()
    if d <= tol:
        res, t = _translate_residual(f1, f2)
        return ProbeReport("convex_uniqueness", d, res, diag, bool(res <= 1e-6 * diag),
                           {"mean_translation": t.tolist(), "tol": tol})
    witness = _k_discrepancy(f1, f2, order)
    return ProbeReport("convex_uniqueness", d, None, diag, bool(witness > 0),
                       {"k_discrepancy": witness, "tol": tol})
