"""L2 structure on SRNF fields, the SRNF pseudometric and its group actions."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RectBivariateSpline
from scipy.spatial import cKDTree

from . import _fd
from ._threads import n_workers
from .exceptions import GridMismatch, InsufficientSamples, InvalidParam, NotARotation, OutOfDomain
from .geom_core import RigidMotion, SrnfField, SurfaceImmersion, srnf

MIN_ALIGN_SAMPLES = 64 * 64


def l2_inner(q1: SrnfField, q2: SrnfField) -> float:
    """L2 inner product with respect to the domain's Riemannian area."""
    q1._check(q2)
    total = 0.0
    for a, b, p in zip(q1.values, q2.values, q1.patches):
        total += float(np.sum(np.einsum("ijk,ijk->ij", a, b) * p.weights * p.density))
    return total


def field_norm(q: SrnfField) -> float:
    return float(np.sqrt(max(l2_inner(q, q), 0.0)))


def surface_area(f: SurfaceImmersion) -> float:
    """Area of f(M) by the patch quadrature (|q|^2 integrates to area)."""
    return sum(float(np.sum(np.linalg.norm(p.cross(f.fd_order), axis=-1) * p.weights))
               for p in f.patches)


def _shared_layout(f1, f2):
    if not f1.same_layout(f2):
        raise GridMismatch("immersions do not share a parameter grid and metric")


def srnf_distance(f1: SurfaceImmersion, f2: SurfaceImmersion) -> float:
    """d(f1, f2) = || srnf(f1) - srnf(f2) ||_L2."""
    _shared_layout(f1, f2)
    return field_norm(srnf(f1) - srnf(f2))


def srnf_max_deviation(f1: SurfaceImmersion, f2: SurfaceImmersion) -> float:
    """Samplewise max |q1 - q2|."""
    _shared_layout(f1, f2)
    return (srnf(f1) - srnf(f2)).max_abs()


class Reparametrization:
    """Sampled orientation-preserving self-map of every patch domain.

    ``maps[k]`` has shape (nu, nv, 2): the image phi(x) of each sample of
    patch k in parameter coordinates.  The area factor b is computed from
    the finite-difference Jacobian of phi and the domain metric density,
    b(x) = det Dphi(x) * density(phi(x)) / density(x).
    """

    def __init__(self, patches, maps, order=4):
        self.patches = tuple(patches)
        self.maps = []
        self.jacobian_det = []
        self.area_factor_b = []
        for p, m in zip(self.patches, maps):
            m = np.array(m, dtype=float)
            if m.shape != p.shape + (2,):
                raise GridMismatch("reparametrization grid does not match patch")
            (u0, u1), (v0, v1) = p.domain
            tol = 1e-9
            if (m[..., 0].min() < u0 - tol or m[..., 0].max() > u1 + tol
                    or m[..., 1].min() < v0 - tol or m[..., 1].max() > v1 + tol):
                raise OutOfDomain("phi leaves the parameter rectangle")
            m[..., 0] = np.clip(m[..., 0], u0, u1)
            m[..., 1] = np.clip(m[..., 1], v0, v1)
            hu, hv = p.spacing
            du = _fd.diff(m, 0, hu, 1, order)
            dv = _fd.diff(m, 1, hv, 1, order)
            det = du[..., 0] * dv[..., 1] - du[..., 1] * dv[..., 0]
            if np.any(det <= 0):
                raise InvalidParam("phi is not orientation preserving")
            dens_phi = _interp_scalar(p, p.density, m)
            self.maps.append(m)
            self.jacobian_det.append(det)
            self.area_factor_b.append(det * dens_phi / p.density)

    @classmethod
    def from_function(cls, patches, fn, order=4):
        """Build from ``fn(k, u, v) -> (u', v')`` evaluated on each patch grid."""
        maps = []
        for k, p in enumerate(patches):
            u, v = p.grid()
            pu, pv = fn(k, u, v)
            maps.append(np.stack([pu, pv], axis=-1))
        return cls(patches, maps, order)

    @classmethod
    def identity(cls, patches):
        return cls.from_function(patches, lambda k, u, v: (u, v))


def _axes(p):
    (u0, u1), (v0, v1) = p.domain
    return np.linspace(u0, u1, p.shape[0]), np.linspace(v0, v1, p.shape[1])


def _interp_scalar(p, values, pts):
    if np.all(values == values.flat[0]):
        return np.full(pts.shape[:-1], values.flat[0])
    u, v = _axes(p)
    spl = RectBivariateSpline(u, v, values, kx=3, ky=3)
    return spl.ev(pts[..., 0], pts[..., 1])


def reparam_act(q: SrnfField, phi: Reparametrization) -> SrnfField:
    """(q * phi)(x) = sqrt(b(x)) q(phi(x)), q evaluated by bicubic splines."""
    if len(phi.patches) != len(q.patches) or not all(
            a.same_layout(b) for a, b in zip(phi.patches, q.patches)):
        raise GridMismatch("reparametrization and field use different layouts")
    out = []
    for vals, p, m, b in zip(q.values, q.patches, phi.maps, phi.area_factor_b):
        u, v = _axes(p)
        comp = [RectBivariateSpline(u, v, vals[..., c], kx=3, ky=3).ev(m[..., 0], m[..., 1])
                for c in range(3)]
        out.append(np.sqrt(b)[..., None] * np.stack(comp, axis=-1))
    return SrnfField(out, q.patches)


def _as_rotation(a):
    if isinstance(a, RigidMotion):
        return a.rotation
    return RigidMotion(np.asarray(a, dtype=float)).rotation


def rotate_field(q: SrnfField, a) -> SrnfField:
    """(A * q)(x) = A q(x) for A in SO(3) (a matrix or a RigidMotion)."""
    r = _as_rotation(a)
    return SrnfField([v @ r.T for v in q.values], q.patches)


@dataclass
class AlignmentReport:
    best_motion: RigidMotion
    rms_residual: float
    congruent: bool
    threshold: float
    iterations: int = 0

    def to_dict(self):
        return {
            "rotation": self.best_motion.rotation.tolist(),
            "translation": self.best_motion.translation.tolist(),
            "rms_residual": self.rms_residual,
            "congruent": self.congruent,
            "threshold": self.threshold,
        }


def kabsch(src, dst):
    """Proper rotation R and translation t minimizing |R src + t - dst|."""
    cs, cd = src.mean(axis=0), dst.mean(axis=0)
    h = (src - cs).T @ (dst - cd)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    u2, _, vt2 = np.linalg.svd(r)
    r = u2 @ vt2
    return r, cd - r @ cs


def _icp(src, tree, target, r, t, max_iter, tol):
    prev = np.inf
    best = (np.inf, r, t)
    it = 0
    for it in range(1, max_iter + 1):
        moved = src @ r.T + t
        dist, idx = tree.query(moved, workers=n_workers())
        rms = float(np.sqrt(np.mean(dist**2)))
        if rms < best[0]:
            best = (rms, r, t)
        if abs(prev - rms) < tol or rms == 0.0:
            break
        prev = rms
        r, t = kabsch(src, target[idx])
    return best, it


def certify_noncongruent(f1: SurfaceImmersion, f2: SurfaceImmersion, threshold=None,
                         max_iter=50, tol=1e-8, max_points=20000) -> AlignmentReport:
    """Best rigid fit of f2's samples onto f1's sample cloud.

    Kabsch on the shared-grid correspondence seeds an ICP loop (nearest
    neighbours in f1's cloud); the identity seeds a second one.  The pair
    is reported congruent when the best rms residual is at most
    ``threshold`` (default 1e-3 of f1's bounding-box diagonal).  At most
    ``max_points`` evenly strided samples of f2 enter the fit; f1's cloud
    is always used in full.
    """
    for f in (f1, f2):
        if any(p.shape[0] * p.shape[1] < MIN_ALIGN_SAMPLES for p in f.patches):
            raise InsufficientSamples("alignment needs at least 64 x 64 samples per patch")
    target = f1.points()
    src = f2.points()
    diag = f1.bbox_diagonal()
    if threshold is None:
        threshold = 1e-3 * diag
    # unbalanced, non-compact trees build and query much faster on grid-like clouds
    tree = cKDTree(target, balanced_tree=False, compact_nodes=False)
    seeds = [(np.eye(3), np.zeros(3))]
    pick = np.unique(np.linspace(0, len(src) - 1, min(len(src), max_points)).astype(int))
    if len(src) == len(target):
        seeds.insert(0, kabsch(src[pick], target[pick]))
    src = src[pick]
    best, iters = (np.inf, None, None), 0
    for r, t in seeds:
        cand, it = _icp(src, tree, target, r, t, max(max_iter, 10), tol)
        iters += it
        if cand[0] < best[0]:
            best = cand
    rms, r, t = best
    motion = RigidMotion(r, t)
    return AlignmentReport(motion, rms, bool(rms <= threshold), float(threshold), iters)
