"""Surface pairs with equal square root normal fields that are not congruent.

Four families are generated on shared parameter grids:

* a unit cylinder and its image under L(x, y, z) = (r x, r y, z / r);
* graphs B(x, y) = (x / a, y / b, x^2 / a + y^2 / b), whose SRNF depends on ab only;
* the "chessboard" closed surface: a flat disc with holes, one bump cap
  glued into every hole and a rolled-under base M0.  The second immersion
  moves every cap by a planar translation and fills the flat place with an
  area-preserving diffeomorphism built by :mod:`srnf_lab.moser`;
* the "flip": a flat annulus between a base and one asymmetric cap; the
  second immersion twists the annulus by an angle that runs from pi to 0
  and maps the cap by x -> -x.

Closed surfaces are assembled from tensor patches: disc O-grids (a centre
square plus four square-to-circle blends), blocks of a square chessboard
grid over the flat place, and one periodic patch of revolution for the
rolled edge.  Patch edges that meet are sampled at the same points, so
seams match exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.spatial import cKDTree

from ._smooth import bump_profile, smoothstep, smoothstep_deriv
from .exceptions import InvalidParam, ProfileInvalid
from .flat_place import Circle, FlatPlace
from .geom_core import DEFAULT_ORDER, ParamPatch, SurfaceImmersion
from .moser import HoledDiscDomain, MoserCertificate, flat_place_diffeo

SEAM_TAGS = {e: "seam" for e in ("u0", "u1", "v0", "v1")}
UNIT = ((0.0, 1.0), (0.0, 1.0))


# --- open surfaces ------------------------------------------------------------

def _with_reference_density(dom, ref, img, order, periodic=(False, False), tags=None):
    # the domain metric is the one induced by the reference immersion
    p_ref = ParamPatch(dom, ref, periodic=periodic)
    dens = np.linalg.norm(p_ref.cross(order), axis=-1)
    return (ParamPatch(dom, ref, density=dens, periodic=periodic, boundary_tags=tags),
            ParamPatch(dom, img, density=dens, periodic=periodic, boundary_tags=tags))


def gen_cylinder_pair(r=2.0, nu=129, nv=129, fd_order=DEFAULT_ORDER):
    """Id on the unit cylinder 0 <= z <= 1 and L o Id.

    The angle axis (u) is periodic.  Both immersions use the metric induced
    by Id, so their area factors are 1.
    """
    if not r > 0:
        raise InvalidParam("cylinder scale r must be positive")
    theta = np.linspace(0.0, 2 * np.pi, nu)
    z = np.linspace(0.0, 1.0, nv)
    th, zz = np.meshgrid(theta, z, indexing="ij")
    ref = np.stack([np.cos(th), np.sin(th), zz], axis=-1)
    img = np.stack([r * np.cos(th), r * np.sin(th), zz / r], axis=-1)
    dom = ((0.0, 2 * np.pi), (0.0, 1.0))
    a, b = _with_reference_density(dom, ref, img, fd_order, periodic=(True, False))
    return SurfaceImmersion([a], fd_order=fd_order), SurfaceImmersion([b], fd_order=fd_order)


def paraboloid_positions(a, b, x, y):
    return np.stack([x / a, y / b, x**2 / a + y**2 / b], axis=-1)


def gen_paraboloid(a, b, box=((-1.0, 1.0), (-1.0, 1.0)), nu=129, nv=129,
                   fd_order=DEFAULT_ORDER):
    """B(x, y) = (x/a, y/b, x^2/a + y^2/b) sampled on ``box`` (flat domain metric)."""
    if a == 0 or b == 0 or not np.isfinite(a * b):
        raise InvalidParam("a and b must be finite and nonzero")
    (x0, x1), (y0, y1) = box
    x, y = np.meshgrid(np.linspace(x0, x1, nu), np.linspace(y0, y1, nv), indexing="ij")
    patch = ParamPatch(box, paraboloid_positions(a, b, x, y))
    return SurfaceImmersion([patch], fd_order=fd_order)


def paraboloid_cross(a, b, x, y):
    """Exact B_x x B_y = (-2x/(ab), -2y/(ab), 1/(ab))."""
    ab = a * b
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    return np.stack([-2 * x / ab, -2 * y / ab, np.full_like(x, 1 / ab)], axis=-1)


# --- building blocks for closed surfaces ----------------------------------------

def _rot(k):
    c, s = np.cos(k * np.pi / 2), np.sin(k * np.pi / 2)
    return np.array([[c, -s], [s, c]])


def _square_side(center, half, t, k):
    # side k (0 = east, counter-clockwise) of the square, t in [0, 1]
    pts = np.stack([np.full_like(t, half), half * (2 * t - 1)], axis=-1)
    return np.asarray(center) + pts @ _rot(k).T


def _arc(center, radius, t, k):
    a = -np.pi / 4 + t * np.pi / 2 + k * np.pi / 2
    return np.asarray(center) + radius * np.stack([np.cos(a), np.sin(a)], axis=-1)


def _blend(inner, outer, n_rad):
    # u runs inner -> outer, v along the curves; u x v is then +z
    s = np.linspace(0.0, 1.0, n_rad)[:, None, None]
    return (1 - s) * inner[None] + s * outer[None]


def disc_ogrid(center, radius, n_ang, n_rad, inner_frac=0.5):
    """Planar samples of a disc: centre square, then east/north/west/south blends."""
    t = np.linspace(0.0, 1.0, n_ang)
    half = inner_frac * radius / np.sqrt(2)
    xs = center[0] + np.linspace(-half, half, n_ang)
    ys = center[1] + np.linspace(-half, half, n_ang)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    out = [np.stack([gx, gy], axis=-1)]
    for k in range(4):
        out.append(_blend(_square_side(center, half, t, k), _arc(center, radius, t, k), n_rad))
    return out


def hole_block(center, half, radius, n):
    """Four blends from a hole circle out to the square block around it."""
    t = np.linspace(0.0, 1.0, n)
    return [_blend(_arc(center, radius, t, k), _square_side(center, half, t, k), n)
            for k in range(4)]


def _lift(xy, z=0.0):
    z = np.broadcast_to(z, xy.shape[:-1])
    return np.concatenate([xy, z[..., None]], axis=-1)


@dataclass(frozen=True)
class BumpCap:
    """Graph cap z = height * e * bump(|p - p0| / (fraction * r)) over a hole of radius r.

    ``offset`` (in units of r) moves the bump centre p0 off the hole
    centre, which makes the cap asymmetric.  The cap is exactly flat on the
    ring ``fraction * r + |offset| * r <= |p - c| <= r``.
    """

    height: float = 0.2
    fraction: float = 0.6
    offset: tuple = (0.0, 0.0)

    def validate(self):
        reach = self.fraction + float(np.hypot(*self.offset))
        if not (0 < self.fraction and reach < 0.95):
            raise ProfileInvalid(f"cap support reaches {reach:.3f} of the hole radius (max 0.95)")

    def __call__(self, xy, center, radius):
        p0 = np.asarray(center) + radius * np.asarray(self.offset, float)
        rho = np.linalg.norm(xy - p0, axis=-1)
        return bump_profile(rho, self.fraction * radius, self.height)


@dataclass(frozen=True)
class RolledEdge:
    """Base M0: the plane rolls under along a profile whose tangent turns by pi.

    The profile tangent angle is pi * S(s) for the C-infinity step S, so the
    edge meets the flat place and the bottom disc with all derivatives
    matching.  ``length`` is the arclength of the profile.
    """

    length: float = 0.6

    def profile(self, s):
        """(d rho, z) offsets along the profile at parameters s in [0, 1]."""
        s = np.atleast_1d(np.asarray(s, float))
        cos_int = np.array([quad(lambda x: np.cos(np.pi * smoothstep(x)), 0, v,
                                 epsabs=1e-13, epsrel=1e-13, limit=200)[0] for v in s])
        sin_int = np.array([quad(lambda x: np.sin(np.pi * smoothstep(x)), 0, v,
                                 epsabs=1e-13, epsrel=1e-13, limit=200)[0] for v in s])
        return self.length * cos_int, -self.length * sin_int

    @property
    def depth(self):
        return float(-self.profile([1.0])[1][0])


def find_seams(patches, tol):
    """Pairs of patch edges whose samples coincide (shorter edge within tol of longer)."""
    edges = []
    for k, p in enumerate(patches):
        for name in ("u0", "u1", "v0", "v1"):
            if p.boundary_tags.get(name) == "periodic":
                continue
            e = p.edge_samples(name)
            edges.append((k, name, e, e.min(axis=0) - tol, e.max(axis=0) + tol))
    seams = []
    for i, (ka, na, ea, lo_a, hi_a) in enumerate(edges):
        for kb, nb, eb, lo_b, hi_b in edges[i + 1:]:
            if np.any(hi_a < lo_b) or np.any(hi_b < lo_a):
                continue
            short, long_ = (ea, eb) if len(ea) <= len(eb) else (eb, ea)
            d, _ = cKDTree(long_).query(short)
            if d.max() <= tol and _spans(short, long_, tol):
                seams.append((ka, na, kb, nb))
    return seams


def _spans(short, long_, tol):
    # a seam, not a shared corner: the short edge has positive length
    return np.linalg.norm(short[-1] - short[0]) > 10 * tol or len(short) > 2


def _assemble(parts, fd_order):
    """Patches, seams and the name -> patch indices map for named position arrays."""
    patches, index = [], {}
    for name, arrays in parts:
        index[name] = []
        for x in arrays:
            index[name].append(len(patches))
            patches.append(_closed_patch(x))
    diag = float(np.linalg.norm(np.ptp(np.concatenate([p.positions.reshape(-1, 3) for p in patches]), axis=0)))
    seams = find_seams(patches, 1e-9 * diag)
    return patches, seams, index


def _closed_patch(x, periodic=(False, False)):
    if x.shape[1] > 1 and np.allclose(x[:, 0], x[:, -1], atol=1e-13):
        periodic = (False, True)
    tags = dict(SEAM_TAGS)
    if periodic[1]:
        tags.pop("v0"), tags.pop("v1")
    return ParamPatch(UNIT, x, periodic=periodic, boundary_tags=tags)


def _reference_surface(patches, seams, fd_order):
    dens = [np.linalg.norm(p.cross(fd_order), axis=-1) for p in patches]
    ref = [ParamPatch(p.domain, p.positions, density=d, periodic=p.periodic,
                      boundary_tags=p.boundary_tags, name=p.name) for p, d in zip(patches, dens)]
    return SurfaceImmersion(ref, seams=seams, fd_order=fd_order)


def _base_parts(center, radius, n_ang, n_rad, base: RolledEdge, n_profile):
    """Rolled edge (periodic in angle) and the downward-facing bottom disc."""
    s = np.linspace(0.0, 1.0, n_profile)
    d_rho, z = base.profile(s)
    theta = np.linspace(-np.pi / 4, 7 * np.pi / 4, 4 * (n_ang - 1) + 1)
    rho = radius + d_rho
    edge = np.stack([center[0] + rho[:, None] * np.cos(theta)[None],
                     center[1] + rho[:, None] * np.sin(theta)[None],
                     np.broadcast_to(z[:, None], (len(s), len(theta)))], axis=-1)
    edge[:, -1] = edge[:, 0]
    bottom = [_lift(x, z[-1])[:, ::-1] for x in disc_ogrid(center, radius, n_ang, n_rad)]
    return [edge], bottom


def _cap_parts(circle: Circle, cap: BumpCap, n):
    xy = disc_ogrid(circle.c, circle.radius, n, n)
    return [_lift(x, cap(x, circle.c, circle.radius)) for x in xy]


# --- chessboard -------------------------------------------------------------------

SQUARE_FRACTION = 0.6


def chessboard_grid(flat: FlatPlace, max_k=8):
    """Smallest k such that every hole sits at the centre of a k x k block grid.

    The grid covers the square of half-width 0.6 R0 about the outer centre;
    each hole must also fit inside its block with a margin (radius at most
    0.8 of the half block width).
    """
    a = SQUARE_FRACTION * flat.outer.radius
    for k in range(1, max_k + 1):
        w = 2 * a / k
        ok = True
        cells = []
        for c in flat.inner:
            idx = (c.c - flat.outer.c + a) / w - 0.5
            j = np.round(idx)
            if (np.any(np.abs(idx - j) > 1e-9) or np.any(j < 0) or np.any(j >= k)
                    or c.radius > 0.8 * w / 2):
                ok = False
                break
            cells.append((int(j[0]), int(j[1])))
        if ok and len(set(cells)) == len(cells):
            return a, k, cells
    raise InvalidParam("hole centres must sit on the block centres of a k x k chessboard "
                       f"(k <= {max_k}) over the square of half-width {a:g}")


def _flat_parts(flat: FlatPlace, nb):
    a, k, cells = chessboard_grid(flat)
    w = 2 * a / k
    c0 = flat.outer.c
    holes = dict(zip(cells, flat.inner))
    blocks = []
    for i in range(k):
        for j in range(k):
            lo = c0 - a + w * np.array([i, j])
            if (i, j) in holes:
                blocks.extend(hole_block(lo + w / 2, w / 2, holes[(i, j)].radius, nb))
            else:
                gx, gy = np.meshgrid(np.linspace(lo[0], lo[0] + w, nb),
                                     np.linspace(lo[1], lo[1] + w, nb), indexing="ij")
                blocks.append(np.stack([gx, gy], axis=-1))
    n_side = k * (nb - 1) + 1
    t = np.linspace(0.0, 1.0, n_side)
    ring = [_blend(_square_side(c0, a, t, s), _arc(c0, flat.outer.radius, t, s), nb)
            for s in range(4)]
    return blocks + ring, n_side


@dataclass
class ChessboardSurface:
    """Closed surface M = M0 u D u M1 u ... u Mn around a flat place D.

    ``parts`` maps "D", "M0" and "M1".."Mn" to patch indices of
    ``assembly``.
    """

    flat: FlatPlace
    caps: tuple
    base: RolledEdge
    assembly: SurfaceImmersion
    parts: dict

    @classmethod
    def build(cls, flat: FlatPlace, caps=None, base=None, nb=65, n_profile=129,
              cap_refine=2, fd_order=DEFAULT_ORDER):
        caps = tuple(caps) if caps is not None else tuple(BumpCap() for _ in flat.inner)
        if len(caps) != flat.n:
            raise InvalidParam("need one cap per inner circle")
        for cap in caps:
            cap.validate()
        base = base or RolledEdge()
        d_xy, n_side = _flat_parts(flat, nb)
        edge, bottom = _base_parts(flat.outer.c, flat.outer.radius, n_side, nb, base, n_profile)
        named = [("D", [_lift(x) for x in d_xy]), ("M0", edge + bottom)]
        for i, (circle, cap) in enumerate(zip(flat.inner, caps)):
            named.append((f"M{i + 1}", _cap_parts(circle, cap, cap_refine * (nb - 1) + 1)))
        patches, seams, index = _assemble(named, fd_order)
        return cls(flat, caps, base, _reference_surface(patches, seams, fd_order), index)


@dataclass
class ChessboardResult:
    surface: ChessboardSurface
    identity: SurfaceImmersion
    mapped: SurfaceImmersion
    certificate: MoserCertificate | None
    diffeo: object = None
    translations: list = field(default_factory=list)


def build_chessboard(flat: FlatPlace, caps=None, rearrangement=None, base=None, nb=129,
                     mesh_h=0.04, collar_width=0.05, waypoints=None, n_steps=64,
                     fd_order=DEFAULT_ORDER) -> ChessboardResult:
    """Id and f on the chessboard surface, with the Moser certificate.

    f is the identity on M0, the translation T_i on M_i and the
    area-preserving rearrangement on D.
    """
    rearrangement = [(0.0, 0.0)] * flat.n if rearrangement is None else rearrangement
    translations = [np.asarray(t, dtype=float) for t in rearrangement]
    if len(translations) != flat.n:
        raise InvalidParam("need one translation per inner circle")
    flat.translated(translations)  # raises Overlap for colliding targets
    surf = ChessboardSurface.build(flat, caps, base, nb, fd_order=fd_order)
    ident = surf.assembly
    if all(np.all(t == 0) for t in translations):
        return ChessboardResult(surf, ident, ident, None, None, translations)
    domain = HoledDiscDomain(flat, h=mesh_h, collar_width=collar_width)
    diffeo, cert = flat_place_diffeo(domain, translations, waypoints=waypoints, n_steps=n_steps)
    big, small = diffeo.parts
    planar = big.compose(small.resampled())

    positions = [p.positions for p in ident.patches]
    out = list(positions)
    for k in surf.parts["D"]:
        x = positions[k]
        xy = planar(x[..., :2].reshape(-1, 2)).reshape(x.shape[:-1] + (2,))
        out[k] = _lift(xy, x[..., 2])
    for i, t in enumerate(translations):
        shift = np.array([t[0], t[1], 0.0])
        for k in surf.parts[f"M{i + 1}"]:
            out[k] = positions[k] + shift
    mapped = ident.with_positions(out)
    return ChessboardResult(surf, ident, mapped, cert, diffeo, translations)


def gen_chessboard(flat: FlatPlace, caps=None, rearrangement=None, **kwargs):
    """(Id, f) on the chessboard surface; see :func:`build_chessboard`."""
    res = build_chessboard(flat, caps, rearrangement, **kwargs)
    return res.identity, res.mapped


def single_hole_layout():
    """One hole of radius 0.2 moved by (0.3, 0) inside the unit disc."""
    flat = FlatPlace(Circle((0.0, 0.0), 1.0), (Circle((-0.3, 0.3), 0.2),))
    return flat, (BumpCap(0.2),), [(0.3, 0.0)]


def two_hole_layout():
    """Two chess pieces of different sizes, each advancing one diagonal step towards the other."""
    flat = FlatPlace(Circle((0.0, 0.0), 1.0),
                     (Circle((-0.3, 0.3), 0.12), Circle((0.3, -0.3), 0.1)))
    caps = (BumpCap(0.1), BumpCap(0.08, 0.5, (0.2, 0.1)))
    return flat, caps, [(0.1, -0.1), (-0.1, 0.1)]


# --- flip -------------------------------------------------------------------------

@dataclass(frozen=True)
class TwistProfile:
    """theta(rho) = pi * (1 - S((rho - lo) / (hi - lo))): pi near the inner circle, 0 near the outer."""

    lo: float = 1.05
    hi: float = 1.95

    def __call__(self, rho):
        return np.pi * (1.0 - smoothstep((np.asarray(rho, float) - self.lo) / (self.hi - self.lo)))

    def deriv(self, rho):
        return -np.pi * smoothstep_deriv((np.asarray(rho, float) - self.lo) / (self.hi - self.lo)) / (self.hi - self.lo)


def check_twist(theta, inner=1.0, outer=2.0, tol=1e-10, h=1e-4, inner_value=np.pi):
    """ProfileInvalid unless theta = inner_value at the inner and 0 at the outer circle, flat at both."""
    ends = np.array([inner, outer])
    vals = np.asarray(theta(ends), float)
    if abs(vals[0] - inner_value) > tol or abs(vals[1]) > tol:
        raise ProfileInvalid(f"twist must run from {inner_value:.12g} to 0, "
                             f"got {vals[0]:.12g} and {vals[1]:.12g}")
    inside = np.array([inner + h, outer - h])
    slope = np.abs(np.asarray(theta(inside), float) - vals) / h
    if np.any(slope > tol / h):
        raise ProfileInvalid("twist must be flat at both boundary circles")


def twist_map(theta, xy):
    """(rho, phi) -> (rho, phi + theta(rho)) in Cartesian coordinates."""
    xy = np.asarray(xy, float)
    rho = np.linalg.norm(xy, axis=-1)
    c, s = np.cos(theta(rho)), np.sin(theta(rho))
    return np.stack([c * xy[..., 0] - s * xy[..., 1], s * xy[..., 0] + c * xy[..., 1]], axis=-1)


def twist_jacobian(profile: TwistProfile, xy):
    """Closed-form Jacobian of :func:`twist_map`, shape (..., 2, 2)."""
    xy = np.asarray(xy, float)
    rho = np.linalg.norm(xy, axis=-1)
    th, dth = profile(rho), profile.deriv(rho)
    c, s = np.cos(th), np.sin(th)
    rot = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)
    # d/dx_j of R(theta(rho)) x adds R' x (theta' x_j / rho)
    rx = np.stack([-s * xy[..., 0] - c * xy[..., 1], c * xy[..., 0] - s * xy[..., 1]], -1)
    grad_rho = xy / rho[..., None]
    return rot + (dth[..., None, None] * rx[..., :, None] * grad_rho[..., None, :])


@dataclass
class FlipResult:
    identity: SurfaceImmersion
    mapped: SurfaceImmersion
    parts: dict
    twist: object


def build_flip(twist=None, cap=None, base=None, nb=129, n_radial=257, n_profile=129,
               invert_cap=True, fd_order=DEFAULT_ORDER) -> FlipResult:
    """Flip example on the annulus 1 <= rho <= 2.

    Id and f agree on the base M0; on the annulus f rotates each circle by
    theta(rho); on the cap M1 (over the unit disc) f is x -> -x.  With
    ``invert_cap=False`` the cap is left fixed and theta must vanish at
    both circles.
    """
    twist = TwistProfile() if twist is None else twist
    check_twist(twist, inner_value=np.pi if invert_cap else 0.0)
    cap = BumpCap(0.15, 0.5, (0.25, 0.15)) if cap is None else cap
    cap.validate()
    base = base or RolledEdge()
    inner, outer = Circle((0.0, 0.0), 1.0), Circle((0.0, 0.0), 2.0)
    n_phi = 4 * (nb - 1) + 1
    rho = np.linspace(1.0, 2.0, n_radial)
    phi = np.linspace(-np.pi / 4, 7 * np.pi / 4, n_phi)
    rr, pp = np.meshgrid(rho, phi, indexing="ij")
    ann = np.stack([rr * np.cos(pp), rr * np.sin(pp)], axis=-1)
    ann[:, -1] = ann[:, 0]
    edge, bottom = _base_parts(outer.c, outer.radius, nb, nb, base, n_profile)
    named = [("D", [_lift(ann)]), ("M0", edge + bottom), ("M1", _cap_parts(inner, cap, nb))]
    patches, seams, index = _assemble(named, fd_order)
    ident = _reference_surface(patches, seams, fd_order)
    out = [p.positions for p in ident.patches]
    k = index["D"][0]
    out[k] = _lift(twist_map(twist, out[k][..., :2]))
    if invert_cap:
        for k in index["M1"]:
            out[k] = -out[k]
    return FlipResult(ident, ident.with_positions(out), index, twist)


def gen_flip(twist=None, cap=None, base=None, **kwargs):
    """(Id, f) for the flip example; see :func:`build_flip`."""
    res = build_flip(twist, cap, base, **kwargs)
    return res.identity, res.mapped
