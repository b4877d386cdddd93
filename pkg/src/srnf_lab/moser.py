"""Area-preserving rearrangement of the holes of a flat place.

The pipeline follows Moser's argument on a planar holed disc M:

1. ``initial_rearrangement_diffeo`` builds a diffeomorphism F that is the
   identity near the outer circle and a translation T_i near hole i.  It
   is a composition of time-1 flows of Hamiltonian "tube" fields (a
   constant field on a disc that travels with one hole, cut off radially
   around it and flattened near the other holes and the outer collar),
   so F is area preserving up to integration error.  Its
   Jacobian comes from the variational equation, not from differences.
2. ``pullback_density`` gives rho_1 = rho o F * det DF.
3. ``solve_potential`` solves Laplace(u) = rho_1 - rho_0 with zero Neumann
   data (P1 finite elements); the 1-form psi = -u_y dx + u_x dy then has
   d psi = (rho_1 - rho_0) dx ^ dy.
4. ``transport_field`` sets eta_t = -grad(u) / rho_t, the solution of
   i_eta omega_t = -psi for omega_t = rho_t dx ^ dy, cut off on the collars.
5. ``integrate_flow`` integrates eta_t with classical RK4 to get f_1.
6. ``flat_place_diffeo`` returns F o f_1 with a certificate.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _mesh
from ._smooth import smoothstep, smoothstep_jet
from .exceptions import (DegenerateInterpolation, IncompatibleData, InvalidParam, MoserError,
                         NonPositiveJacobian, Overlap, RoutingFailed, SolverFailure, StepUnstable)
from .flat_place import FlatPlace

MIN_ANGLE_DEG = 15.0


class HoledDiscDomain:
    """Triangulated flat place with collar neighbourhoods of its boundary.

    Parameters
    ----------
    flat : FlatPlace
    h : float
        Target edge length of the triangulation.
    collar_width : float
        Width of the pinned neighbourhood of every boundary circle.
    """

    def __init__(self, flat: FlatPlace, h=0.04, collar_width=0.05, _mesh_data=None):
        self.flat = flat
        self.h = float(h)
        self.collar_width = float(collar_width)
        if 2 * self.collar_width >= flat.clearance:
            raise Overlap("collars of neighbouring boundary circles intersect")
        if _mesh_data is None:
            _mesh_data = _mesh.triangulate(flat, self.h)
        self.nodes, self.tris, self.owner = _mesh_data
        self.min_angle = _mesh.min_angle_deg(self.nodes, self.tris)
        if self.min_angle < MIN_ANGLE_DEG:
            raise InvalidParam(f"triangulation has a {self.min_angle:.1f} degree angle")
        p = self.nodes
        t = self.tris
        e1 = p[t[:, 1]] - p[t[:, 0]]
        e2 = p[t[:, 2]] - p[t[:, 0]]
        self.areas = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        if np.any(self.areas <= 0):
            raise InvalidParam("triangulation has non-positive areas")
        self.dist = flat.boundary_distances(p)
        self.collar_mask = self.dist.min(axis=1) <= self.collar_width
        self._grads = None
        self._mass = None
        self._stiff = None
        self._finder = None

    @property
    def n_nodes(self):
        return len(self.nodes)

    def refined(self):
        """Uniformly refined copy (each triangle split in four)."""
        data = _mesh.refine(self.flat, self.nodes, self.tris, self.owner)
        return HoledDiscDomain(self.flat, self.h / 2, self.collar_width, data)

    def basis_gradients(self):
        """Gradients of the three P1 hat functions on every triangle, (T, 3, 2)."""
        if self._grads is None:
            p, t = self.nodes, self.tris
            x, y = p[t, 0], p[t, 1]
            g = np.empty((len(t), 3, 2))
            for i in range(3):
                j, k = (i + 1) % 3, (i + 2) % 3
                g[:, i, 0] = (y[:, j] - y[:, k]) / (2 * self.areas)
                g[:, i, 1] = (x[:, k] - x[:, j]) / (2 * self.areas)
            self._grads = g
        return self._grads

    def stiffness(self):
        if self._stiff is None:
            g = self.basis_gradients()
            local = np.einsum("tid,tjd->tij", g, g) * self.areas[:, None, None]
            self._stiff = self._assemble(local)
        return self._stiff

    def mass(self):
        if self._mass is None:
            ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
            self._mass = self._assemble(ref[None] * self.areas[:, None, None])
        return self._mass

    def _assemble(self, local):
        t = self.tris
        rows = np.repeat(t, 3, axis=1).ravel()
        cols = np.tile(t, (1, 3)).ravel()
        n = self.n_nodes
        return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))

    def integrate(self, values):
        """Integral of the P1 interpolant of nodal ``values``."""
        return float(np.sum(self.areas * values[self.tris].mean(axis=1)))

    def triangle_gradients(self, values):
        return np.einsum("tid,ti->td", self.basis_gradients(), values[self.tris])

    def node_gradients(self, values):
        """Area-weighted average of the adjacent triangle gradients."""
        gt = self.triangle_gradients(values)
        acc = np.zeros((self.n_nodes, 2))
        wsum = np.zeros(self.n_nodes)
        for i in range(3):
            np.add.at(acc, self.tris[:, i], gt * self.areas[:, None])
            np.add.at(wsum, self.tris[:, i], self.areas)
        return acc / wsum[:, None]

    def locate(self, pts):
        """Containing triangle (-1 outside) and barycentric coordinates."""
        if self._finder is None:
            import matplotlib.tri as mtri
            tri = mtri.Triangulation(self.nodes[:, 0], self.nodes[:, 1], self.tris)
            self._finder = tri.get_trifinder()
        pts = np.asarray(pts, dtype=float)
        idx = np.asarray(self._finder(pts[:, 0], pts[:, 1]))
        bary = np.zeros((len(pts), 3))
        ok = idx >= 0
        if np.any(ok):
            t = self.tris[idx[ok]]
            a, b, c = self.nodes[t[:, 0]], self.nodes[t[:, 1]], self.nodes[t[:, 2]]
            v0, v1, v2 = b - a, c - a, pts[ok] - a
            den = v0[:, 0] * v1[:, 1] - v1[:, 0] * v0[:, 1]
            l1 = (v2[:, 0] * v1[:, 1] - v1[:, 0] * v2[:, 1]) / den
            l2 = (v0[:, 0] * v2[:, 1] - v2[:, 0] * v0[:, 1]) / den
            bary[ok] = np.stack([1 - l1 - l2, l1, l2], axis=1)
        return idx, bary

    def interpolate(self, values, idx, bary):
        """Evaluate P1 nodal ``values`` (N,) or (N, k) at located points; 0 outside."""
        values = np.asarray(values)
        out = np.zeros((len(idx),) + values.shape[1:])
        ok = idx >= 0
        if np.any(ok):
            vt = values[self.tris[idx[ok]]]
            out[ok] = np.einsum("pi,pi...->p...", bary[ok], vt)
        return out

    def collar_cutoff(self, pts=None):
        """0 on the collars, 1 a further collar width inside, smooth between."""
        d = self.dist if pts is None else self.flat.boundary_distances(pts)
        w = self.collar_width
        return smoothstep((d.min(axis=-1) - w) / w)


@dataclass
class DensityField:
    """Area density rho of the form rho dx ^ dy, sampled at mesh nodes.

    ``fn`` (optional) evaluates rho anywhere in the plane; without it
    off-node values come from the P1 interpolant.
    """

    domain: HoledDiscDomain
    values: np.ndarray
    fn: object = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.domain.n_nodes,):
            raise InvalidParam("density needs one value per node")
        if np.any(self.values <= 0) or not np.all(np.isfinite(self.values)):
            raise InvalidParam("density values must be positive and finite")

    @classmethod
    def from_function(cls, domain, fn):
        return cls(domain, fn(domain.nodes), fn)

    @classmethod
    def uniform(cls, domain, value=1.0):
        return cls.from_function(domain, lambda x: np.full(len(np.atleast_2d(x)), float(value)))

    @property
    def total(self):
        return self.domain.integrate(self.values)

    def evaluate(self, pts):
        if self.fn is not None:
            return self.fn(pts)
        idx, bary = self.domain.locate(pts)
        if np.any(idx < 0):
            raise InvalidParam("density evaluated outside the mesh")
        return self.domain.interpolate(self.values, idx, bary)


def _fd_jacobian(fn, pts, eps):
    """4th-order central-difference Jacobians of a planar map, (P, 2, 2)."""
    pts = np.asarray(pts, dtype=float)
    jac = np.empty((len(pts), 2, 2))
    for k in range(2):
        e = np.zeros(2)
        e[k] = eps
        stacked = np.concatenate([pts + 2 * e, pts + e, pts - e, pts - 2 * e])
        ev = fn(stacked).reshape(4, len(pts), 2)
        jac[:, :, k] = (-ev[0] + 8 * ev[1] - 8 * ev[2] + ev[3]) / (12 * eps)
    return jac


class PlanarMap:
    """A map of the plane restricted to a holed-disc domain.

    ``fn`` evaluates the map at arbitrary points, shape (P, 2) -> (P, 2);
    node images are cached on first use.  ``jac_fn`` (optional) returns
    exact Jacobians (P, 2, 2); without it they come from finite differences.
    """

    def __init__(self, domain: HoledDiscDomain, fn, label="map", node_images=None, jac_fn=None):
        self.domain = domain
        self.fn = fn
        self.label = label
        self.jac_fn = jac_fn
        self._node_images = node_images
        self._node_jac = None

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        return self.fn(pts.reshape(-1, 2)).reshape(pts.shape)

    @property
    def node_images(self):
        if self._node_images is None:
            self._node_images = self(self.domain.nodes)
        return self._node_images

    def jacobian(self, pts, eps=1e-4):
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        if self.jac_fn is not None:
            return self.jac_fn(pts)
        return _fd_jacobian(self.fn, pts, eps)

    def node_jacobians(self, eps=1e-4):
        if self._node_jac is None:
            self._node_jac = self.jacobian(self.domain.nodes, eps)
        return self._node_jac

    def det_jacobian(self, pts=None, eps=1e-4):
        j = self.node_jacobians(eps) if pts is None else self.jacobian(pts, eps)
        return j[:, 0, 0] * j[:, 1, 1] - j[:, 0, 1] * j[:, 1, 0]

    def triangle_jacobians(self):
        """Jacobian of the P1 interpolant of the node images on each triangle."""
        g = self.domain.basis_gradients()
        return np.einsum("tic,tid->tcd", self.node_images[self.domain.tris], g)

    def compose(self, inner: "PlanarMap", label=None) -> "PlanarMap":
        """self o inner, with the chain rule for its Jacobian."""
        def jac(x, eps=1e-4):
            return self.jacobian(inner.fn(x), eps) @ inner.jacobian(x, eps)

        out = PlanarMap(self.domain, lambda x: self.fn(inner.fn(x)),
                        label or f"{self.label}o{inner.label}", jac_fn=jac)
        out.parts = (self, inner)
        return out

    def resampled(self, label=None) -> "PlanarMap":
        """C1 cubic interpolant of the node displacements, identity off the mesh.

        Cheap to evaluate at many points; meant for maps that are close to
        the identity, such as the Moser correction f_1.
        """
        import matplotlib.tri as mtri

        d = self.domain
        tri = mtri.Triangulation(d.nodes[:, 0], d.nodes[:, 1], d.tris)
        disp = self.node_images - d.nodes
        interps = [mtri.CubicTriInterpolator(tri, disp[:, k], kind="geom") for k in range(2)]

        def fn(x):
            x = np.asarray(x, dtype=float)
            shift = [np.ma.filled(it(x[:, 0], x[:, 1]), 0.0) for it in interps]
            return x + np.stack(shift, axis=1)

        return PlanarMap(d, fn, label or f"{self.label}~")

    @classmethod
    def identity(cls, domain):
        return cls(domain, lambda x: np.array(x, dtype=float), "id",
                   jac_fn=lambda x: np.broadcast_to(np.eye(2), (len(x), 2, 2)).copy())


# --- stage 1: cut-off translation flows -----------------------------------------

def _radial_step(x, center, r_one, r_zero, hessian=True):
    """Radial cutoff, 1 for |x - c| <= r_one and 0 beyond r_zero, with gradient and Hessian."""
    d = x - np.asarray(center, float)
    r = np.hypot(d[:, 0], d[:, 1])
    w = r_zero - r_one
    val, d1, d2 = smoothstep_jet((r_zero - r) / w, 2 if hessian else 1)
    d1 = -d1 / w
    # the step is flat near r = 0, so the 1/r terms vanish there
    safe = np.where(r > 0, r, 1.0)
    rhat = d / safe[:, None]
    if not hessian:
        return val, d1[:, None] * rhat, None
    d2 = d2 / w**2
    outer = rhat[:, :, None] * rhat[:, None, :]
    hess = d2[:, None, None] * outer + (d1 / safe)[:, None, None] * (np.eye(2)[None] - outer)
    return val, d1[:, None] * rhat, hess


@dataclass(frozen=True)
class Obstacle:
    """A pinned disc (hole plus collar) the flow must leave at rest."""

    center: tuple
    radius: float
    transition: float


@dataclass(frozen=True)
class TubeFlow:
    """Divergence-free field carrying one hole along a segment.

    At time t the stream function is H = chi_t * |v| * n, where n is the
    signed distance across the segment and chi_t is a radial cutoff about
    the moving centre c(t) = start + t v: 1 within ``half_width`` (hole,
    collar and margin) and 0 beyond ``half_width + spread``.  H is then
    blended to a constant around every other hole and to 0 on a ring
    inside the outer collar.  The velocity (dH/dy, -dH/dx) equals v on the
    moving plateau, so the time-1 flow moves the hole and its collar
    rigidly by v; it vanishes on the outer collar and on the other
    pinned collars, and fluid elsewhere only flows around the moving disc.
    """

    start: tuple
    end: tuple
    half_width: float
    spread: float
    center: tuple
    outer_radius: float
    outer_transition: float
    obstacles: tuple = ()

    @property
    def v(self):
        return np.asarray(self.end, float) - np.asarray(self.start, float)

    def _base(self, x, t, hessian=True):
        a = np.asarray(self.start, float)
        v = self.v
        length = np.linalg.norm(v)
        en = np.array([-v[1], v[0]]) / length
        psi = length * ((x - a) @ en)
        grad_psi = np.broadcast_to(length * en, x.shape)
        chi, grad_chi, hess_chi = _radial_step(x, a + t * v, self.half_width,
                                               self.half_width + self.spread, hessian)
        grad = grad_chi * psi[:, None] + chi[:, None] * grad_psi
        if not hessian:
            return chi * psi, grad, None
        cross = grad_chi[:, :, None] * grad_psi[:, None, :]
        hess = hess_chi * psi[:, None, None] + cross + cross.transpose(0, 2, 1)
        return chi * psi, grad, hess

    @staticmethod
    def _flatten(h, grad, hess, beta, gb, hb, level):
        if hess is not None:
            cross = gb[:, :, None] * grad[:, None, :]
            hess = ((1 - beta)[:, None, None] * hess - cross - cross.transpose(0, 2, 1)
                    - (h - level)[:, None, None] * hb)
        grad = (1 - beta)[:, None] * grad - gb * (h - level)[:, None]
        return (1 - beta) * h + beta * level, grad, hess

    def stream(self, x, t, hessian=True):
        """Stream function H, its gradient and Hessian (or None) at points x, shape (P, 2)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        h, grad, hess = self._base(x, t, hessian)
        for ob in self.obstacles:
            level = self._base(np.asarray(ob.center, float)[None], t, False)[0][0]
            step = _radial_step(x, ob.center, ob.radius, ob.radius + ob.transition, hessian)
            h, grad, hess = self._flatten(h, grad, hess, *step, level)
        # 1 - (radial step) is 0 inside and 1 on the outer ring
        keep, g_keep, h_keep = _radial_step(x, self.center,
                                            self.outer_radius - self.outer_transition,
                                            self.outer_radius, hessian)
        h_keep = None if h_keep is None else -h_keep
        h, grad, hess = self._flatten(h, grad, hess, 1.0 - keep, -g_keep, h_keep, 0.0)
        return h, grad, hess

    def velocity(self, x, t):
        _, g, _ = self.stream(x, t, hessian=False)
        return np.stack([g[:, 1], -g[:, 0]], axis=1)

    def velocity_and_gradient(self, x, t):
        _, g, hs = self.stream(x, t)
        dv = np.stack([hs[:, 1, :], -hs[:, 0, :]], axis=1)
        return np.stack([g[:, 1], -g[:, 0]], axis=1), dv

    def flow_with_jacobian(self, x, n_steps=64):
        """Time-1 map and its Jacobian (RK4 on the variational equation)."""
        x = np.array(x, dtype=float)
        jac = np.broadcast_to(np.eye(2), (len(x), 2, 2)).copy()
        dt = 1.0 / n_steps

        def rhs(y, j, t):
            v, dv = self.velocity_and_gradient(y, t)
            return v, dv @ j

        for k in range(n_steps):
            t = k * dt
            k1, l1 = rhs(x, jac, t)
            k2, l2 = rhs(x + 0.5 * dt * k1, jac + 0.5 * dt * l1, t + 0.5 * dt)
            k3, l3 = rhs(x + 0.5 * dt * k2, jac + 0.5 * dt * l2, t + 0.5 * dt)
            k4, l4 = rhs(x + dt * k3, jac + dt * l3, t + dt)
            x = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            jac = jac + dt / 6 * (l1 + 2 * l2 + 2 * l3 + l4)
        return x, jac

    def support(self, x):
        """Mask of points the field can ever reach: the swept band and the obstacle rings."""
        reach = self.half_width + self.spread
        a, b = np.asarray(self.start, float), np.asarray(self.end, float)
        live = _segment_distance(x, a, b) < reach
        for ob in self.obstacles:
            live |= np.linalg.norm(x - np.asarray(ob.center), axis=1) < ob.radius + ob.transition
        return live & (np.linalg.norm(x - np.asarray(self.center), axis=1) < self.outer_radius)

    def flow(self, x, n_steps=64):
        """Time-1 map by classical RK4; points off the support never move."""
        x = np.array(x, dtype=float)
        active = self.support(x)
        y = x[active]
        dt = 1.0 / n_steps
        for k in range(n_steps):
            t = k * dt
            k1 = self.velocity(y, t)
            k2 = self.velocity(y + 0.5 * dt * k1, t + 0.5 * dt)
            k3 = self.velocity(y + 0.5 * dt * k2, t + 0.5 * dt)
            k4 = self.velocity(y + dt * k3, t + dt)
            y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        x[active] = y
        return x


def _segment_distance(p, a, b):
    p = np.asarray(p, dtype=float)
    ab = b - a
    s = np.clip(np.dot(p - a, ab) / np.dot(ab, ab), 0.0, 1.0)
    d = np.linalg.norm(p - (a + s[..., None] * ab), axis=-1)
    return float(d) if d.ndim == 0 else d


def _build_tube(flat, current, moving, a, b, half_width, collar, margin,
                min_transition, max_transition, spread):
    """TubeFlow for one segment, or None if the geometry does not fit.

    Blending zones get at most 90% of the room between the moving plateau
    and a pinned disc, and at most 45% of the room between two pinned
    discs, so no two zones overlap.
    """
    c0 = flat.outer.c
    r_out = flat.outer.radius - collar - margin
    pinned = [(c.c, c.radius + collar) for j, c in enumerate(current.inner) if j != moving]
    to_outer = [r_out - np.linalg.norm(cj - c0) - rj for cj, rj in pinned]
    room_out = r_out - max(np.linalg.norm(a - c0), np.linalg.norm(b - c0)) - half_width
    outer_tr = min([max_transition, 0.9 * room_out] + [0.45 * g for g in to_outer])
    if outer_tr < min_transition:
        return None
    obstacles = []
    for j, (cj, rj) in enumerate(pinned):
        gaps = [0.9 * (_segment_distance(cj, a, b) - half_width - rj), 0.45 * to_outer[j]]
        gaps += [0.45 * (np.linalg.norm(cj - ck) - rj - rk)
                 for k, (ck, rk) in enumerate(pinned) if k != j]
        tr = min([max_transition] + gaps)
        if tr < min_transition:
            return None
        obstacles.append(Obstacle(tuple(map(float, cj)), float(rj), float(tr)))
    return TubeFlow(tuple(map(float, a)), tuple(map(float, b)), float(half_width),
                    float(spread), tuple(map(float, c0)), float(r_out), float(outer_tr),
                    tuple(obstacles))


def plan_tubes(flat: FlatPlace, translations, collar_width, margin=None, waypoints=None,
               min_transition=0.02, max_transition=0.15, spread=None):
    """Sequential single-hole moves, one or more straight segments each.

    The straight segment is tried first, then the two axis-aligned
    two-segment detours; ``waypoints[i]`` (intermediate centres) overrides
    the routing of hole i.  Raises RoutingFailed when no candidate keeps
    clear of the other holes and of the outer collar.
    """
    translations = [np.asarray(t, dtype=float) for t in translations]
    if len(translations) != flat.n:
        raise InvalidParam("need one translation per inner disc")
    flat.translated(translations)
    margin = 0.5 * collar_width if margin is None else margin
    current = flat
    tubes = []
    for i, (c, t) in enumerate(zip(flat.inner, translations)):
        if np.linalg.norm(t) == 0:
            continue
        half = c.radius + collar_width + margin
        start, target = c.c, c.c + t
        if waypoints and waypoints[i]:
            candidates = [[start] + [np.asarray(w, float) for w in waypoints[i]] + [target]]
        else:
            candidates = [[start, target],
                          [start, np.array([target[0], start[1]]), target],
                          [start, np.array([start[0], target[1]]), target]]
        chosen = None
        for path in candidates:
            segs = [_build_tube(flat, current, i, p, q, half, collar_width, margin,
                                min_transition, max_transition,
                                half if spread is None else spread)
                    for p, q in zip(path[:-1], path[1:]) if np.linalg.norm(q - p) > 0]
            if segs and all(s is not None for s in segs):
                chosen = segs
                break
        if chosen is None:
            raise RoutingFailed(f"no collision-free tube for hole {i} "
                                f"from {tuple(start)} to {tuple(target)}")
        tubes.extend(chosen)
        moved = list(current.inner)
        moved[i] = c.translated(t)
        current = FlatPlace(flat.outer, tuple(moved))
    return tubes


def initial_rearrangement_diffeo(domain: HoledDiscDomain, translations, waypoints=None,
                                 n_steps=64) -> PlanarMap:
    """Diffeomorphism F: identity near the outer circle, T_i near hole i."""
    tubes = plan_tubes(domain.flat, translations, domain.collar_width, waypoints=waypoints)
    if not tubes:
        return PlanarMap.identity(domain)

    def fn(x):
        for tube in tubes:
            x = tube.flow(x, n_steps)
        return x

    def jac_fn(x):
        total = np.broadcast_to(np.eye(2), (len(x), 2, 2)).copy()
        for tube in tubes:
            x, j = tube.flow_with_jacobian(x, n_steps)
            total = j @ total
        return total

    fmap = PlanarMap(domain, fn, "F", jac_fn=jac_fn)
    fmap.tubes = tubes
    return fmap


def pinned_map(flat: FlatPlace, translations, pts):
    """Where the pinned collars must go: identity outside, x + T_i near hole i."""
    pts = np.asarray(pts, dtype=float)
    d = flat.boundary_distances(pts)
    nearest = d.argmin(axis=1)
    out = pts.copy()
    for i, t in enumerate(translations):
        out[nearest == i + 1] += np.asarray(t, dtype=float)
    return out


# --- stages 2-5 ----------------------------------------------------------------

def pullback_density(fmap: PlanarMap, rho: DensityField, eps=1e-4) -> DensityField:
    """(F^* rho)(x) = rho(F(x)) det DF(x) at every node."""
    det = fmap.det_jacobian(eps=eps)
    if np.any(det <= 0):
        raise NonPositiveJacobian(f"det DF <= 0 at {int(np.sum(det <= 0))} nodes")
    vals = rho.evaluate(fmap.node_images) * det
    fn = None
    if rho.fn is not None:
        def fn(x):
            return rho.fn(fmap(x)) * fmap.det_jacobian(x, eps)
    return DensityField(fmap.domain, vals, fn)


@dataclass
class PotentialInfo:
    residual: float
    compat_defect: float
    exactness: float


def solve_potential(domain: HoledDiscDomain, g, compat_rtol=1e-2, compat_atol=1e-6,
                    return_info=False):
    """Solve Laplace(u) = g with zero Neumann data and zero mean (P1 FEM).

    The discrete load is projected onto mean zero after checking that the
    integral of g is within ``compat_rtol`` of its L1 norm or within
    ``compat_atol`` times the domain area.
    """
    g = np.asarray(g, dtype=float)
    n = domain.n_nodes
    mass = domain.mass()
    gnorm = domain.integrate(np.abs(g))
    total = domain.integrate(g)
    if gnorm == 0.0:
        u = np.zeros(n)
        info = PotentialInfo(0.0, 0.0, 0.0)
        return (u, info) if return_info else u
    area = float(domain.areas.sum())
    if abs(total) > max(compat_rtol * gnorm, compat_atol * area):
        raise IncompatibleData(f"integral of g is {total:.3e} (L1 norm {gnorm:.3e})")
    m = np.asarray(mass.sum(axis=1)).ravel()
    g_proj = g - total / m.sum()
    b = -(mass @ g_proj)
    a = sp.bmat([[domain.stiffness(), m[:, None]], [m[None, :], None]], format="csc")
    rhs = np.concatenate([b, [0.0]])
    sol = spla.spsolve(a, rhs)
    u = sol[:n]
    res = float(np.linalg.norm(a @ sol - rhs) / np.linalg.norm(rhs))
    if not np.isfinite(res) or res > 1e-10:
        raise SolverFailure(f"relative residual {res:.2e}")
    exact = exactness_residual(domain, u, g_proj)
    info = PotentialInfo(res, float(total / gnorm), exact)
    return (u, info) if return_info else u


def exactness_residual(domain, u, g):
    """|| weak Laplacian of u - g ||_L2 / ||g||_L2 (discrete d psi against g)."""
    mass = domain.mass()
    lap = spla.spsolve(mass.tocsc(), -(domain.stiffness() @ u))
    gn = np.sqrt(g @ (mass @ g))
    diff = lap - g
    return float(np.sqrt(diff @ (mass @ diff)) / gn) if gn > 0 else 0.0


class TransportField:
    """Time-dependent planar velocity field on a holed-disc domain.

    ``velocity(x, t)`` evaluates anywhere (zero off the mesh);
    ``support_mask`` flags nodes where the field does not vanish.
    """

    def __init__(self, domain, velocity, support_mask=None, info=None, is_zero=False):
        self.domain = domain
        self.velocity = velocity
        self.support_mask = support_mask
        self.info = info or {}
        self.is_zero = is_zero

    def node_velocity(self, t):
        return self.velocity(self.domain.nodes, t)

    @classmethod
    def from_function(cls, domain, fn):
        return cls(domain, fn)


def transport_field(domain: HoledDiscDomain, u, rho0, rho1, cutoff=True, eps_support=1e-14):
    """eta_t = -c grad(u) / rho_t with rho_t = rho0 + t (rho1 - rho0)."""
    r0 = rho0.values if isinstance(rho0, DensityField) else np.asarray(rho0, float)
    r1 = rho1.values if isinstance(rho1, DensityField) else np.asarray(rho1, float)
    if min(r0.min(), r1.min()) <= 0:
        raise DegenerateInterpolation("rho_t is not positive at every node for all t")
    u = np.asarray(u, dtype=float)
    grad = domain.node_gradients(u)
    c = domain.collar_cutoff() if cutoff else np.ones(domain.n_nodes)
    w = -c[:, None] * grad
    mag = np.linalg.norm(w, axis=1)
    support = mag > eps_support
    gc = domain.triangle_gradients(c)
    gu = domain.triangle_gradients(u)
    info = {"cutoff_residual": float(np.max(np.abs(np.sum(gc * gu, axis=1)), initial=0.0)),
            "max_speed": float(mag.max() / min(r0.min(), r1.min()))}
    if not np.any(support):
        return TransportField(domain, lambda x, t: np.zeros_like(np.asarray(x, float)),
                              support, info, is_zero=True)
    data = np.column_stack([w, r0, r1])

    def velocity(x, t):
        idx, bary = domain.locate(x)
        v = domain.interpolate(data, idx, bary)
        rho_t = v[:, 2] + t * (v[:, 3] - v[:, 2])
        rho_t[idx < 0] = 1.0
        return v[:, :2] / rho_t[:, None]

    return TransportField(domain, velocity, support, info)


def integrate_flow(eta: TransportField, n_steps=64, leave_tol=1e-6) -> PlanarMap:
    """Time-1 map of the evolution x' = eta_t(x), classical RK4, fixed step."""
    domain = eta.domain
    if eta.is_zero:
        return PlanarMap.identity(domain)
    dt = 1.0 / n_steps

    def fn(x):
        x = np.array(x, dtype=float)
        t = 0.0
        for _ in range(n_steps):
            k1 = eta.velocity(x, t)
            k2 = eta.velocity(x + 0.5 * dt * k1, t + 0.5 * dt)
            k3 = eta.velocity(x + 0.5 * dt * k2, t + 0.5 * dt)
            k4 = eta.velocity(x + dt * k3, t + dt)
            x = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += dt
        return x

    f1 = PlanarMap(domain, fn, "f1")
    escaped = domain.flat.signed_distance(f1.node_images) > leave_tol
    if np.any(escaped):
        raise StepUnstable(f"{int(escaped.sum())} nodes left the domain")
    return f1


# --- end to end ------------------------------------------------------------------

@dataclass
class MoserCertificate:
    max_detJ_dev: float
    collar_dev: float
    stages: dict = field(default_factory=dict)

    def passed(self, det_tol=1e-4, collar_tol=1e-6):
        return self.max_detJ_dev <= det_tol and self.collar_dev <= collar_tol

    def to_dict(self):
        return asdict(self)


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except MoserError as err:
        err.stage = name
        raise
    except Exception as err:
        wrapped = MoserError(f"{name}: {err}")
        wrapped.stage = name
        raise wrapped from err


def certify(fmap: PlanarMap, translations, eps=1e-4):
    domain = fmap.domain
    det = fmap.det_jacobian(eps=eps)
    collar = domain.collar_mask
    pinned = pinned_map(domain.flat, translations, domain.nodes[collar])
    dev = np.linalg.norm(fmap.node_images[collar] - pinned, axis=1)
    return float(np.max(np.abs(det - 1.0))), float(dev.max() / domain.flat.diameter)


def flat_place_diffeo(domain: HoledDiscDomain, translations, waypoints=None, n_steps=64,
                      tube_steps=64):
    """Area-preserving rearrangement F o f_1 and its certificate."""
    translations = [np.asarray(t, dtype=float) for t in translations]
    if len(translations) != domain.flat.n:
        raise InvalidParam("need one translation per inner disc")
    if all(not np.any(t) for t in translations):
        ident = PlanarMap.identity(domain)
        det_dev, collar_dev = certify(ident, translations)
        return ident, MoserCertificate(det_dev, collar_dev, {"identity": True})
    fmap = _stage("initial_rearrangement_diffeo", initial_rearrangement_diffeo, domain,
                  translations, waypoints, tube_steps)
    rho0 = DensityField.uniform(domain)
    rho1 = _stage("pullback_density", pullback_density, fmap, rho0)
    g = rho1.values - rho0.values
    u, pinfo = _stage("solve_potential", solve_potential, domain, g, return_info=True)
    eta = _stage("transport_field", transport_field, domain, u, rho0, rho1)
    f1 = _stage("integrate_flow", integrate_flow, eta, n_steps)
    result = fmap.compose(f1, "F o f1")
    f_det, f_collar = certify(fmap, translations)
    det_dev, collar_dev = certify(result, translations)
    stages = {
        "initial": {"max_detJ_dev": f_det, "collar_dev": f_collar,
                    "n_tubes": len(getattr(fmap, "tubes", []))},
        "pullback": {"total_rho0": rho0.total, "total_rho1": rho1.total,
                     "max_abs_g": float(np.max(np.abs(g)))},
        "potential": asdict(pinfo),
        "transport": eta.info,
        "flow": {"max_displacement": float(np.max(np.linalg.norm(
            f1.node_images - domain.nodes, axis=1))), "n_steps": n_steps},
    }
    return result, MoserCertificate(det_dev, collar_dev, stages)
