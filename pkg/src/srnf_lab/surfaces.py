"""Analytic test surfaces on fixed parameter grids.

Closed genus-0 surfaces are sampled on an equiangular cubed sphere: six
patches, no coordinate poles, exact seams.  Any map of the unit sphere can
then be pushed through the same grid, and the unit sphere's own induced
metric is used as the domain metric for every member of the family.
"""
import numpy as np

from .geom_core import DEFAULT_ORDER, ParamPatch, SurfaceImmersion

# outward axis, first tangent axis, second tangent axis
_FACES = (
    ((1, 0, 0), (0, 1, 0), (0, 0, 1)),
    ((-1, 0, 0), (0, 0, 1), (0, 1, 0)),
    ((0, 1, 0), (0, 0, 1), (1, 0, 0)),
    ((0, -1, 0), (1, 0, 0), (0, 0, 1)),
    ((0, 0, 1), (1, 0, 0), (0, 1, 0)),
    ((0, 0, -1), (0, 1, 0), (1, 0, 0)),
)
_FACE_NAMES = ("+x", "-x", "+y", "-y", "+z", "-z")


def cube_sphere_points(n):
    """Unit-sphere samples per cube face, list of (n, n, 3) arrays."""
    t = np.tan(np.linspace(-np.pi / 4, np.pi / 4, n))
    a, b = np.meshgrid(t, t, indexing="ij")
    out = []
    for e, e1, e2 in _FACES:
        p = (np.asarray(e, float) + a[..., None] * np.asarray(e1, float)
             + b[..., None] * np.asarray(e2, float))
        out.append(p / np.linalg.norm(p, axis=-1, keepdims=True))
    return out


def _face_seams():
    # found geometrically once; the layout is fixed
    pts = cube_sphere_points(5)
    edges = {}
    for k, p in enumerate(pts):
        for name, e in (("u0", p[0]), ("u1", p[-1]), ("v0", p[:, 0]), ("v1", p[:, -1])):
            edges[(k, name)] = e
    seams = []
    keys = list(edges)
    for i, ka in enumerate(keys):
        for kb in keys[i + 1:]:
            if ka[0] == kb[0]:
                continue
            a, b = edges[ka], edges[kb]
            if np.allclose(a, b, atol=1e-12) or np.allclose(a, b[::-1], atol=1e-12):
                seams.append((ka[0], ka[1], kb[0], kb[1]))
    return seams


_SEAMS = _face_seams()


def sphere_family(n, fn=None, fd_order=DEFAULT_ORDER):
    """Immersion ``fn(x)`` of the unit sphere on an n x n per-face cubed grid.

    The domain metric is the unit sphere's induced metric, so the unit
    sphere itself has area factor exactly 1.
    """
    dom = ((-np.pi / 4, np.pi / 4), (-np.pi / 4, np.pi / 4))
    patches = []
    for name, x in zip(_FACE_NAMES, cube_sphere_points(n)):
        ref = ParamPatch(dom, x)
        dens = np.linalg.norm(ref.cross(fd_order), axis=-1)
        y = x if fn is None else fn(x)
        tags = {e: "seam" for e in ("u0", "u1", "v0", "v1")}
        patches.append(ParamPatch(dom, y, density=dens, boundary_tags=tags, name=name))
    return SurfaceImmersion(patches, seams=_SEAMS, fd_order=fd_order)


def unit_sphere(n=65, fd_order=DEFAULT_ORDER):
    return sphere_family(n, None, fd_order)


def sphere(n=65, radius=1.0, fd_order=DEFAULT_ORDER):
    return sphere_family(n, lambda x: radius * x, fd_order)


def ellipsoid(n=65, axes=(1.0, 1.0, 1.2), fd_order=DEFAULT_ORDER):
    d = np.asarray(axes, dtype=float)
    return sphere_family(n, lambda x: x * d, fd_order)


def random_spd(rng, spread=0.3):
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    lam = np.exp(rng.uniform(-spread, spread, size=3))
    return q @ np.diag(lam) @ q.T


def convex_blob(n=65, seed=0, n_terms=3, fd_order=DEFAULT_ORDER):
    """Strictly convex closed surface parametrized by its inverse Gauss map.

    The support function is a positive combination of ellipsoid support
    functions sqrt(p^T A p), i.e. the surface is a Minkowski sum of
    ellipsoids, and x(n) = sum_k w_k A_k n / sqrt(n^T A_k n).
    """
    rng = np.random.default_rng(seed)
    mats = [random_spd(rng) for _ in range(n_terms)]
    w = rng.uniform(0.5, 1.0, size=n_terms)
    w = w / w.sum()

    def fn(x):
        out = np.zeros_like(x)
        for wk, a in zip(w, mats):
            ax = x @ a
            out += wk * ax / np.sqrt(np.sum(ax * x, axis=-1, keepdims=True))
        return out

    return sphere_family(n, fn, fd_order)


def perturbed_sphere(n=65, seed=0, amplitude=0.05, n_modes=4, fd_order=DEFAULT_ORDER):
    """Radial smooth perturbation of the unit sphere rescaled to area 4 pi."""
    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(n_modes, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    amps = amplitude * rng.uniform(-1, 1, size=n_modes)
    freqs = rng.integers(1, 4, size=n_modes)

    def radial(x):
        r = np.ones(x.shape[:-1])
        for d, a, k in zip(dirs, amps, freqs):
            r += a * np.cos(k * np.pi * (x @ d))
        return x * r[..., None]

    f = sphere_family(n, radial, fd_order)
    from .shape_metric import surface_area
    scale = np.sqrt(4 * np.pi / surface_area(f))
    return sphere_family(n, lambda x: scale * radial(x), fd_order)


def graph_patch(height, box=((-1.0, 1.0), (-1.0, 1.0)), n=65, fd_order=DEFAULT_ORDER):
    """Graph (x, y, height(x, y)) over a rectangle, flat parameter metric."""
    (x0, x1), (y0, y1) = box
    n_u, n_v = (n, n) if np.isscalar(n) else n
    x, y = np.meshgrid(np.linspace(x0, x1, n_u), np.linspace(y0, y1, n_v), indexing="ij")
    pos = np.stack([x, y, height(x, y)], axis=-1)
    return SurfaceImmersion([ParamPatch(box, pos, name="graph")], fd_order=fd_order)


def quadric_graph(a, b, c=0.0, box=((-1.0, 1.0), (-1.0, 1.0)), n=65, fd_order=DEFAULT_ORDER):
    return graph_patch(lambda x, y: a * x**2 + b * y**2 + c * x * y, box, n, fd_order)


def quadric_curvature(a, b, c, x, y):
    """Closed-form Gaussian and mean curvature of z = a x^2 + b y^2 + c x y."""
    zx, zy = 2 * a * x + c * y, 2 * b * y + c * x
    zxx, zyy, zxy = 2 * a, 2 * b, c
    w = 1 + zx**2 + zy**2
    k = (zxx * zyy - zxy**2) / w**2
    h = ((1 + zy**2) * zxx - 2 * zx * zy * zxy + (1 + zx**2) * zyy) / (2 * w**1.5)
    return k, h


def torus_patch(n=65, major=2.0, minor=0.7, box=((0.3, 2.2), (-1.0, 1.5)), fd_order=DEFAULT_ORDER):
    """Part of a torus of revolution; parameters (theta, phi)."""
    (u0, u1), (v0, v1) = box
    n_u, n_v = (n, n) if np.isscalar(n) else n
    u, v = np.meshgrid(np.linspace(u0, u1, n_u), np.linspace(v0, v1, n_v), indexing="ij")
    pos = np.stack([(major + minor * np.cos(v)) * np.cos(u),
                    (major + minor * np.cos(v)) * np.sin(u),
                    minor * np.sin(v)], axis=-1)
    return SurfaceImmersion([ParamPatch(box, pos, name="torus")], fd_order=fd_order)


def torus_curvature(major, minor, v):
    """Gaussian curvature of the torus at tube angle v."""
    return np.cos(v) / (minor * (major + minor * np.cos(v)))
