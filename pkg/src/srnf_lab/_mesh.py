"""Boundary-conforming triangulation of a flat place.

Boundary nodes are fixed at uniform spacing on every circle; interior nodes
start on a hexagonal lattice and are relaxed with the truss-force scheme of
Persson and Strang, retriangulating by Delaunay as they move.
"""
import numpy as np
from scipy.spatial import Delaunay


def _boundary_nodes(flat, h):
    pts, owner = [], []
    for k, c in enumerate(flat.circles):
        m = max(12, int(np.ceil(2 * np.pi * c.radius / h)))
        a = np.linspace(0, 2 * np.pi, m, endpoint=False)
        pts.append(c.c + c.radius * np.stack([np.cos(a), np.sin(a)], axis=1))
        owner.append(np.full(m, k))
    return np.concatenate(pts), np.concatenate(owner)


def _keep(flat, p, t, geps):
    centroids = p[t].mean(axis=1)
    return t[flat.signed_distance(centroids) < -geps]


def orient_ccw(p, t):
    a, b, c = p[t[:, 0]], p[t[:, 1]], p[t[:, 2]]
    cross = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    t = t.copy()
    t[cross < 0] = t[cross < 0][:, [0, 2, 1]]
    return t


def triangulate(flat, h, n_iter=200):
    """Nodes, triangles and per-node boundary owner (-1 for interior)."""
    geps = 1e-3 * h
    fixed, owner = _boundary_nodes(flat, h)
    r0 = flat.outer.radius
    ys = np.arange(-r0, r0 + h, h * np.sqrt(3) / 2)
    rows = []
    for j, y in enumerate(ys):
        xs = np.arange(-r0, r0 + h, h) + (h / 2 if j % 2 else 0.0)
        rows.append(np.stack([xs, np.full_like(xs, y)], axis=1))
    interior = np.concatenate(rows) + flat.outer.c
    interior = interior[flat.signed_distance(interior) < -0.5 * h]
    nf = len(fixed)
    p = np.concatenate([fixed, interior])
    dtol, fscale, dt = 1e-3, 1.2, 0.2
    old = np.full_like(p, np.inf)
    t = None
    for _ in range(n_iter):
        if np.max(np.linalg.norm(p - old, axis=1)) / h > 0.1 or t is None:
            old = p.copy()
            t = _keep(flat, p, Delaunay(p).simplices, geps)
            bars = np.unique(np.sort(np.concatenate(
                [t[:, [0, 1]], t[:, [1, 2]], t[:, [0, 2]]]), axis=1), axis=0)
        vec = p[bars[:, 0]] - p[bars[:, 1]]
        length = np.linalg.norm(vec, axis=1)
        l0 = fscale * np.sqrt(np.sum(length**2) / len(length))
        force = np.maximum(l0 - length, 0.0)
        fvec = (force / length)[:, None] * vec
        ftot = np.zeros_like(p)
        np.add.at(ftot, bars[:, 0], fvec)
        np.add.at(ftot, bars[:, 1], -fvec)
        ftot[:nf] = 0.0
        p = p + dt * ftot
        # project escaped interior nodes back onto the boundary
        d = flat.signed_distance(p)
        out = d > 0
        out[:nf] = False
        if np.any(out):
            e = 1e-8
            gx = (flat.signed_distance(p[out] + [e, 0]) - d[out]) / e
            gy = (flat.signed_distance(p[out] + [0, e]) - d[out]) / e
            p[out] -= d[out][:, None] * np.stack([gx, gy], axis=1)
        move = np.max(np.linalg.norm(dt * ftot[nf:][d[nf:] < -geps], axis=1), initial=0.0)
        if move / h < dtol:
            break
    # interior nodes that drifted onto a circle would be unfixed boundary nodes
    d = flat.signed_distance(p)
    keep = np.ones(len(p), bool)
    keep[nf:] = d[nf:] < -0.2 * h
    p = p[keep]
    owner = np.concatenate([owner, np.full(len(p) - nf, -1)])
    t = _keep(flat, p, Delaunay(p).simplices, geps)
    used = np.unique(t)
    remap = -np.ones(len(p), int)
    remap[used] = np.arange(len(used))
    return p[used], orient_ccw(p[used], remap[t]), owner[used]


def min_angle_deg(p, t):
    ang = []
    for i in range(3):
        a = p[t[:, i]]
        b = p[t[:, (i + 1) % 3]]
        c = p[t[:, (i + 2) % 3]]
        u, v = b - a, c - a
        cosv = np.sum(u * v, axis=1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
        ang.append(np.degrees(np.arccos(np.clip(cosv, -1, 1))))
    return float(np.min(ang))


def refine(flat, p, t, owner):
    """Split every triangle into four; boundary midpoints snap to their circle."""
    edges = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
    uniq, inv = np.unique(edges, axis=0, return_inverse=True)
    inv = inv.ravel()
    mid = 0.5 * (p[uniq[:, 0]] + p[uniq[:, 1]])
    o0, o1 = owner[uniq[:, 0]], owner[uniq[:, 1]]
    # an edge lies on a circle when both ends do and it borders one triangle
    counts = np.bincount(inv, minlength=len(uniq))
    on_bdry = (o0 >= 0) & (o0 == o1) & (counts == 1)
    mid_owner = np.where(on_bdry, o0, -1)
    for k, c in enumerate(flat.circles):
        sel = mid_owner == k
        v = mid[sel] - c.c
        mid[sel] = c.c + c.radius * v / np.linalg.norm(v, axis=1, keepdims=True)
    n = len(p)
    m = inv.reshape(3, -1).T + n  # midpoints of edges (01, 12, 20)
    a, b, c = t[:, 0], t[:, 1], t[:, 2]
    m01, m12, m20 = m[:, 0], m[:, 1], m[:, 2]
    t2 = np.concatenate([
        np.stack([a, m01, m20], 1), np.stack([m01, b, m12], 1),
        np.stack([m20, m12, c], 1), np.stack([m01, m12, m20], 1)])
    p2 = np.concatenate([p, mid])
    return p2, orient_ccw(p2, t2), np.concatenate([owner, mid_owner])
