"""Flat places: a closed disc in the plane with disjoint open discs removed."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidParam, Overlap


@dataclass(frozen=True)
class Circle:
    center: tuple
    radius: float

    def __post_init__(self):
        c = tuple(float(x) for x in self.center)
        if len(c) != 2:
            raise InvalidParam("circle centres are 2-vectors")
        if not self.radius > 0:
            raise InvalidParam("circle radius must be positive")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def c(self):
        return np.asarray(self.center)

    def translated(self, t):
        return Circle(tuple(self.c + np.asarray(t, dtype=float)), self.radius)

    def to_dict(self):
        return {"center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class FlatPlace:
    """Outer circle with n inner circles in the z = 0 plane.

    The inner discs must be pairwise disjoint and strictly inside the outer
    circle; ``clearance`` is the smallest gap between any two boundary
    circles.
    """

    outer: Circle
    inner: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "inner", tuple(self.inner))
        if self.clearance <= 0:
            raise Overlap(f"boundary circles overlap (clearance {self.clearance:.3g})")

    @property
    def n(self):
        return len(self.inner)

    @property
    def circles(self):
        return (self.outer,) + self.inner

    @property
    def clearance(self):
        gaps = [self.outer.radius - np.linalg.norm(c.c - self.outer.c) - c.radius
                for c in self.inner]
        for i, a in enumerate(self.inner):
            for b in self.inner[i + 1:]:
                gaps.append(np.linalg.norm(a.c - b.c) - a.radius - b.radius)
        return float(min(gaps)) if gaps else float(self.outer.radius)

    @property
    def diameter(self):
        return 2.0 * self.outer.radius

    @property
    def area(self):
        return np.pi * (self.outer.radius**2 - sum(c.radius**2 for c in self.inner))

    def translated(self, translations):
        """Flat place with every inner disc moved by its translation."""
        if len(translations) != self.n:
            raise InvalidParam("need one translation per inner disc")
        return FlatPlace(self.outer, tuple(c.translated(t) for c, t in zip(self.inner, translations)))

    def signed_distance(self, pts):
        """Negative inside the flat place, zero on its boundary circles."""
        pts = np.asarray(pts, dtype=float)
        d = np.linalg.norm(pts - self.outer.c, axis=-1) - self.outer.radius
        for c in self.inner:
            d = np.maximum(d, c.radius - np.linalg.norm(pts - c.c, axis=-1))
        return d

    def boundary_distances(self, pts):
        """Distance of each point to each boundary circle, shape (..., n + 1)."""
        pts = np.asarray(pts, dtype=float)
        out = [self.outer.radius - np.linalg.norm(pts - self.outer.c, axis=-1)]
        out += [np.linalg.norm(pts - c.c, axis=-1) - c.radius for c in self.inner]
        return np.stack(out, axis=-1)

    def to_dict(self):
        return {"outer": self.outer.to_dict(), "inner": [c.to_dict() for c in self.inner]}

    @classmethod
    def from_dict(cls, d):
        outer = Circle(tuple(d["outer"]["center"]), d["outer"]["radius"])
        inner = tuple(Circle(tuple(c["center"]), c["radius"]) for c in d.get("inner", []))
        return cls(outer, inner)
