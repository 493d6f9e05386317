"""Convex planar domains: the closed disk and convex polygons.

All functions accept a single point ``(2,)`` or a batch ``(n, 2)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GEOM_TOL = 1e-12


class OutsideDomain(ValueError):
    """Raised when a query point lies outside the closed domain."""


@dataclass(frozen=True)
class UnitDisk:
    """Closed disk; the name is kept for the default radius."""

    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    strictly_convex = True

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    @property
    def bbox(self):
        cx, cy = self.center
        r = self.radius
        return np.array([cx - r, cy - r]), np.array([cx + r, cy + r])


@dataclass(frozen=True)
class Polygon:
    """Convex polygon with counter-clockwise vertices (not repeated at the end)."""

    vertices: np.ndarray
    normals: np.ndarray = field(init=False, repr=False, compare=False)
    offsets: np.ndarray = field(init=False, repr=False, compare=False)

    strictly_convex = False

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise ValueError("polygon needs at least three 2D vertices")
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
        if np.any(cross <= 0):
            raise ValueError("vertices must be strictly convex and counter-clockwise")
        length = np.hypot(e[:, 0], e[:, 1])
        normals = np.column_stack([e[:, 1], -e[:, 0]]) / length[:, None]
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "offsets", np.einsum("ij,ij->i", normals, v))

    @property
    def edges(self):
        """Pairs ``(start, end)`` of each edge, counter-clockwise."""
        return [(self.vertices[k], self.vertices[(k + 1) % len(self.vertices)])
                for k in range(len(self.vertices))]

    @property
    def diameter(self) -> float:
        d = self.vertices[:, None, :] - self.vertices[None, :, :]
        return float(np.sqrt((d ** 2).sum(-1)).max())

    @property
    def bbox(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


def square(half_width: float = 1.0) -> Polygon:
    a = half_width
    return Polygon(np.array([[-a, -a], [a, -a], [a, a], [-a, a]]))


def _signed_depth(domain, p):
    """Signed distance to the boundary, positive inside."""
    p = np.asarray(p, dtype=float)
    if isinstance(domain, UnitDisk):
        r = np.hypot(p[..., 0] - domain.center[0], p[..., 1] - domain.center[1])
        return domain.radius - r
    return (domain.offsets - p @ domain.normals.T).min(axis=-1)


def contains(domain, p, tol: float = GEOM_TOL):
    """True where ``p`` lies in the closed domain (within ``tol``)."""
    return _signed_depth(domain, p) >= -tol


def boundary_distance(domain, p):
    """Euclidean distance from interior points to the boundary."""
    depth = _signed_depth(domain, p)
    if np.any(depth < -GEOM_TOL):
        raise OutsideDomain("point outside domain")
    return np.maximum(depth, 0.0)


def _ray_exit(domain, p, v):
    """Largest ``t >= 0`` with ``p + t v`` in the closed domain (``v`` unit)."""
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    if isinstance(domain, UnitDisk):
        q = p - np.asarray(domain.center)
        b = (q * v).sum(-1)
        c = (q * q).sum(-1) - domain.radius ** 2
        disc = np.maximum(b * b - c, 0.0)
        # c <= 0 inside; the root formula below avoids cancellation
        sq = np.sqrt(disc)
        t = np.where(b > 0, -c / (b + sq + 1e-300), sq - b)
        return np.maximum(t, 0.0)
    nv = v @ domain.normals.T
    slack = domain.offsets - p @ domain.normals.T
    slack = np.maximum(slack, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(nv > GEOM_TOL, slack / np.where(nv > GEOM_TOL, nv, 1.0), np.inf)
    return t.min(axis=-1)


def clip_step(domain, p, v, delta: float, mode: str = "symmetric"):
    """Largest ``t`` in ``(0, delta]`` keeping ``p + t v`` (and ``p - t v``) inside.

    ``mode='symmetric'`` clips both ``p + t v`` and ``p - t v``; ``'one_sided'``
    clips only the forward ray. Returns 0 when ``p`` sits on the boundary and
    the ray points outward.
    """
    if mode not in ("symmetric", "one_sided"):
        raise ValueError(f"unknown mode {mode!r}")
    v = np.asarray(v, dtype=float)
    t = np.minimum(_ray_exit(domain, p, v), delta)
    if mode == "symmetric":
        t = np.minimum(t, _ray_exit(domain, p, -v))
    return t
