"""Triangular meshes of convex domains with P1 evaluation.

Disk meshes are built from concentric rings (ring ``m`` carries ``6m`` nodes,
hexagonal near the center and blended onto circles outward), so every
boundary node sits exactly on the circle.
Rectangles get a structured right-triangle mesh.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .geometry import Polygon, UnitDisk, boundary_distance

INTERIOR, BOUNDARY_EDGE, BOUNDARY_VERTEX = 0, 1, 2

MAX_NODES = 4_000_000


class NotInMesh(ValueError):
    """A query point is outside the meshed region."""


class MeshTooLarge(MemoryError):
    pass


@dataclass(frozen=True)
class InterpolationStencil:
    triangle: int
    nodes: tuple[int, int, int]
    weights: tuple[float, float, float]


class BucketLocator:
    """Uniform bucket grid over the mesh bounding box.

    Each triangle is registered in every cell its (slightly padded) bounding
    box overlaps, so a cell's candidate list is exhaustive for points in it.
    """

    def __init__(self, nodes, triangles, cell_size):
        lo = nodes.min(axis=0)
        hi = nodes.max(axis=0)
        self.lo = lo
        self.cell = float(cell_size)
        self.shape = np.maximum(np.ceil((hi - lo) / self.cell).astype(np.int64), 1)
        a, b, c = (nodes[triangles[:, k]] for k in range(3))
        self.origin = np.ascontiguousarray(a)
        jac = np.stack([b - a, c - a], axis=-1)            # columns: edges
        self.tinv = np.ascontiguousarray(np.linalg.inv(jac))
        # altitude opposite each vertex, for distance-scaled snapping
        area2 = np.abs(np.linalg.det(jac))
        opp = np.stack([np.linalg.norm(c - b, axis=1), np.linalg.norm(c - a, axis=1),
                        np.linalg.norm(b - a, axis=1)], axis=1)
        self.alt = np.ascontiguousarray(area2[:, None] / opp)

        pad = 2 * kernels.SNAP_DIST
        tlo = np.minimum(np.minimum(a, b), c) - pad
        thi = np.maximum(np.maximum(a, b), c) + pad
        ilo = self._clamp(np.floor((tlo - lo) / self.cell).astype(np.int64))
        ihi = self._clamp(np.floor((thi - lo) / self.cell).astype(np.int64))
        cells, tris = [], []
        for t in range(len(triangles)):
            xs = np.arange(ilo[t, 0], ihi[t, 0] + 1)
            ys = np.arange(ilo[t, 1], ihi[t, 1] + 1)
            gx, gy = np.meshgrid(xs, ys, indexing="ij")
            cells.append((gx * self.shape[1] + gy).ravel())
            tris.append(np.full(gx.size, t))
        cells = np.concatenate(cells)
        tris = np.concatenate(tris)
        order = np.lexsort((tris, cells))
        cells, tris = cells[order], tris[order]
        ncell = int(self.shape[0] * self.shape[1])
        counts = np.bincount(cells, minlength=ncell)
        self.start = np.zeros(ncell + 1, dtype=np.int64)
        np.cumsum(counts, out=self.start[1:])
        self.flat = tris.astype(np.int64)
        width = max(int(counts.max()), 1)
        self.padded = np.full((ncell, width), -1, dtype=np.int64)
        slot = np.arange(len(cells)) - self.start[cells]
        self.padded[cells, slot] = self.flat

    def _clamp(self, ij):
        return np.clip(ij, 0, self.shape - 1)

    def cells_of(self, points):
        ij = self._clamp(np.floor((points - self.lo) / self.cell).astype(np.int64))
        return ij[:, 0] * self.shape[1] + ij[:, 1]


@dataclass(eq=False)
class SimplicialMesh:
    """Conforming triangulation with boundary nodes on the domain boundary.

    ``node_class`` holds ``INTERIOR``, ``BOUNDARY_EDGE`` or ``BOUNDARY_VERTEX``
    (polygon corners). ``h`` is the largest triangle diameter and ``sigma`` the
    largest ratio of diameter to inscribed-circle diameter.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    node_class: np.ndarray
    domain: object = None
    nominal_h: float | None = None
    h: float = field(init=False)
    sigma: float = field(init=False)

    def __post_init__(self):
        self.nodes = np.ascontiguousarray(self.nodes, dtype=float)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        self.node_class = np.asarray(self.node_class, dtype=np.int8)
        p = self.nodes[self.triangles]
        e = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]], axis=1)
        lengths = np.linalg.norm(e, axis=-1)
        area = 0.5 * (e[:, 0, 0] * (-e[:, 2, 1]) - e[:, 0, 1] * (-e[:, 2, 0]))
        if np.any(area <= 0):
            raise ValueError("triangles must be positively oriented and non-degenerate")
        diam = lengths.max(axis=1)
        inscribed = 4.0 * area / lengths.sum(axis=1)
        self.h = float(diam.max())
        self.sigma = float((diam / inscribed).max())
        self._locator = None
        self._boundary_polygon = None

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(self.node_class == INTERIOR)

    @property
    def boundary(self) -> np.ndarray:
        return np.flatnonzero(self.node_class != INTERIOR)

    @property
    def locator(self) -> BucketLocator:
        if self._locator is None:
            spacing = np.sqrt(2.0 * np.abs(self.area) / len(self.triangles))
            self._locator = BucketLocator(self.nodes, self.triangles, cell_size=spacing)
        return self._locator

    @property
    def area(self) -> float:
        p = self.nodes[self.triangles]
        a = p[:, 1] - p[:, 0]
        b = p[:, 2] - p[:, 0]
        return float(0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]).sum())

    def boundary_edges(self) -> np.ndarray:
        """Edges used by exactly one triangle, oriented counter-clockwise."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        key = np.sort(e, axis=1)
        _, inv, cnt = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        return e[cnt[inv.ravel()] == 1]

    def boundary_polygon(self) -> Polygon:
        """The polygon bounding the meshed region (collinear nodes dropped)."""
        if self._boundary_polygon is None:
            be = self.boundary_edges()
            nxt = dict(zip(be[:, 0].tolist(), be[:, 1].tolist()))
            start = int(be[0, 0])
            chain = [start]
            while (k := nxt[chain[-1]]) != start:
                chain.append(k)
            pts = self.nodes[chain]
            prev = np.roll(pts, 1, axis=0)
            nxtp = np.roll(pts, -1, axis=0)
            a = pts - prev
            b = nxtp - pts
            cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
            scale = np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
            keep = cross > 1e-12 * scale
            self._boundary_polygon = Polygon(pts[keep])
        return self._boundary_polygon

    def distance_to_boundary(self, points=None) -> np.ndarray:
        """Distance to the boundary of the meshed region (not of the domain)."""
        pts = self.nodes if points is None else points
        return boundary_distance(self.boundary_polygon(), pts)

    # -- point location -----------------------------------------------------

    def locate_many(self, points, use_numba: bool | None = None):
        """Vectorized :func:`locate`: returns ``(node_idx (n,3), weights (n,3))``."""
        tri, lam = kernels.locate_points(points, self.locator, use_numba=use_numba)
        bad = np.flatnonzero(tri < 0)
        if len(bad):
            raise NotInMesh(f"{len(bad)} point(s) outside mesh, e.g. {np.asarray(points).reshape(-1, 2)[bad[0]]}")
        return self.triangles[tri], lam

    def locate(self, p) -> InterpolationStencil:
        tri, lam = kernels.locate_points(np.asarray(p, dtype=float)[None, :], self.locator)
        if tri[0] < 0:
            raise NotInMesh(f"point {p} outside mesh")
        t = int(tri[0])
        return InterpolationStencil(t, tuple(int(k) for k in self.triangles[t]),
                                    tuple(float(x) for x in lam[0]))

    def interpolate(self, g) -> np.ndarray:
        """Lagrange interpolant: nodal values ``g(x_i)``; ``g`` takes ``(n, 2)``."""
        vals = np.asarray(g(self.nodes), dtype=float)
        if vals.shape == ():
            vals = np.full(self.n_nodes, float(vals))
        return vals


def evaluate(values, stencil: InterpolationStencil) -> float:
    return float(sum(w * values[k] for k, w in zip(stencil.nodes, stencil.weights)))


def locate(mesh: SimplicialMesh, p) -> InterpolationStencil:
    return mesh.locate(p)


def interpolate(mesh: SimplicialMesh, g) -> np.ndarray:
    return mesh.interpolate(g)


# ----------------------------------------------------------------------------
# construction
# ----------------------------------------------------------------------------

def build_mesh(domain, target_h: float) -> SimplicialMesh:
    """Mesh ``domain`` with triangle diameters at most ``target_h``.

    Node spacing is ``target_h / sqrt(2)``, so the structured square mesh has
    hypotenuse ``target_h``; the disk uses the same radial spacing.
    """
    if not 0 < target_h < domain.diameter:
        raise ValueError("target_h must lie in (0, diam)")
    if isinstance(domain, UnitDisk):
        n = int(np.ceil(np.sqrt(2.0) * domain.radius / target_h))
        while True:
            _check_budget(1 + 3 * n * (n + 1))
            mesh = _ring_disk(domain, n)
            if mesh.h <= target_h:
                break
            n += 1
    elif isinstance(domain, Polygon):
        mesh = _structured_rectangle(domain, target_h)
    else:
        raise TypeError(f"unsupported domain {domain!r}")
    mesh.nominal_h = target_h
    return mesh


def _check_budget(n_nodes):
    if n_nodes > MAX_NODES:
        raise MeshTooLarge(f"mesh would have {n_nodes} nodes (limit {MAX_NODES})")


def _ring_disk(domain: UnitDisk, n: int) -> SimplicialMesh:
    # ring m: 6m nodes on a hexagon of radius m/n blended toward the circle of
    # the same radius; pure hexagonal lattice at the center, circle at m = n
    cx, cy = domain.center
    r = domain.radius
    corners = np.column_stack([np.cos(np.pi * np.arange(7) / 3), np.sin(np.pi * np.arange(7) / 3)])
    pts = [np.array([[cx, cy]])]
    rings = [np.array([0])]
    count = 1
    for m in range(1, n + 1):
        k = 6 * m
        t = np.arange(k) / m
        side = np.floor(t).astype(int)
        frac = (t - side)[:, None]
        hexa = (1 - frac) * corners[side] + frac * corners[side + 1]
        ang = 2.0 * np.pi * np.arange(k) / k
        circ = np.column_stack([np.cos(ang), np.sin(ang)])
        s = (m / n) ** 2
        unit = (1 - s) * hexa + s * circ
        pts.append(np.array([cx, cy]) + (r * m / n) * unit)
        rings.append(np.arange(count, count + k))
        count += k
    nodes = np.concatenate(pts)
    # exact boundary placement, avoiding cos/sin round-off drift
    b = rings[n]
    d = nodes[b] - (cx, cy)
    nodes[b] = (cx, cy) + d * (r / np.hypot(d[:, 0], d[:, 1]))[:, None]

    tris = []
    for m in range(1, n + 1):
        inner, outer = rings[m - 1], rings[m]
        p, q = len(inner), len(outer)
        if p == 1:
            for j in range(q):
                tris.append((inner[0], outer[j], outer[(j + 1) % q]))
            continue
        i = j = 0
        while i < p or j < q:
            if j < q and (i == p or (j + 1) * p < (i + 1) * q):
                tris.append((inner[i % p], outer[j], outer[(j + 1) % q]))
                j += 1
            else:
                tris.append((inner[i], outer[j % q], inner[(i + 1) % p]))
                i += 1
    tris = _orient(nodes, np.array(tris, dtype=np.int64))
    cls = np.zeros(len(nodes), dtype=np.int8)
    cls[rings[n]] = BOUNDARY_EDGE
    return SimplicialMesh(nodes, tris, cls, domain=domain)


def _structured_rectangle(domain: Polygon, target_h: float) -> SimplicialMesh:
    v = domain.vertices
    lo, hi = v.min(axis=0), v.max(axis=0)
    corners = {(lo[0], lo[1]), (hi[0], lo[1]), (hi[0], hi[1]), (lo[0], hi[1])}
    if len(v) != 4 or {tuple(x) for x in v} != corners:
        raise NotImplementedError("polygon meshing supports axis-aligned rectangles only")
    # even cell counts keep the mesh symmetric about the center lines
    spacing = target_h / np.sqrt(2.0)
    nx = 2 * int(np.ceil((hi[0] - lo[0]) / (2 * spacing)))
    ny = 2 * int(np.ceil((hi[1] - lo[1]) / (2 * spacing)))
    _check_budget((nx + 1) * (ny + 1))
    xs = np.linspace(lo[0], hi[0], nx + 1)
    ys = np.linspace(lo[1], hi[1], ny + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.column_stack([gx.ravel(), gy.ravel()])
    idx = np.arange((nx + 1) * (ny + 1)).reshape(nx + 1, ny + 1)
    a = idx[:-1, :-1].ravel()
    b = idx[1:, :-1].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[:-1, 1:].ravel()
    tris = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    ii, jj = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="ij")
    on_x = (ii == 0) | (ii == nx)
    on_y = (jj == 0) | (jj == ny)
    cls = np.zeros(idx.shape, dtype=np.int8)
    cls[on_x | on_y] = BOUNDARY_EDGE
    cls[on_x & on_y] = BOUNDARY_VERTEX
    return SimplicialMesh(nodes, tris, cls.ravel(), domain=domain)


def _orient(nodes, tris):
    p = nodes[tris]
    a = p[:, 1] - p[:, 0]
    b = p[:, 2] - p[:, 0]
    neg = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0] < 0
    tris[neg] = tris[neg][:, [0, 2, 1]]
    return tris


# ----------------------------------------------------------------------------
# plain-text exchange format
# ----------------------------------------------------------------------------

_CLASS_NAMES = {INTERIOR: "interior", BOUNDARY_EDGE: "edge", BOUNDARY_VERTEX: "vertex"}
_CLASS_CODES = {v: k for k, v in _CLASS_NAMES.items()}


def write_mesh(mesh: SimplicialMesh, path) -> None:
    """``nodes N triangles M`` header, N lines ``x y class``, M lines ``i j k``."""
    with open(path, "w") as fh:
        fh.write(f"nodes {mesh.n_nodes} triangles {len(mesh.triangles)}\n")
        for (x, y), c in zip(mesh.nodes, mesh.node_class):
            fh.write(f"{float(x)!r} {float(y)!r} {_CLASS_NAMES[int(c)]}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"{i} {j} {k}\n")


def read_mesh(path, domain=None) -> SimplicialMesh:
    with open(path) as fh:
        head = fh.readline().split()
        if len(head) != 4 or head[0] != "nodes" or head[2] != "triangles":
            raise ValueError(f"{path}: bad header {' '.join(head)!r}")
        n, m = int(head[1]), int(head[3])
        nodes = np.empty((n, 2))
        cls = np.empty(n, dtype=np.int8)
        for i in range(n):
            x, y, c = fh.readline().split()
            nodes[i] = float(x), float(y)
            cls[i] = _CLASS_CODES[c]
        tris = np.array([fh.readline().split() for _ in range(m)], dtype=np.int64).reshape(m, 3)
    return SimplicialMesh(nodes, tris, cls, domain=domain)
