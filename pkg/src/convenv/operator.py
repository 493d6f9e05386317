"""The two-scale operator on a triangular mesh.

Second differences are stored in a linear stencil form shared by every
discretization in the package::

    D[r, j] = sum_k coef[r, j, k] * u[idx[r, j, k]] + diag[r, j] * u[nodes[r]] + const[r, j]

for the ``r``-th unknown node ``nodes[r]`` and control direction ``j``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .directions import AngularDirectionSet
from .mesh import SimplicialMesh


@dataclass(frozen=True)
class DiscretizationParams:
    """Fine scale ``h``, coarse scale ``delta`` and angular resolution ``theta``."""

    h: float
    delta: float
    theta: float

    def __post_init__(self):
        if self.delta < self.h:
            raise ValueError("delta must be >= h")
        if not 0 < self.theta <= 1:
            raise ValueError("theta must lie in (0, 1]")


@dataclass(eq=False)
class StencilTable:
    """Linear second-difference stencils for a set of unknown nodes.

    ``step`` is the per-node step length (``delta_i``); ``points`` optionally
    keeps the offset evaluation points ``(n, S, 2, 2)`` for diagnostics.
    """

    n_total: int
    nodes: np.ndarray
    idx: np.ndarray
    coef: np.ndarray
    diag: np.ndarray
    const: np.ndarray
    step: np.ndarray
    points: np.ndarray | None = None
    row_of: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.nodes = np.ascontiguousarray(self.nodes, dtype=np.int64)
        self.idx = np.ascontiguousarray(self.idx, dtype=np.int32)
        self.coef = np.ascontiguousarray(self.coef, dtype=float)
        self.diag = np.ascontiguousarray(self.diag, dtype=float)
        self.const = np.ascontiguousarray(self.const, dtype=float)
        self.row_of = np.full(self.n_total, -1, dtype=np.int64)
        self.row_of[self.nodes] = np.arange(len(self.nodes))

    @property
    def S(self) -> int:
        return self.idx.shape[1]

    def apply(self, u) -> np.ndarray:
        """All second differences ``(n_rows, S)`` of the nodal vector ``u``."""
        return kernels.stencil_apply(u, self.nodes, self.idx, self.coef, self.diag, self.const)


NodeStencilTable = StencilTable


def build_stencils(mesh: SimplicialMesh, params: DiscretizationParams,
                   dirs: AngularDirectionSet, keep_points: bool = False,
                   chunk: int = 4096) -> StencilTable:
    """Clip the coarse step at each interior node and locate ``x_i +- delta_i v_j``.

    ``delta_i = min(delta, dist(x_i, boundary of the meshed region))``.
    """
    nodes = mesh.interior
    x = mesh.nodes[nodes]
    step = np.minimum(params.delta, mesh.distance_to_boundary(x))
    if np.any(step <= 0):
        raise AssertionError("interior node on the mesh boundary")
    n, S = len(nodes), dirs.S
    v = dirs.directions
    idx = np.empty((n, S, 6), dtype=np.int32)
    coef = np.empty((n, S, 6))
    points = np.empty((n, S, 2, 2)) if keep_points else None
    for s in range(0, n, chunk):
        sl = slice(s, s + chunk)
        offs = step[sl, None, None] * v[None, :, :]
        pts = np.stack([x[sl, None, :] + offs, x[sl, None, :] - offs], axis=2)
        tri_nodes, lam = mesh.locate_many(pts.reshape(-1, 2))
        # round-off can leave weights of order -1e-16 on edges; clipping keeps
        # the assembled matrices M-matrices
        lam = np.maximum(lam, 0.0)
        lam /= lam.sum(axis=1, keepdims=True)
        m = len(pts)
        idx[sl] = tri_nodes.reshape(m, S, 6)
        coef[sl] = lam.reshape(m, S, 6) / step[sl, None, None] ** 2
        if keep_points:
            points[sl] = pts
    diag = np.repeat((-2.0 / step ** 2)[:, None], S, axis=1)
    const = np.zeros((n, S))
    return StencilTable(mesh.n_nodes, nodes, idx, coef, diag, const, step, points=points)


def second_difference(w, table: StencilTable, node: int, direction: int) -> float:
    """Centered second difference of ``w`` at mesh node ``node`` along direction ``direction``."""
    r = table.row_of[node]
    if r < 0:
        raise ValueError(f"node {node} has no stencil (boundary node)")
    w = np.asarray(w, dtype=float)
    k = table.idx[r, direction]
    return float(table.coef[r, direction] @ w[k] + table.diag[r, direction] * w[node]
                 + table.const[r, direction])


@dataclass
class ResidualReport:
    """Per-node residual and the control attaining it.

    ``control`` is 0 for the obstacle branch, ``j + 1`` for direction ``j``
    and -1 for Dirichlet (boundary) nodes.
    """

    residual: np.ndarray
    control: np.ndarray

    @property
    def max_norm(self) -> float:
        return float(np.abs(self.residual).max()) if len(self.residual) else 0.0

    @property
    def l2_norm(self) -> float:
        return float(np.linalg.norm(self.residual))

    def to_csv(self, path, coords) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["node_id", "x", "y", "residual", "active_control"])
            for i, ((x, y), r, c) in enumerate(zip(coords, self.residual, self.control)):
                wr.writerow([i, repr(float(x)), repr(float(y)), repr(float(r)), int(c)])


def residual(w, f, table: StencilTable, boundary_values=None) -> ResidualReport:
    """``min{f - w, min_j D_j w}`` at stencil nodes, ``g - w`` elsewhere.

    ``g`` defaults to ``f``. Ties go to the obstacle branch.
    """
    w = np.asarray(w, dtype=float)
    f = np.asarray(f, dtype=float)
    g = f if boundary_values is None else np.asarray(boundary_values, dtype=float)
    res = g - w
    ctrl = np.full(len(w), -1, dtype=np.int64)
    D = table.apply(w)
    j = D.argmin(axis=1)
    dmin = D[np.arange(len(j)), j]
    obst = f[table.nodes] - w[table.nodes]
    take_obst = obst <= dmin
    res[table.nodes] = np.where(take_obst, obst, dmin)
    ctrl[table.nodes] = np.where(take_obst, 0, j + 1)
    return ResidualReport(res, ctrl)


def is_discretely_convex(w, table: StencilTable, tol: float = 1e-9) -> bool:
    return bool(np.all(table.apply(w) >= -tol))


def contact_set(u_eps, f, tol: float) -> np.ndarray:
    """Indices of nodes where ``f - u_eps <= tol``."""
    return np.flatnonzero(np.asarray(f) - np.asarray(u_eps) <= tol)


# ----------------------------------------------------------------------------
# barrier functions (diagnostics only)
# ----------------------------------------------------------------------------

def build_barrier_q(mesh: SimplicialMesh, x0) -> np.ndarray:
    """Interpolant of ``|x - x0|^2 / 2 - R^2 / 2`` with ``R = diam(domain)``."""
    R = mesh.domain.diameter
    x0 = np.asarray(x0, dtype=float)
    return mesh.interpolate(lambda p: 0.5 * ((p - x0) ** 2).sum(-1) - 0.5 * R ** 2)


def eta_profile(t, delta: float, k: int, alpha: float, d: int = 2):
    """Convex nonincreasing boundary-layer profile with ``eta(0) = 0``.

    ``eta'' = 2**(4-k-alpha) t**(k+alpha-2)`` on ``(0, 2 d delta)``, constant beyond.
    """
    s = k + alpha
    t = np.asarray(t, dtype=float)
    L = 2.0 * d * delta
    tc = np.minimum(t, L)
    if abs(s - 1.0) < 1e-14:
        with np.errstate(divide="ignore", invalid="ignore"):
            inner = 8.0 * tc * (np.log(tc) - np.log(L) - 1.0)
        inner = np.where(tc > 0, inner, 0.0)
        outer = -16.0 * d * delta
    else:
        inner = 2.0 ** (4 - s) / (s - 1.0) * (tc ** s / s - L ** (s - 1.0) * tc)
        outer = -16.0 / s * (d * delta) ** s
    return np.where(t > L, outer, inner)


def build_barrier_p(mesh: SimplicialMesh, delta: float, k: int, alpha: float, d: int = 2) -> np.ndarray:
    if k not in (0, 1) or not 0 < alpha <= 1:
        raise ValueError("need k in {0, 1} and alpha in (0, 1]")
    dist = mesh.distance_to_boundary()
    dist[mesh.boundary] = 0.0
    return eta_profile(dist, delta, k, alpha, d)
