"""Wide-stencil scheme on a Cartesian grid with boundary-clipped differences.

For a lattice direction ``v`` and grid node ``x``::

    D(x; v) = 2 / ((rp + rm) |v|^2) * ((w(x + rp v) - w(x)) / rp + (w(x - rm v) - w(x)) / rm)

where ``rp, rm`` are the largest numbers in ``(0, 1]`` keeping ``x +- r v`` in
the closed domain. Clipped endpoints carry Dirichlet data.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .directions import LatticeDirectionSet
from .geometry import GEOM_TOL, _signed_depth, clip_step, contains
from .operator import StencilTable
from .solver import howard_solve


@dataclass(eq=False)
class CartesianGrid:
    """Lattice points ``h Z^2`` strictly inside the domain, in lexicographic order."""

    domain: object
    h: float
    ij: np.ndarray
    nodes: np.ndarray

    def __post_init__(self):
        self._lo = self.ij.min(axis=0)
        shape = self.ij.max(axis=0) - self._lo + 1
        self._table = np.full(shape, -1, dtype=np.int64)
        self._table[tuple((self.ij - self._lo).T)] = np.arange(len(self.ij))

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def index(self, ij) -> np.ndarray:
        """Node index of each lattice coordinate pair, -1 when not a grid node."""
        k = np.asarray(ij, dtype=np.int64).reshape(-1, 2) - self._lo
        ok = np.all((k >= 0) & (k < self._table.shape), axis=1)
        out = np.full(len(k), -1, dtype=np.int64)
        out[ok] = self._table[k[ok, 0], k[ok, 1]]
        return out

    def to_csv(self, path, u) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["i", "j", "x", "y", "u"])
            for (i, j), (x, y), val in zip(self.ij, self.nodes, u):
                wr.writerow([int(i), int(j), repr(float(x)), repr(float(y)), repr(float(val))])


def build_grid(domain, h: float) -> CartesianGrid:
    if not 0 < h <= domain.diameter / 4:
        raise ValueError("h must lie in (0, diam/4]")
    lo, hi = domain.bbox
    i = np.arange(int(np.floor(lo[0] / h)), int(np.ceil(hi[0] / h)) + 1)
    j = np.arange(int(np.floor(lo[1] / h)), int(np.ceil(hi[1] / h)) + 1)
    gi, gj = np.meshgrid(i, j, indexing="ij")
    ij = np.column_stack([gi.ravel(), gj.ravel()])
    pts = h * ij.astype(float)
    strict = _signed_depth(domain, pts) > GEOM_TOL
    if not strict.any():
        raise ValueError("grid has no interior nodes")
    return CartesianGrid(domain, h, ij[strict], pts[strict])


@dataclass(eq=False)
class WideStencil:
    """Per node and direction: clip factors, endpoints, and grid neighbors (-1 = boundary point)."""

    grid: CartesianGrid
    dirs: LatticeDirectionSet
    rho: np.ndarray        # (n, S, 2): rho_plus, rho_minus
    endpoints: np.ndarray  # (n, S, 2, 2)
    neighbor: np.ndarray   # (n, S, 2)


def build_wide_stencil(grid: CartesianGrid, dirs: LatticeDirectionSet) -> WideStencil:
    if not np.isclose(dirs.h, grid.h):
        raise ValueError("direction set and grid use different h")
    n, S = grid.n_nodes, dirs.S
    x = grid.nodes
    lengths = dirs.lengths
    unit = dirs.directions / lengths[:, None]
    rho = np.empty((n, S, 2))
    ends = np.empty((n, S, 2, 2))
    nbr = np.full((n, S, 2), -1, dtype=np.int64)
    for j in range(S):
        for side, sgn in enumerate((1.0, -1.0)):
            t = clip_step(grid.domain, x, sgn * unit[j], lengths[j], mode="one_sided")
            r = t / lengths[j]
            full = r >= 1.0 - 1e-12
            r = np.where(full, 1.0, r)
            rho[:, j, side] = r
            ends[:, j, side] = x + sgn * r[:, None] * dirs.directions[j]
            step = grid.ij + int(sgn) * dirs.steps[j]
            cand = grid.index(step[full])
            nbr[np.flatnonzero(full), j, side] = cand
            # exact lattice endpoints, no round-off from the clip
            ends[full, j, side] = grid.h * step[full]
    return WideStencil(grid, dirs, rho, ends, nbr)


def wide_table(stencil: WideStencil, g) -> StencilTable:
    """Linear stencils with Dirichlet data ``g`` (callable) at boundary endpoints."""
    n, S = stencil.neighbor.shape[:2]
    L2 = stencil.dirs.lengths ** 2
    rp, rm = stencil.rho[..., 0], stencil.rho[..., 1]
    base = 2.0 / ((rp + rm) * L2[None, :])
    a = np.stack([base / rp, base / rm], axis=-1)              # (n, S, 2)
    nodes = np.arange(n)
    is_b = stencil.neighbor < 0
    gvals = np.zeros((n, S, 2))
    if is_b.any():
        gvals[is_b] = np.asarray(g(stencil.endpoints[is_b]), dtype=float)
    idx = np.where(is_b, nodes[:, None, None], stencil.neighbor)
    coef = np.where(is_b, 0.0, a)
    const = (a * gvals * is_b).sum(axis=-1)
    diag = -a.sum(axis=-1)
    return StencilTable(n, nodes, idx, coef, diag, const, step=np.full(n, stencil.dirs.delta))


def wide_second_difference(w, g, stencil: WideStencil, node: int, direction: int) -> float:
    """Clipped second difference of grid values ``w`` with boundary data ``g``."""
    vals = []
    for side in range(2):
        k = stencil.neighbor[node, direction, side]
        vals.append(w[k] if k >= 0 else float(np.asarray(g(stencil.endpoints[node, direction, side][None]))[0]))
    rp, rm = stencil.rho[node, direction]
    L2 = stencil.dirs.lengths[direction] ** 2
    return 2.0 / ((rp + rm) * L2) * ((vals[0] - w[node]) / rp + (vals[1] - w[node]) / rm)


def wide_howard_solve(f, grid: CartesianGrid, dirs: LatticeDirectionSet, **opts):
    """Solve ``min{f - u, min_v D(x; v) u} = 0`` at the grid nodes, ``u = f`` on the boundary.

    ``f`` is a callable on ``(n, 2)`` points. Returns ``(report, table)``.
    """
    stencil = build_wide_stencil(grid, dirs)
    table = wide_table(stencil, f)
    fv = np.asarray(f(grid.nodes), dtype=float)
    return howard_solve(fv, table, **opts), table


def endpoints_inside(stencil: WideStencil, tol: float = GEOM_TOL) -> bool:
    return bool(np.all(contains(stencil.grid.domain, stencil.endpoints.reshape(-1, 2), tol)))
