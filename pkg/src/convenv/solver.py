"""Howard's policy iteration for ``sup_alpha (B^alpha u - F^alpha) = 0``.

Control 0 at a node selects the obstacle row ``u_i = f_i``; control ``j >= 1``
selects ``-D_j u(x_i) = 0`` for stencil direction ``j - 1``. Nodes without a
stencil are Dirichlet rows ``u_i = g_i``.
"""
from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import Polygon, clip_step
from .mesh import BOUNDARY_VERTEX, SimplicialMesh
from .operator import DiscretizationParams, StencilTable, build_stencils

log = logging.getLogger(__name__)


class SingularSystem(RuntimeError):
    pass


class MaxIterationsExceeded(RuntimeError):
    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


@dataclass
class BellmanSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray


@dataclass
class SolveReport:
    u: np.ndarray
    policy: np.ndarray
    iterations: int
    linear_solves: int = 0
    residual_history: list = field(default_factory=list)
    policy_changes: list = field(default_factory=list)
    converged: bool = False
    monotone: bool = True
    wall_time: float = 0.0
    edge_report: "SolveReport | None" = None

    def summary(self) -> str:
        lines = [
            f"converged      {self.converged}",
            f"iterations     {self.iterations}",
            f"linear solves  {self.linear_solves}",
            f"monotone       {self.monotone}",
            f"final residual {self.residual_history[-1] if self.residual_history else float('nan'):.6e}",
            f"wall time [s]  {self.wall_time:.3f}",
            f"unknowns       {len(self.u)}",
        ]
        return "\n".join(lines) + "\n"

    def history_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["iter", "residual_norm", "policy_changes"])
            for k, (r, c) in enumerate(zip(self.residual_history, self.policy_changes)):
                wr.writerow([k, repr(float(r)), int(c)])


def assemble(policy, f, table: StencilTable, boundary_values=None) -> BellmanSystem:
    """Sparse ``B^alpha`` and ``F^alpha`` for a policy over the stencil rows."""
    f = np.asarray(f, dtype=float)
    g = f if boundary_values is None else np.asarray(boundary_values, dtype=float)
    N = table.n_total
    policy = np.asarray(policy)
    rhs = g.copy()
    rows_free = table.nodes
    rhs[rows_free] = f[rows_free]

    d = np.flatnonzero(policy > 0)
    j = policy[d] - 1
    rr = rows_free[d]
    K = table.idx.shape[2]
    other = np.ones(N, dtype=bool)
    other[rr] = False
    ident = np.flatnonzero(other)

    rows = np.concatenate([ident, np.repeat(rr, K), rr])
    cols = np.concatenate([ident, table.idx[d, j].ravel(), rr])
    vals = np.concatenate([np.ones(len(ident)), -table.coef[d, j].ravel(), -table.diag[d, j]])
    rhs[rr] = table.const[d, j]
    B = sp.csr_matrix((vals, (rows, cols)), shape=(N, N))
    B.sum_duplicates()
    B.eliminate_zeros()
    return BellmanSystem(B, rhs)


DIRECT_MAX_UNKNOWNS = 5000


def _solve_direct(B, F, target):
    try:
        lu = spla.splu(B)
    except RuntimeError as exc:
        raise SingularSystem(str(exc)) from exc
    u = lu.solve(F)
    for _ in range(3):
        r = F - B @ u
        if np.linalg.norm(r) <= target:
            break
        u = u + lu.solve(r)
    return u


def _solve_iterative(B, F, target, x0):
    """ILU-preconditioned GMRES; ``None`` when it misses ``target``."""
    try:
        ilu = spla.spilu(B, permc_spec="NATURAL", diag_pivot_thresh=0.0,
                         drop_tol=1e-4, fill_factor=10)
    except RuntimeError:
        return None
    M = spla.LinearOperator(B.shape, ilu.solve)
    u, _ = spla.gmres(B, F, x0=x0, M=M, rtol=0.0, atol=0.5 * target, restart=60, maxiter=40)
    if not np.all(np.isfinite(u)) or np.linalg.norm(F - B @ u) > target:
        return None
    return u


def solve_linear(system: BellmanSystem, rtol: float = 1e-12, method: str = "auto",
                 x0=None) -> np.ndarray:
    """Solve ``B u = F`` to a residual of ``rtol * (1 + |F|)`` after row equilibration.

    Rows are scaled to unit max-norm first: direction rows carry entries of
    size ``1 / delta_i**2``, which puts the unscaled round-off floor above the
    target on fine meshes.

    ``method`` is ``'direct'`` (sparse LU with iterative refinement),
    ``'iterative'`` (ILU + GMRES, falling back to LU) or ``'auto'``, which
    picks LU for small systems. Long coarse steps make LU fill grow quickly,
    so large systems go to GMRES, warm-started from ``x0``.
    """
    if method not in ("auto", "direct", "iterative"):
        raise ValueError(f"unknown linear solver {method!r}")
    A = system.matrix.tocsr()
    scale = 1.0 / np.maximum(abs(A).max(axis=1).toarray().ravel(), np.finfo(float).tiny)
    B = sp.diags(scale) @ A
    B = B.tocsc()
    F = scale * system.rhs
    target = rtol * (1.0 + np.linalg.norm(F))
    u = None
    if method == "iterative" or (method == "auto" and B.shape[0] > DIRECT_MAX_UNKNOWNS):
        u = _solve_iterative(B, F, target, x0)
        if u is None:
            log.info("GMRES missed the residual target, falling back to LU")
    if u is None:
        u = _solve_direct(B, F, target)
    if not np.all(np.isfinite(u)):
        raise SingularSystem("non-finite solution")
    return u


def _branches(u, f, table: StencilTable):
    """Values ``(B^a u - F^a)_i`` of every control at every stencil row: ``(n, S+1)``."""
    D = table.apply(u)
    out = np.empty((len(table.nodes), table.S + 1))
    out[:, 0] = u[table.nodes] - f[table.nodes]
    out[:, 1:] = -D
    return out


def improve_policy(u, f, table: StencilTable, current, tie_tol: float = 1e-13) -> np.ndarray:
    """Pointwise argmax of the Bellman branches; keep ``current`` on near-ties.

    Ties are judged relative to the round-off scale of each row,
    ``1 + max_j |diag_j| * max |u|``.
    """
    u = np.asarray(u, float)
    vals = _branches(u, np.asarray(f, float), table)
    best = vals.argmax(axis=1)
    rows = np.arange(len(best))
    current = np.asarray(current)
    scale = 1.0 + np.abs(table.diag).max(axis=1) * np.abs(u).max(initial=0.0)
    keep = vals[rows, current] >= vals[rows, best] - tie_tol * scale
    return np.where(keep, current, best)


def bellman_residual(u, f, table: StencilTable) -> np.ndarray:
    """``sup_alpha (B^alpha u - F^alpha)`` at stencil rows (``= -T[u; f]``)."""
    return _branches(np.asarray(u, float), np.asarray(f, float), table).max(axis=1)


def howard_solve(f, table: StencilTable, boundary_values=None, initial_policy=None,
                 max_iter: int = 100, rtol: float = 1e-10, tie_tol: float = 1e-13,
                 monotone_tol: float = 1e-10, linear_solver: str = "auto") -> SolveReport:
    """Policy iteration starting from the all-obstacle policy (``u_0 = f``).

    Stops when the policy repeats or the nodal 2-norm of the residual drops
    below ``rtol`` times that of ``T[f; f]``. ``iterations`` counts policy
    updates, i.e. the index ``n`` of the accepted iterate ``u_n``; the solve
    for the starting policy is included only in ``linear_solves``. ``linear_solver`` is passed to
    :func:`solve_linear` as ``method``. Raises
    :class:`MaxIterationsExceeded` after ``max_iter`` policy updates.
    """
    t0 = time.perf_counter()
    f = np.asarray(f, dtype=float)
    g = f if boundary_values is None else np.asarray(boundary_values, dtype=float)
    n = len(table.nodes)
    policy = np.zeros(n, dtype=np.int64) if initial_policy is None else np.asarray(initial_policy, np.int64).copy()
    f0 = f.copy()
    free = np.ones(len(f), bool)
    free[table.nodes] = False
    f0[free] = g[free]
    ref = np.linalg.norm(bellman_residual(f0, f, table))
    threshold = rtol * ref

    report = SolveReport(u=f0, policy=policy, iterations=0)
    u_prev = None
    for it in range(max_iter + 1):
        u = solve_linear(assemble(policy, f, table, g), method=linear_solver, x0=u_prev)
        if u_prev is not None and np.any(u > u_prev + monotone_tol):
            report.monotone = False
        res = np.linalg.norm(bellman_residual(u, f, table))
        new = improve_policy(u, f, table, policy, tie_tol=tie_tol)
        changes = int(np.count_nonzero(new != policy))
        report.residual_history.append(res)
        report.policy_changes.append(changes)
        report.u, report.policy = u, policy
        report.iterations, report.linear_solves = it, it + 1
        if changes == 0 or res <= threshold:
            report.converged = True
            break
        policy, u_prev = new, u
    else:
        report.wall_time = time.perf_counter() - t0
        raise MaxIterationsExceeded(f"no convergence in {max_iter} policy updates", report)
    if res > threshold:
        log.warning("policy is stable but residual %.3e exceeds %.3e", res, threshold)
    report.wall_time = time.perf_counter() - t0
    return report


# ----------------------------------------------------------------------------
# convex polygons: edge subproblems, then the interior
# ----------------------------------------------------------------------------

def build_edge_stencils(mesh: SimplicialMesh, delta: float, tol: float = 1e-12) -> StencilTable:
    """One-direction stencils along the polygon edge through each edge node.

    The step at ``x_i`` is the largest ``delta_i <= delta`` with
    ``x_i +- delta_i e`` in the closed polygon; values at the offsets are the
    P1 trace on the edge.
    """
    domain = mesh.domain
    if not isinstance(domain, Polygon):
        raise TypeError("edge stencils need a polygonal domain")
    bnodes = mesh.boundary
    rows_n, rows_idx, rows_w, rows_step = [], [], [], []
    for a, b in domain.edges:
        L = float(np.hypot(*(b - a)))
        e = (b - a) / L
        nrm = np.array([-e[1], e[0]])
        x = mesh.nodes[bnodes]
        on = np.abs((x - a) @ nrm) <= tol * max(1.0, L)
        t = (x - a) @ e
        on &= (t >= -tol) & (t <= L + tol)
        ids = bnodes[on]
        order = np.argsort(t[on])
        ids, ts = ids[order], t[on][order]
        inner = mesh.node_class[ids] != BOUNDARY_VERTEX
        if len(ids) < 3 or not inner.any():
            continue
        xs = mesh.nodes[ids[inner]]
        step = clip_step(domain, xs, e, delta, mode="symmetric")
        if np.any(step <= 0):
            raise AssertionError("edge node without room along its edge")
        tin = ts[inner]
        idx = np.empty((len(xs), 1, 4), dtype=np.int64)
        w = np.empty((len(xs), 1, 4))
        for side, sgn in enumerate((1.0, -1.0)):
            tq = np.clip(tin + sgn * step, ts[0], ts[-1])
            hi = np.clip(np.searchsorted(ts, tq, side="left"), 1, len(ts) - 1)
            lo = hi - 1
            lam = (tq - ts[lo]) / (ts[hi] - ts[lo])
            idx[:, 0, 2 * side] = ids[lo]
            idx[:, 0, 2 * side + 1] = ids[hi]
            w[:, 0, 2 * side] = 1.0 - lam
            w[:, 0, 2 * side + 1] = lam
        rows_n.append(ids[inner])
        rows_idx.append(idx)
        rows_w.append(w / step[:, None, None] ** 2)
        rows_step.append(step)
    nodes = np.concatenate(rows_n)
    step = np.concatenate(rows_step)
    diag = (-2.0 / step ** 2)[:, None]
    return StencilTable(mesh.n_nodes, nodes, np.concatenate(rows_idx), np.concatenate(rows_w),
                        diag, np.zeros_like(diag), step)


def solve_polytope(f, mesh: SimplicialMesh, params: DiscretizationParams, dirs,
                   edge_delta: float | None = None, **opts) -> SolveReport:
    """Envelope on a convex polygon, where ``u = f`` holds only at the corners.

    The trace on each edge is the one-dimensional discrete envelope of ``f``
    along that edge; the interior problem then uses that trace as Dirichlet
    data.

    Parameters
    ----------
    edge_delta : float, optional
        Step cap for the edge problems. Defaults to ``params.h``: an edge
        problem is one-dimensional and needs no second scale, while a step of
        ``params.delta`` leaves an ``O(delta^2)`` error on the boundary that
        dominates the interior error.
    """
    f = np.asarray(f, dtype=float)
    edge_table = build_edge_stencils(mesh, params.h if edge_delta is None else edge_delta)
    edge = howard_solve(f, edge_table, **opts)
    g = f.copy()
    g[mesh.boundary] = edge.u[mesh.boundary]
    table = build_stencils(mesh, params, dirs)
    inner = howard_solve(f, table, boundary_values=g, **opts)
    inner.edge_report = edge
    inner.wall_time += edge.wall_time
    return inner
