"""Hot loops: triangle location and batched stencil evaluation.

Each kernel has a numba implementation and a pure-numpy twin producing the
same result. ``CE_DISABLE_NUMBA=1`` in the environment (or numba missing)
selects the numpy path; :data:`USE_NUMBA` reports the active choice.
"""
from __future__ import annotations

import os
import warnings

import numpy as np

try:
    from numba import njit
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

USE_NUMBA = _HAVE_NUMBA and os.environ.get("CE_DISABLE_NUMBA", "0") not in ("1", "true", "yes")

if not _HAVE_NUMBA and os.environ.get("CE_DISABLE_NUMBA") is None:  # pragma: no cover
    warnings.warn("numba not importable, using the numpy kernels")

# barycentric acceptance: inside if every weight >= -INSIDE_TOL
INSIDE_TOL = 1e-12
# locate() snaps points that are at most this far outside a triangle
SNAP_DIST = 1e-10

_CHUNK = 1 << 16


# ----------------------------------------------------------------------------
# point location
# ----------------------------------------------------------------------------

def _locate_numpy(points, cell_of, cand, origin, tinv, alt):
    """Padded-candidate vectorized search; mirrors ``_locate_numba``."""
    n = len(points)
    tri_out = np.full(n, -1, dtype=np.int64)
    lam_out = np.zeros((n, 3))
    for s in range(0, n, _CHUNK):
        p = points[s:s + _CHUNK]
        c = cand[cell_of[s:s + _CHUNK]]                      # (q, m)
        valid = c >= 0
        cc = np.where(valid, c, 0)
        d = p[:, None, :] - origin[cc]                       # (q, m, 2)
        l1 = tinv[cc, 0, 0] * d[..., 0] + tinv[cc, 0, 1] * d[..., 1]
        l2 = tinv[cc, 1, 0] * d[..., 0] + tinv[cc, 1, 1] * d[..., 1]
        l0 = 1.0 - l1 - l2
        lam = np.stack([l0, l1, l2], axis=-1)                # (q, m, 3)
        lmin = lam.min(axis=-1)
        score = (lam * alt[cc]).min(axis=-1)
        lmin = np.where(valid, lmin, -np.inf)
        score = np.where(valid, score, -np.inf)
        inside = lmin >= -INSIDE_TOL
        has_inside = inside.any(axis=1)
        pick = np.where(has_inside, inside.argmax(axis=1), score.argmax(axis=1))
        rows = np.arange(len(p))
        ok = has_inside | (score[rows, pick] >= -SNAP_DIST)
        chosen = lam[rows, pick]
        snap = ~has_inside & ok
        if snap.any():
            cl = np.maximum(chosen[snap], 0.0)
            chosen[snap] = cl / cl.sum(axis=1, keepdims=True)
        tri_out[s:s + _CHUNK] = np.where(ok, cc[rows, pick], -1)
        lam_out[s:s + _CHUNK] = np.where(ok[:, None], chosen, 0.0)
    return tri_out, lam_out


def _locate_numba_impl(points, cell_of, start, flat, origin, tinv, alt):
    n = points.shape[0]
    tri_out = np.full(n, -1, dtype=np.int64)
    lam_out = np.zeros((n, 3))
    lam = np.empty(3)
    best = np.empty(3)
    for q in range(n):
        px = points[q, 0]
        py = points[q, 1]
        cell = cell_of[q]
        best_score = -np.inf
        best_t = -1
        found = False
        for k in range(start[cell], start[cell + 1]):
            t = flat[k]
            dx = px - origin[t, 0]
            dy = py - origin[t, 1]
            l1 = tinv[t, 0, 0] * dx + tinv[t, 0, 1] * dy
            l2 = tinv[t, 1, 0] * dx + tinv[t, 1, 1] * dy
            l0 = 1.0 - l1 - l2
            lam[0] = l0
            lam[1] = l1
            lam[2] = l2
            lmin = min(l0, min(l1, l2))
            if lmin >= -INSIDE_TOL:
                tri_out[q] = t
                lam_out[q, 0] = l0
                lam_out[q, 1] = l1
                lam_out[q, 2] = l2
                found = True
                break
            score = min(l0 * alt[t, 0], min(l1 * alt[t, 1], l2 * alt[t, 2]))
            if score > best_score:
                best_score = score
                best_t = t
                best[0] = l0
                best[1] = l1
                best[2] = l2
        if not found and best_t >= 0 and best_score >= -SNAP_DIST:
            tot = 0.0
            for r in range(3):
                if best[r] < 0.0:
                    best[r] = 0.0
                tot += best[r]
            tri_out[q] = best_t
            for r in range(3):
                lam_out[q, r] = best[r] / tot
    return tri_out, lam_out


# ----------------------------------------------------------------------------
# batched second differences
# ----------------------------------------------------------------------------

def _stencil_apply_numpy(u, nodes, idx, coef, diag, const):
    """``D[r, j] = sum_k coef[r,j,k] u[idx[r,j,k]] + diag[r,j] u[nodes[r]] + const[r,j]``."""
    return (coef * u[idx]).sum(axis=-1) + diag * u[nodes][:, None] + const


def _stencil_apply_numba_impl(u, nodes, idx, coef, diag, const):
    n, s, m = idx.shape
    out = np.empty((n, s))
    for r in range(n):
        ui = u[nodes[r]]
        for j in range(s):
            acc = 0.0
            for k in range(m):
                acc += coef[r, j, k] * u[idx[r, j, k]]
            out[r, j] = acc + diag[r, j] * ui + const[r, j]
    return out


if _HAVE_NUMBA:
    _locate_numba = njit(cache=True)(_locate_numba_impl)
    _stencil_apply_numba = njit(cache=True)(_stencil_apply_numba_impl)
else:  # pragma: no cover
    _locate_numba = _locate_numba_impl
    _stencil_apply_numba = _stencil_apply_numba_impl


def locate_points(points, locator, use_numba: bool | None = None):
    """Find a containing triangle and barycentric weights for each point.

    Returns ``(tri, lam)``; ``tri[q] == -1`` marks points outside the mesh by
    more than :data:`SNAP_DIST`.
    """
    use_numba = USE_NUMBA if use_numba is None else use_numba
    points = np.ascontiguousarray(points, dtype=float).reshape(-1, 2)
    cell_of = locator.cells_of(points)
    if use_numba:
        return _locate_numba(points, cell_of, locator.start, locator.flat,
                             locator.origin, locator.tinv, locator.alt)
    return _locate_numpy(points, cell_of, locator.padded, locator.origin,
                         locator.tinv, locator.alt)


def stencil_apply(u, nodes, idx, coef, diag, const, use_numba: bool | None = None):
    use_numba = USE_NUMBA if use_numba is None else use_numba
    u = np.ascontiguousarray(u, dtype=float)
    if use_numba:
        return _stencil_apply_numba(u, nodes, idx, coef, diag, const)
    return _stencil_apply_numpy(u, nodes, idx, coef, diag, const)
