"""Reference problems with closed-form envelopes, and a sampling oracle.

All callables take points as ``(n, 2)`` arrays and return ``(n,)`` arrays.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import bisect
from scipy.spatial import ConvexHull, QhullError

from . import kernels
from .geometry import Polygon, UnitDisk, contains, square
from .mesh import BucketLocator

TWO_PI = 2.0 * np.pi


def _alpha_eq(a):
    return np.cos(TWO_PI * a) - TWO_PI * np.sin(TWO_PI * a) * (1.0 - a) - 1.0


def _beta_eq(b):
    return -np.cos(np.pi * b) + np.pi * np.sin(np.pi * b) * (1.0 - b) - 1.0


def _bisect(fun, lo, hi):
    if np.sign(fun(lo)) == np.sign(fun(hi)):
        raise ArithmeticError("root not bracketed")
    return bisect(fun, lo, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps, maxiter=200)


def solve_alpha_star() -> float:
    """Tangency radius of the first example, in ``(0.5, 0.75)``."""
    return _bisect(_alpha_eq, 0.5, 0.75)


def solve_beta_star() -> float:
    """Half-length of the boundary contact segments of the fourth example."""
    return _bisect(_beta_eq, 0.0, 0.5)


ALPHA_STAR = solve_alpha_star()
BETA_STAR = solve_beta_star()


def _radius(p):
    p = np.atleast_2d(p)
    return np.hypot(p[:, 0], p[:, 1])


@dataclass(frozen=True)
class ExampleProblem:
    """A test function with known envelope.

    ``orders`` maps a coarse-scale exponent ``a`` (``delta ~ h^a``) to the
    convergence order reported for it.
    """

    id: str
    domain: object
    f: Callable
    u_exact: Callable
    lip_f: float
    lip_u: float
    regularity: str
    constants: dict = field(default_factory=dict)
    orders: dict = field(default_factory=dict)


# -- example 1: smooth radial data, C^{1,1} envelope -------------------------

def _f1(p):
    return np.cos(TWO_PI * _radius(p))


def _u1(p):
    r = _radius(p)
    a = ALPHA_STAR
    tangent = np.cos(TWO_PI * a) - TWO_PI * np.sin(TWO_PI * a) * (r - a)
    # flat value is cos(pi) = -1: the envelope is continuous at |x| = 1/2
    return np.where(r <= 0.5, -1.0, np.where(r <= a, np.cos(TWO_PI * r), tangent))


# -- example 2: piecewise linear radial data, Lipschitz envelope -------------

def _f2(p):
    r = _radius(p)
    return np.select([r < 0.25, r < 0.5, r < 0.75], [1 - 4 * r, 4 * r - 1, 2 - 2 * r], 2 * r - 1)


def _u2(p):
    r = _radius(p)
    return np.select([r < 0.25, r < 0.75], [0.0 * r, r - 0.25], 2 * r - 1)


# -- example 3: saddle on the square -----------------------------------------

def _f3(p):
    p = np.atleast_2d(p)
    return p[:, 0] * p[:, 1]


def _u3(p):
    p = np.atleast_2d(p)
    return np.abs(p[:, 0] + p[:, 1]) - 1.0


# -- example 4: boundary trace not convex ------------------------------------

def _f4(p):
    p = np.atleast_2d(p)
    return np.cos(np.pi * p[:, 0]) * np.cos(np.pi * p[:, 1])


def _u4(p):
    p = np.atleast_2d(p)
    s = np.abs(p[:, 0]) + np.abs(p[:, 1])
    b = BETA_STAR
    line = -np.cos(np.pi * b) + np.pi * np.sin(np.pi * b) * (s - 1.0 - b)
    return np.select([s <= 1.0, s <= 1.0 + b], [-np.ones_like(s), -np.cos(np.pi * (s - 1.0))], line)


EXAMPLES = {
    "ex1": ExampleProblem(
        "ex1", UnitDisk(), _f1, _u1, lip_f=TWO_PI,
        lip_u=float(-TWO_PI * np.sin(TWO_PI * ALPHA_STAR)), regularity="C1,1",
        constants={"alpha_star": ALPHA_STAR},
        orders={1 / 3: 0.67, 1 / 2: 0.99, 2 / 3: 1.30, 1.0: 0.07}),
    "ex2": ExampleProblem(
        "ex2", UnitDisk(), _f2, _u2, lip_f=4.0, lip_u=2.0, regularity="C0,1",
        orders={1 / 3: 0.78, 1 / 2: 0.96, 2 / 3: 1.06, 1.0: 0.74}),
    "ex3": ExampleProblem(
        "ex3", square(), _f3, _u3, lip_f=np.sqrt(2.0), lip_u=np.sqrt(2.0), regularity="C0,1",
        orders={1 / 3: 0.58, 1 / 2: 0.45, 2 / 3: 0.41, 1.0: 0.03}),
    "ex4": ExampleProblem(
        "ex4", square(), _f4, _u4, lip_f=np.pi * np.sqrt(2.0),
        lip_u=float(np.pi * np.sin(np.pi * BETA_STAR) * np.sqrt(2.0)), regularity="C0,1",
        constants={"beta_star": BETA_STAR},
        orders={1 / 3: 1.30, 1 / 2: 1.04, 2 / 3: 0.91, 1.0: 0.20}),
}


def get_example(name: str) -> ExampleProblem:
    try:
        return EXAMPLES[name.lower()]
    except KeyError:
        raise KeyError(f"unknown example {name!r}; choose from {sorted(EXAMPLES)}") from None


def exact_u(example, p):
    ex = get_example(example) if isinstance(example, str) else example
    return ex.u_exact(np.atleast_2d(np.asarray(p, dtype=float)))


# ----------------------------------------------------------------------------
# brute-force oracle: lower convex hull of the lifted samples
# ----------------------------------------------------------------------------

@dataclass
class SampledEnvelope:
    points: np.ndarray
    f: np.ndarray
    values: np.ndarray
    spacing: float
    on_boundary: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["x", "y", "f", "u_oracle"])
            for (x, y), fv, uv in zip(self.points, self.f, self.values):
                wr.writerow([repr(float(x)), repr(float(y)), repr(float(fv)), repr(float(uv))])


def sample_domain(domain, n: int):
    """Uniform ``n x n`` samples of the bounding box inside ``domain``, plus a boundary ring.

    Returns ``(points, on_boundary, spacing)``.
    """
    if n < 8:
        raise ValueError("need at least 8 samples per axis")
    lo, hi = domain.bbox
    xs = np.linspace(lo[0], hi[0], n)
    ys = np.linspace(lo[1], hi[1], n)
    spacing = float(max(xs[1] - xs[0], ys[1] - ys[0]))
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    if isinstance(domain, UnitDisk):
        c = np.asarray(domain.center)
        inside = _radius(pts - c) < domain.radius - 0.25 * spacing
        pts = pts[inside]
        m = int(np.ceil(TWO_PI * domain.radius / spacing))
        ang = TWO_PI * np.arange(m) / m
        ring = c + domain.radius * np.column_stack([np.cos(ang), np.sin(ang)])
        on_b = np.r_[np.zeros(len(pts), bool), np.ones(m, bool)]
        pts = np.vstack([pts, ring])
    elif isinstance(domain, Polygon):
        pts = pts[contains(domain, pts)]
        depth = (domain.offsets - pts @ domain.normals.T).min(axis=1)
        on_b = depth <= 1e-12
    else:
        raise TypeError(f"unsupported domain {domain!r}")
    return pts, on_b, spacing


def lower_hull_values(points, values) -> np.ndarray:
    """Convex envelope of the point cloud ``(points, values)`` read back at ``points``."""
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float)
    lifted = np.column_stack([points, values])
    try:
        hull = ConvexHull(lifted)
    except QhullError:
        # flat lifted set: data is affine (or points are collinear)
        A = np.column_stack([points, np.ones(len(points))])
        coef, *_ = np.linalg.lstsq(A, values, rcond=None)
        return A @ coef
    normals = hull.equations[:, :3]
    lower = normals[:, 2] < -1e-12
    simp = hull.simplices[lower]
    # orient projected facets counter-clockwise
    q = points[simp]
    cross = (q[:, 1, 0] - q[:, 0, 0]) * (q[:, 2, 1] - q[:, 0, 1]) - \
            (q[:, 1, 1] - q[:, 0, 1]) * (q[:, 2, 0] - q[:, 0, 0])
    keep = np.abs(cross) > 1e-14 * (np.ptp(points, axis=0).max() ** 2)
    simp = simp[keep]
    simp[cross[keep] < 0] = simp[cross[keep] < 0][:, [0, 2, 1]]

    out = values.copy()
    verts = np.unique(simp)
    rest = np.setdiff1d(np.arange(len(points)), verts)
    if len(rest):
        spacing = np.sqrt(np.ptp(points[:, 0]) * np.ptp(points[:, 1]) / max(len(points), 1))
        loc = BucketLocator(points, simp, cell_size=max(2.0 * spacing, 1e-12))
        tri, lam = kernels.locate_points(points[rest], loc)
        found = tri >= 0
        vals = (lam * values[simp[np.maximum(tri, 0)]]).sum(axis=1)
        out[rest[found]] = np.minimum(values[rest[found]], vals[found])
    return out


def oracle_envelope(f: Callable, domain, n: int) -> SampledEnvelope:
    """Convex envelope of the sampled graph of ``f``."""
    pts, on_b, spacing = sample_domain(domain, n)
    fv = np.asarray(f(pts), dtype=float)
    return SampledEnvelope(pts, fv, lower_hull_values(pts, fv), spacing, on_b)
