"""Compiled vs pure-numpy kernels: point location and stencil application.

Run with ``python benchmarks/bench_kernels.py [--k 6]``. Prints best-of-N
wall times for both paths and checks that they agree.
"""
import argparse
import time

import numpy as np

from convenv import kernels
from convenv.directions import build_angular
from convenv.geometry import UnitDisk
from convenv.mesh import build_mesh
from convenv.operator import DiscretizationParams, build_stencils


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--k", type=int, default=6, help="mesh size h = 2^-k")
    ap.add_argument("--points", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    h = 2.0 ** -args.k
    mesh = build_mesh(UnitDisk(), h)
    theta = 0.25 * h ** 0.5
    table = build_stencils(mesh, DiscretizationParams(h, 0.5 * h ** 0.5, theta), build_angular(theta))
    rng = np.random.default_rng(0)
    r = np.sqrt(rng.uniform(0, 0.999, args.points))
    a = rng.uniform(0, 2 * np.pi, args.points)
    pts = np.column_stack([r * np.cos(a), r * np.sin(a)])
    u = rng.normal(size=mesh.n_nodes)
    print(f"mesh h=2^-{args.k}: {mesh.n_nodes} nodes, S={table.S}, {args.points} query points")

    # warm up the JIT outside the timings
    kernels.locate_points(pts[:10], mesh.locator, use_numba=True)
    table_args = (table.nodes, table.idx, table.coef, table.diag, table.const)
    kernels.stencil_apply(u, *table_args, use_numba=True)

    rows = []
    for name, fn in [
        ("locate", lambda flag: kernels.locate_points(pts, mesh.locator, use_numba=flag)),
        ("stencil_apply", lambda flag: kernels.stencil_apply(u, *table_args, use_numba=flag)),
    ]:
        t_nb, out_nb = best_of(lambda: fn(True), args.repeat)
        t_np, out_np = best_of(lambda: fn(False), args.repeat)
        if name == "locate":
            assert np.array_equal(out_nb[0], out_np[0])
        else:
            assert np.allclose(out_nb, out_np, rtol=1e-13, atol=1e-9)
        rows.append((name, t_nb, t_np))

    print(f"{'kernel':<15}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for name, t_nb, t_np in rows:
        print(f"{name:<15}{t_nb:12.4f}{t_np:12.4f}{t_np / t_nb:10.1f}")


if __name__ == "__main__":
    main()
