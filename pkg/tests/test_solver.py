import numpy as np
import pytest
import scipy.sparse as sp

from convenv.directions import build_angular
from convenv.envelopes import get_example
from convenv.operator import DiscretizationParams, build_stencils, is_discretely_convex, residual
from convenv.solver import (BellmanSystem, MaxIterationsExceeded, assemble, build_edge_stencils,
                            howard_solve, improve_policy, solve_linear, solve_polytope)

from _runs import two_scale


def half_sq(p):
    return 0.5 * (p ** 2).sum(axis=1)


def random_policy(table, rng):
    return rng.integers(0, table.S + 1, len(table.nodes))


def test_all_obstacle_policy_is_identity(disk_mesh, disk_table):
    f = disk_mesh.interpolate(get_example("ex1").f)
    sysm = assemble(np.zeros(len(disk_table.nodes), int), f, disk_table)
    assert (sysm.matrix != sp.identity(disk_mesh.n_nodes)).nnz == 0
    assert np.array_equal(sysm.rhs, f)
    assert np.array_equal(solve_linear(sysm), f)


def test_identity_system_returns_rhs(rng):
    F = rng.normal(size=50)
    assert np.allclose(solve_linear(BellmanSystem(sp.identity(50, format="csr"), F)), F)


def test_row_sums_and_sign_pattern(disk_mesh, disk_table, rng):
    f = disk_mesh.interpolate(get_example("ex1").f)
    pol = random_policy(disk_table, rng)
    B = assemble(pol, f, disk_table).matrix.tocoo()
    diag = B.row == B.col
    assert np.all(B.data[diag] > 0)
    assert np.all(B.data[~diag] <= 0)
    rows = disk_table.nodes[pol > 0]
    sums = np.asarray(B.tocsr().sum(axis=1)).ravel()
    assert np.abs(sums[rows]).max() * disk_table.step.min() ** 2 <= 1e-12


def test_random_policy_solve_residual(disk_mesh, disk_table, rng):
    f = disk_mesh.interpolate(get_example("ex1").f)
    sysm = assemble(random_policy(disk_table, rng), f, disk_table)
    u = solve_linear(sysm)
    assert np.linalg.norm(sysm.matrix @ u - sysm.rhs) <= 1e-10 * (1 + np.linalg.norm(sysm.rhs))


def test_nonnegative_inverse(square_mesh, square_table, rng):
    f = square_mesh.interpolate(get_example("ex3").f)
    for _ in range(20):
        B = assemble(random_policy(square_table, rng), f, square_table).matrix
        b = rng.uniform(0, 1, square_mesh.n_nodes)
        u = solve_linear(BellmanSystem(B, b))
        assert u.min() >= -1e-10


def test_improve_policy_picks_negative_direction(disk_mesh, disk_table):
    f = disk_mesh.interpolate(get_example("ex1").f)
    cur = np.zeros(len(disk_table.nodes), int)
    new = improve_policy(f, f, disk_table, cur)
    D = disk_table.apply(f)
    neg = D.min(axis=1) < -1e-9
    assert neg.any() and np.all(new[neg] > 0)
    assert np.all(D[neg, new[neg] - 1] == D[neg].min(axis=1))


def test_policy_fixed_at_solution(disk_mesh, disk_table):
    f = disk_mesh.interpolate(get_example("ex1").f)
    rep = howard_solve(f, disk_table)
    assert np.array_equal(improve_policy(rep.u, f, disk_table, rep.policy), rep.policy)


def test_convex_and_affine_data_are_fixed_points(disk_mesh, disk_table):
    for g in (half_sq, lambda p: 1 - p[:, 0] + 2 * p[:, 1]):
        f = disk_mesh.interpolate(g)
        rep = howard_solve(f, disk_table)
        assert rep.iterations <= 1
        assert np.abs(rep.u - f).max() <= 1e-12


def test_first_example_coarse_levels():
    _, _, rep4, _ = two_scale("ex1", 4, 0.5, 0.5)
    assert rep4.converged and rep4.iterations <= 15
    _, _, rep5, err5 = two_scale("ex1", 5, 0.5, 0.5)
    assert 1.887e-2 * 0.7 <= err5 <= 1.887e-2 * 1.3
    assert rep5.iterations <= 15


def test_report_outputs(disk_mesh, disk_table, tmp_path):
    f = disk_mesh.interpolate(get_example("ex1").f)
    rep = howard_solve(f, disk_table)
    assert "iterations" in rep.summary()
    rep.history_to_csv(tmp_path / "h.csv")
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "iter,residual_norm,policy_changes"
    assert len(lines) == rep.linear_solves + 1 == rep.iterations + 2


def test_iteration_cap(disk_mesh, disk_table):
    f = disk_mesh.interpolate(get_example("ex1").f)
    with pytest.raises(MaxIterationsExceeded) as info:
        howard_solve(f, disk_table, max_iter=1)
    assert info.value.report is not None


@pytest.mark.parametrize("example", ["ex1", "ex2"])
def test_solution_properties_disk(disk_mesh, disk_table, example):
    ex = get_example(example)
    f = disk_mesh.interpolate(ex.f)
    rep = howard_solve(f, disk_table)
    assert rep.monotone
    assert np.abs(rep.u).max() <= np.abs(f).max() + 1e-9
    assert np.all(rep.u <= f + 1e-9)
    assert np.all(disk_mesh.interpolate(ex.u_exact) - 1e-8 <= rep.u)
    assert is_discretely_convex(rep.u, disk_table, tol=1e-8)


def test_uniqueness_across_initial_policies(square_mesh, square_table, rng):
    f = square_mesh.interpolate(get_example("ex3").f)
    ref = howard_solve(f, square_table).u
    for _ in range(3):
        rep = howard_solve(f, square_table, initial_policy=random_policy(square_table, rng))
        assert np.abs(rep.u - ref).max() <= 1e-8


def test_comparison_with_larger_data(square_mesh, square_table, rng):
    # the solution for f' >= f is a supersolution for f with larger boundary values
    f = square_mesh.interpolate(get_example("ex3").f)
    u = howard_solve(f, square_table).u
    for _ in range(20):
        f2 = f + rng.uniform(0, 0.3) * rng.uniform(0, 1, len(f))
        w = howard_solve(f2, square_table).u
        assert residual(w, f, square_table).residual[square_table.nodes].max() <= 1e-9
        assert np.all(u <= w + 1e-9)


def test_edge_stencils_on_square(square_mesh):
    t = build_edge_stencils(square_mesh, 0.3)
    assert len(t.nodes) == len(square_mesh.boundary) - 4
    x = square_mesh.nodes
    f = square_mesh.interpolate(lambda p: 2 * p[:, 0] - p[:, 1])
    assert np.abs(t.apply(f)).max() * t.step.min() ** 2 <= 1e-13
    # every stencil stays on its own edge
    on_same_line = np.isclose(np.abs(x[t.idx[:, 0, :]]), 1).all(axis=1)
    assert on_same_line.any(axis=1).all()


def test_polytope_fourth_example_boundary():
    mesh, _, rep, _ = two_scale("ex4", 4, 2.0, 0.5, 0.5, polytope=True)
    x = mesh.nodes
    top_mid = np.flatnonzero(np.all(np.isclose(x, [0.0, 1.0]), axis=1))[0]
    corner = np.flatnonzero(np.all(np.isclose(x, [1.0, 1.0]), axis=1))[0]
    assert rep.u[top_mid] == pytest.approx(-1.0, abs=1e-12)
    assert rep.u[corner] == pytest.approx(1.0, abs=1e-12)
    assert rep.edge_report is not None and rep.edge_report.converged


def test_polytope_matches_dirichlet_when_trace_is_convex(square_mesh):
    f = square_mesh.interpolate(get_example("ex3").f)
    h = 2.0 ** -4
    theta = 0.5 * h ** 0.5
    p = DiscretizationParams(h, h ** (1 / 3), theta)
    dirs = build_angular(theta)
    a = solve_polytope(f, square_mesh, p, dirs).u
    b = howard_solve(f, build_stencils(square_mesh, p, dirs)).u
    assert np.abs(a - b).max() <= 1e-8
