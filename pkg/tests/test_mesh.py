import numpy as np
import pytest

from convenv.envelopes import get_example
from convenv.geometry import UnitDisk, square
from convenv.mesh import (BOUNDARY_VERTEX, INTERIOR, MeshTooLarge, NotInMesh, build_mesh,
                          evaluate, interpolate, locate, read_mesh, write_mesh)
import convenv.mesh as mesh_mod


def test_square_boundary_classification(square_mesh):
    x = square_mesh.nodes
    on_edge = np.isclose(np.abs(x).max(axis=1), 1.0, atol=1e-14)
    assert np.array_equal(on_edge, square_mesh.node_class != INTERIOR)
    corners = np.flatnonzero(square_mesh.node_class == BOUNDARY_VERTEX)
    assert np.allclose(np.abs(x[corners]), 1.0) and len(corners) == 4


def test_disk_boundary_on_circle(disk_mesh):
    r = np.hypot(*disk_mesh.nodes[disk_mesh.boundary].T)
    assert np.all(np.abs(r - 1.0) <= 1e-12)


def test_disk_size_and_quality(disk_mesh):
    # same order as the 1557 nodes of a comparable disk mesh at h = 2^-4
    assert 1000 <= disk_mesh.n_nodes <= 2500
    assert disk_mesh.h <= 2.0 ** -4
    assert disk_mesh.sigma < 4.0


@pytest.mark.parametrize("dom", [UnitDisk(), square()], ids=["disk", "square"])
def test_refinement_quadruples_nodes(dom):
    ratio = build_mesh(dom, 2.0 ** -5).n_nodes / build_mesh(dom, 2.0 ** -4).n_nodes
    assert 3.0 <= ratio <= 5.0


def test_mesh_budget(monkeypatch):
    monkeypatch.setattr(mesh_mod, "MAX_NODES", 100)
    with pytest.raises(MeshTooLarge):
        build_mesh(UnitDisk(), 2.0 ** -4)


@pytest.mark.parametrize("use_numba", [True, False], ids=["numba", "numpy"])
def test_locate_node_and_centroid(disk_mesh, use_numba):
    k = disk_mesh.interior[10]
    tri, lam = disk_mesh.locate_many(disk_mesh.nodes[[k]], use_numba=use_numba)
    assert sorted(np.round(lam[0], 12)) == [0.0, 0.0, 1.0]
    assert tri[0][np.argmax(lam[0])] == k
    t = disk_mesh.triangles[123]
    c = disk_mesh.nodes[t].mean(axis=0)
    _, lam = disk_mesh.locate_many(c[None], use_numba=use_numba)
    assert np.allclose(lam, 1.0 / 3.0, atol=1e-12)


@pytest.mark.parametrize("use_numba", [True, False], ids=["numba", "numpy"])
def test_locate_reproduces_points(any_mesh, rng, use_numba):
    p = rng.uniform(-0.69, 0.69, (2000, 2))
    tri, lam = any_mesh.locate_many(p, use_numba=use_numba)
    assert np.all(lam >= -1e-12)
    assert np.allclose((lam[..., None] * any_mesh.nodes[tri]).sum(axis=1), p, atol=1e-12)


def test_locate_outside_raises(disk_mesh):
    with pytest.raises(NotInMesh):
        locate(disk_mesh, [1.2, 0.0])


def test_affine_exactness(any_mesh, rng):
    g = interpolate(any_mesh, lambda p: 2 * p[:, 0] + 3 * p[:, 1] - 1)
    p = rng.uniform(-0.69, 0.69, (100, 2))
    for q in p:
        assert evaluate(g, locate(any_mesh, q)) == pytest.approx(2 * q[0] + 3 * q[1] - 1, abs=1e-12)
    assert evaluate(np.zeros(any_mesh.n_nodes), locate(any_mesh, p[0])) == 0.0


def test_interpolate_examples(disk_mesh, square_mesh):
    assert np.all(interpolate(disk_mesh, lambda p: np.full(len(p), 2.5)) == 2.5)
    f1 = get_example("ex1").f
    assert f1(np.array([[0.5, 0.0]]))[0] == pytest.approx(-1.0)
    u3 = get_example("ex3").u_exact
    assert u3(np.array([[0.25, -0.25]]))[0] == pytest.approx(-1.0)
    # the interpolant is nodal evaluation
    assert np.array_equal(interpolate(square_mesh, u3), u3(square_mesh.nodes))


def test_continuity_across_edges(disk_mesh, rng):
    t = disk_mesh.triangles
    # interior edges shared by two triangles
    e = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
    uniq, cnt = np.unique(e, axis=0, return_counts=True)
    shared = uniq[cnt == 2][:200]
    vals = rng.normal(size=disk_mesh.n_nodes)
    s = rng.uniform(0.1, 0.9, len(shared))
    p = disk_mesh.nodes[shared[:, 0]] * (1 - s)[:, None] + disk_mesh.nodes[shared[:, 1]] * s[:, None]
    tri, lam = disk_mesh.locate_many(p)
    via_locate = (lam * vals[tri]).sum(axis=1)
    along_edge = vals[shared[:, 0]] * (1 - s) + vals[shared[:, 1]] * s
    assert np.allclose(via_locate, along_edge, atol=1e-12)


def test_mesh_file_round_trip(square_mesh, tmp_path):
    path = tmp_path / "sq.mesh"
    write_mesh(square_mesh, path)
    back = read_mesh(path, domain=square_mesh.domain)
    assert np.array_equal(back.nodes, square_mesh.nodes)
    assert np.array_equal(back.triangles, square_mesh.triangles)
    assert np.array_equal(back.node_class, square_mesh.node_class)
    assert path.read_text().splitlines()[0] == f"nodes {square_mesh.n_nodes} triangles {len(square_mesh.triangles)}"
