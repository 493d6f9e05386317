import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from convenv.geometry import (OutsideDomain, Polygon, UnitDisk, boundary_distance, clip_step,
                              contains, square)

DISK, SQ = UnitDisk(), square()
coord = st.floats(-0.999, 0.999)


def test_contains_examples():
    assert contains(DISK, [0.0, 0.0])
    assert contains(DISK, [1.0, 0.0])
    assert not contains(SQ, [1.0001, 0.0])


def test_boundary_distance_examples():
    assert boundary_distance(DISK, [0.3, 0.0]) == pytest.approx(0.7)
    assert boundary_distance(SQ, [0.5, 0.25]) == pytest.approx(0.5)
    assert boundary_distance(SQ, [0.0, 0.0]) == pytest.approx(1.0)


def test_boundary_distance_outside_raises():
    with pytest.raises(OutsideDomain):
        boundary_distance(DISK, [1.5, 0.0])


def test_clip_step_examples():
    assert clip_step(DISK, [0.0, 0.0], [1.0, 0.0], 0.5) == pytest.approx(0.5)
    assert clip_step(DISK, [0.8, 0.0], [1.0, 0.0], 0.5) == pytest.approx(0.2)
    assert clip_step(SQ, [0.9, 0.0], [0.0, 1.0], 0.5) == pytest.approx(0.5)
    assert clip_step(DISK, [0.8, 0.0], [1.0, 0.0], 0.5, mode="one_sided") == pytest.approx(0.2)
    assert clip_step(DISK, [0.8, 0.0], [-1.0, 0.0], 0.5, mode="one_sided") == pytest.approx(0.5)


def test_clip_step_outward_on_boundary_is_zero():
    assert clip_step(DISK, [1.0, 0.0], [1.0, 0.0], 0.3, mode="one_sided") == 0.0


def test_polygon_validation():
    with pytest.raises(ValueError):
        Polygon(np.array([[0, 0], [0, 1], [1, 0]], float))  # clockwise
    tri = Polygon(np.array([[0, 0], [1, 0], [0, 1]], float))
    assert tri.diameter == pytest.approx(np.sqrt(2))
    assert contains(tri, [0.2, 0.2]) and not contains(tri, [0.6, 0.6])


@pytest.mark.parametrize("dom", [DISK, SQ], ids=["disk", "square"])
@settings(max_examples=200, deadline=None)
@given(x=coord, y=coord, ang=st.floats(0, 2 * np.pi), delta=st.floats(1e-3, 2.0))
def test_clipped_offsets_stay_inside(dom, x, y, ang, delta):
    p = np.array([x, y]) * (0.99 if dom is DISK else 1.0)
    if not contains(dom, p):
        p = p / (np.hypot(*p) + 1e-3)
    v = np.array([np.cos(ang), np.sin(ang)])
    t = clip_step(dom, p, v, delta)
    assert 0 <= t <= delta
    assert contains(dom, p + t * v) and contains(dom, p - t * v)
    # monotone in delta
    assert clip_step(dom, p, v, 0.5 * delta) <= t + 1e-15


@pytest.mark.parametrize("dom", [DISK, SQ], ids=["disk", "square"])
def test_boundary_distance_is_1_lipschitz(dom, rng):
    p = rng.uniform(-0.7, 0.7, (1000, 2))
    q = rng.uniform(-0.7, 0.7, (1000, 2))
    gap = np.abs(boundary_distance(dom, p) - boundary_distance(dom, q))
    assert np.all(gap <= np.linalg.norm(p - q, axis=1) + 1e-14)
