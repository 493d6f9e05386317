import numpy as np
import pytest

from convenv.directions import build_angular
from convenv.geometry import UnitDisk, square
from convenv.mesh import build_mesh
from convenv.operator import DiscretizationParams, build_stencils

H = 2.0 ** -4


def params_for(h, c_delta=0.5, c_theta=0.25):
    theta = c_theta * h ** 0.5
    return DiscretizationParams(h, max(h, c_delta * h ** 0.5), theta), build_angular(theta)


@pytest.fixture(scope="session")
def disk_mesh():
    return build_mesh(UnitDisk(), H)


@pytest.fixture(scope="session")
def square_mesh():
    return build_mesh(square(), H)


@pytest.fixture(scope="session", params=["disk", "square"])
def any_mesh(request, disk_mesh, square_mesh):
    return disk_mesh if request.param == "disk" else square_mesh


@pytest.fixture(scope="session")
def disk_table(disk_mesh):
    p, dirs = params_for(H)
    return build_stencils(disk_mesh, p, dirs, keep_points=True)


@pytest.fixture(scope="session")
def square_table(square_mesh):
    p, dirs = params_for(H)
    return build_stencils(square_mesh, p, dirs, keep_points=True)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
