import math
import warnings

import pytest

from speclab.errors import QualityWarning
from speclab.geometry import make_disk, make_rectangle
from speclab.mesh import triangulate
from speclab.eigensolve import solve_lowest

PI = math.pi


def quiet_triangulate(d, h, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", QualityWarning)
        return triangulate(d, h, **kw)


@pytest.fixture(scope="session")
def disk_mesh():
    return triangulate(make_disk(1.0, 256), 0.05)


@pytest.fixture(scope="session")
def disk_spec(disk_mesh):
    return solve_lowest(disk_mesh, 6)


@pytest.fixture(scope="session")
def square():
    return make_rectangle(PI, PI, spacing=0.05)


@pytest.fixture(scope="session")
def square_mesh(square):
    return triangulate(square, 0.05)


@pytest.fixture(scope="session")
def square_spec(square_mesh):
    return solve_lowest(square_mesh, 8)
