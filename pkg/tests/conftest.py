import numpy as np
import pytest

from garmentfit.mesh import TriangleMesh
from garmentfit.primitives import grid_plane, icosphere, capped_cylinder


@pytest.fixture
def rng():
    return np.random.default_rng(20260827)


@pytest.fixture
def plane():
    return grid_plane(nx=8, ny=8, size=0.4)


@pytest.fixture
def sphere():
    return icosphere(subdivisions=3, radius=0.5)


@pytest.fixture(scope="session")
def arm():
    return capped_cylinder(radius=0.045, length=0.3, n_around=24, n_along=16)


def random_triangle(rng, scale=1.0):
    """A non-degenerate 3D triangle with area bounded away from zero."""
    while True:
        t = rng.normal(size=(3, 3)) * scale
        area = 0.5 * np.linalg.norm(np.cross(t[1] - t[0], t[2] - t[0]))
        if area > 0.05 * scale * scale:
            return t


def random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def bumpy_patch(rng, n=6, size=0.3):
    """A small non-flat patch for force and stitch tests."""
    mesh = grid_plane(nx=n, ny=n, size=size)
    v = mesh.vertices.copy()
    v[:, 2] += 0.08 * size * np.sin(7 * v[:, 0] / size) \
        * np.cos(5 * v[:, 1] / size)
    v += rng.normal(scale=0.002 * size, size=v.shape)
    return TriangleMesh(v, mesh.triangles)
