import numpy as np
import pytest

from standable.mass import compute_mass_properties
from standable.mesh import TriMesh, ground_and_center
from standable.primitives import box, icosphere


@pytest.fixture
def unit_cube():
    return box((1.0, 1.0, 1.0), subdivisions=1)


@pytest.fixture
def grounded_cube():
    mesh = box((1.0, 1.0, 1.0), subdivisions=1)
    props = compute_mass_properties(mesh, 1000.0)
    grounded, _ = ground_and_center(mesh, props.com)
    return grounded


@pytest.fixture
def sphere_mesh():
    return icosphere(0.5, 4)


def canonical(mesh, density=1000.0):
    props = compute_mass_properties(mesh, density)
    grounded, _ = ground_and_center(mesh, props.com)
    return grounded


def jittered(mesh, scale, seed=7):
    rng = np.random.default_rng(seed)
    return TriMesh(
        mesh.vertices + rng.normal(scale=scale, size=mesh.vertices.shape),
        mesh.faces,
    )
