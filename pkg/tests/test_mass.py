import numpy as np
import pytest

from standable.mass import (
    compute_mass_properties,
    mass_properties_gradient,
    mass_properties_vjp,
)
from standable.mesh import MeshError, TriMesh
from standable.losses import tilt_rotation
from standable.primitives import box, icosphere, l_prism
from .voxel import voxel_estimate


def test_cube_analytic_inertia():
    mesh = box((1, 1, 1), 1)
    props = compute_mass_properties(mesh, 1000.0)
    assert props.mass == pytest.approx(1000.0, abs=1e-9)
    assert np.allclose(props.com, 0.0, atol=1e-12)
    assert np.allclose(props.inertia_body, np.eye(3) * 1000.0 / 6.0,
                       atol=1e-10)


def test_icosphere_analytic():
    mesh = icosphere(0.5, 4)
    props = compute_mass_properties(mesh, 1000.0)
    exact_mass = 4.0 / 3.0 * np.pi * 0.5**3 * 1000.0
    assert abs(props.mass - exact_mass) / exact_mass < 0.01
    exact_inertia = 0.4 * exact_mass * 0.25
    for k in range(3):
        assert abs(props.inertia_body[k, k] - exact_inertia) / exact_inertia \
            < 0.02


def test_translation_covariance():
    mesh = box((0.4, 0.7, 1.1), 2)
    t = np.array([0.3, -0.2, 0.9])
    a = compute_mass_properties(mesh, 500.0)
    b = compute_mass_properties(mesh.with_vertices(mesh.vertices + t), 500.0)
    assert b.mass == pytest.approx(a.mass, rel=1e-12)
    assert np.allclose(b.com, a.com + t, atol=1e-9)
    assert np.allclose(b.inertia_body, a.inertia_body, atol=1e-7)


def test_rotation_equivariance():
    mesh = l_prism()
    rot = tilt_rotation(0.83, (0.6, 0.8))
    a = compute_mass_properties(mesh, 1000.0)
    b = compute_mass_properties(mesh.with_vertices(mesh.vertices @ rot.T),
                                1000.0)
    expected = rot @ a.inertia_body @ rot.T
    rel = np.abs(b.inertia_body - expected).max() / np.abs(expected).max()
    assert rel < 1e-8


@pytest.mark.slow
@pytest.mark.parametrize("builder", [
    lambda: box((1, 1, 1), 1),
    lambda: icosphere(0.5, 3),
    lambda: l_prism(),
])
def test_voxel_oracle_agreement(builder):
    mesh = builder()
    props = compute_mass_properties(mesh, 1000.0)
    vol, com = voxel_estimate(mesh, n=128)
    assert abs(props.mass - 1000.0 * vol) / props.mass < 0.01
    lo, hi = mesh.bounds()
    bbox = np.linalg.norm(hi - lo)
    assert np.linalg.norm(props.com - com) < 0.01 * bbox


def test_open_mesh_rejected():
    verts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=float)
    faces = np.array([[0, 1, 2]])
    with pytest.raises(MeshError, match="degenerate or open"):
        compute_mass_properties(TriMesh(verts, faces), 1000.0)


def test_inverted_mesh_rejected(unit_cube):
    flipped = TriMesh(unit_cube.vertices, unit_cube.faces[:, ::-1])
    with pytest.raises(MeshError, match="orientation"):
        compute_mass_properties(flipped, 1000.0)


def test_gradient_matches_finite_differences_on_cube():
    mesh = box((1, 1, 1), 1)
    grad = mass_properties_gradient(mesh, 1000.0, g_mass=1.0)
    h = 1e-5
    rng = np.random.default_rng(0)
    for _ in range(8):
        i = int(rng.integers(0, mesh.n_vertices))
        ax = int(rng.integers(0, 3))
        vp = mesh.vertices.copy()
        vm = mesh.vertices.copy()
        vp[i, ax] += h
        vm[i, ax] -= h
        fp = compute_mass_properties(mesh.with_vertices(vp), 1000.0).mass
        fm = compute_mass_properties(mesh.with_vertices(vm), 1000.0).mass
        fd = (fp - fm) / (2 * h)
        assert abs(fd - grad[i, ax]) / max(abs(fd), 1e-12) < 1e-6


def test_gradient_com_z_translation_direction():
    mesh = l_prism()
    grad = mass_properties_vjp(mesh.vertices, mesh.faces, 1000.0,
                               g_com=np.array([0.0, 0.0, 1.0]))
    # uniform vertical translation increments com.z by exactly 1
    assert grad[:, 2].sum() == pytest.approx(1.0, rel=1e-10)
    assert grad[:, 0].sum() == pytest.approx(0.0, abs=1e-12)


def test_zero_seed_zero_gradient():
    mesh = icosphere(0.3, 1)
    grad = mass_properties_vjp(mesh.vertices, mesh.faces, 1000.0)
    assert np.all(grad == 0.0)


def test_gradient_random_seeds_match_fd():
    mesh = l_prism()
    rng = np.random.default_rng(3)
    g_mass = float(rng.normal())
    g_com = rng.normal(size=3)
    g_inertia = rng.normal(size=(3, 3))

    def scalar(v):
        p = compute_mass_properties(mesh.with_vertices(v), 1000.0)
        return (g_mass * p.mass + g_com @ p.com
                + float(np.sum(g_inertia * p.inertia_body)))

    grad = mass_properties_vjp(mesh.vertices, mesh.faces, 1000.0,
                               g_mass, g_com, g_inertia)
    h = 1e-6
    for _ in range(10):
        i = int(rng.integers(0, mesh.n_vertices))
        ax = int(rng.integers(0, 3))
        vp = mesh.vertices.copy()
        vm = mesh.vertices.copy()
        vp[i, ax] += h
        vm[i, ax] -= h
        fd = (scalar(vp) - scalar(vm)) / (2 * h)
        assert abs(fd - grad[i, ax]) / max(abs(fd), abs(grad[i, ax]), 1e-9) \
            < 1e-5
