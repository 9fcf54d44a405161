"""Rigid-body mass properties of closed triangle meshes.

The solid enclosed by the surface is decomposed into signed tetrahedra
against the origin; volume, first and second moments are then exact
polynomial integrals of the vertex coordinates.  Second moments use the
tetrahedron identity  ∫ x xᵀ dV = (V/20) (s sᵀ + Σₖ vₖ vₖᵀ)  with
s = Σₖ vₖ, which makes the whole computation (and its reverse-mode
derivative) a handful of vectorized products over faces.
"""

from dataclasses import dataclass

import numpy as np

from .mesh import MeshError

_EYE3 = np.eye(3)


@dataclass(frozen=True)
class MassProperties:
    """Mass M (kg), center of mass (m), inertia about the COM (kg m^2).

    ``inertia_body`` is expressed in the body frame whose axes coincide with
    the world axes at rest; it stays constant during simulation.
    """

    mass: float
    com: np.ndarray
    inertia_body: np.ndarray

    @property
    def inertia_body_inv(self):
        return np.linalg.inv(self.inertia_body)


def _face_corners(vertices, faces):
    return vertices[faces[:, 0]], vertices[faces[:, 1]], vertices[faces[:, 2]]


def _moments(vertices, faces):
    """Signed volume, first moment ∫x dV and second moment ∫x xᵀ dV."""
    a, b, c = _face_corners(vertices, faces)
    cross_bc = np.cross(b, c)
    det = np.einsum("ij,ij->i", a, cross_bc)
    vf = det / 6.0
    s = a + b + c
    volume = vf.sum()
    first = (vf[:, None] * s).sum(axis=0) / 4.0
    w = vf / 20.0
    second = (
        np.einsum("f,fi,fj->ij", w, s, s)
        + np.einsum("f,fi,fj->ij", w, a, a)
        + np.einsum("f,fi,fj->ij", w, b, b)
        + np.einsum("f,fi,fj->ij", w, c, c)
    )
    return volume, first, second


def compute_mass_properties(mesh, density):
    """Mass, COM and body-frame inertia tensor of the enclosed solid.

    Parameters
    ----------
    mesh : TriMesh
        Closed, consistently outward-oriented mesh.
    density : float
        Uniform density in kg/m^3, > 0.

    Raises
    ------
    MeshError
        If the enclosed volume is ~0 (open or degenerate mesh) or negative
        (inward orientation; flip the faces).
    """
    if density <= 0.0:
        raise ValueError("density must be positive")
    volume, first, second = _moments(mesh.vertices, mesh.faces)
    if abs(volume) < 1e-12:
        raise MeshError("degenerate or open mesh: enclosed volume is ~ 0")
    if volume < 0.0:
        raise MeshError(
            "mesh encloses negative volume (inward orientation); flip faces"
        )
    com = first / volume
    mass = density * volume
    inertia_origin = density * (np.trace(second) * _EYE3 - second)
    shift = mass * (np.dot(com, com) * _EYE3 - np.outer(com, com))
    inertia = inertia_origin - shift
    inertia = 0.5 * (inertia + inertia.T)
    eig = np.linalg.eigvalsh(inertia)
    if eig[0] <= 0.0:
        raise MeshError("inertia tensor is not positive definite")
    return MassProperties(mass=float(mass), com=com, inertia_body=inertia)


def mass_properties_vjp(vertices, faces, density, g_mass=0.0, g_com=None,
                        g_inertia=None):
    """Reverse-mode derivative of :func:`compute_mass_properties`.

    Pulls cotangents on (mass, com, inertia_body) back to per-vertex
    position gradients, shape (n, 3).  Exact for the polynomial integrals.
    """
    g_com = np.zeros(3) if g_com is None else np.asarray(g_com, dtype=float)
    if g_inertia is None:
        g_inertia = np.zeros((3, 3))
    else:
        g_inertia = np.asarray(g_inertia, dtype=float)

    volume, first, second = _moments(vertices, faces)
    com = first / volume
    mass = density * volume

    # inertia = rho*(tr(second) I - second) - mass*K,  K = |c|^2 I - c c^T
    k_mat = np.dot(com, com) * _EYE3 - np.outer(com, com)
    g_mass_total = float(g_mass) - float(np.sum(g_inertia * k_mat))
    g_k = -mass * g_inertia
    g_c = 2.0 * np.trace(g_k) * com - (g_k + g_k.T) @ com
    g_second = density * (np.trace(g_inertia) * _EYE3 - g_inertia)

    g_c = g_c + g_com
    g_first = g_c / volume
    g_volume = -float(np.dot(first, g_c)) / volume**2
    g_volume += density * g_mass_total

    a, b, c = _face_corners(vertices, faces)
    s = a + b + c
    cross_bc = np.cross(b, c)
    det = np.einsum("ij,ij->i", a, cross_bc)
    vf = det / 6.0

    # S = sum vf*s/4 ; second = sum (vf/20)(s s^T + a a^T + b b^T + c c^T)
    g_vf = (s @ g_first) / 4.0
    gs_sym = g_second + g_second.T
    t_full = (
        np.einsum("fi,ij,fj->f", s, g_second, s)
        + np.einsum("fi,ij,fj->f", a, g_second, a)
        + np.einsum("fi,ij,fj->f", b, g_second, b)
        + np.einsum("fi,ij,fj->f", c, g_second, c)
    )
    g_vf += t_full / 20.0
    g_vf += g_volume

    w = vf[:, None] / 20.0
    g_s = w * (s @ gs_sym.T)
    g_a = w * (a @ gs_sym.T) + g_s + (vf[:, None] / 4.0) * g_first
    g_b = w * (b @ gs_sym.T) + g_s + (vf[:, None] / 4.0) * g_first
    g_c_corner = w * (c @ gs_sym.T) + g_s + (vf[:, None] / 4.0) * g_first

    g_det = g_vf / 6.0
    g_a += g_det[:, None] * cross_bc
    g_b += g_det[:, None] * np.cross(c, a)
    g_c_corner += g_det[:, None] * np.cross(a, b)

    grad = np.zeros_like(vertices)
    np.add.at(grad, faces[:, 0], g_a)
    np.add.at(grad, faces[:, 1], g_b)
    np.add.at(grad, faces[:, 2], g_c_corner)
    return grad


def mass_properties_gradient(mesh, density, g_mass=0.0, g_com=None,
                             g_inertia=None):
    """Spec-level wrapper of :func:`mass_properties_vjp` taking a TriMesh."""
    return mass_properties_vjp(
        mesh.vertices, mesh.faces, density, g_mass, g_com, g_inertia
    )


def com_vjp(vertices, faces, g_com):
    """Gradient of ``g_com . com(V)`` with respect to vertices."""
    return mass_properties_vjp(vertices, faces, 1.0, g_com=g_com)
