"""Per-term objective evaluations on a raw mesh, with exact vertex gradients.

The loss primitives in :mod:`losses` operate on canonical quantities; the
functions here own the chain from an arbitrary input mesh: center-of-mass
pullbacks, the grounding translation's argmin subgradient, and the
simulation adjoint.  Each returns ``(value, gradient, signature)`` so the
finite-difference harness can reject kink crossings.

Terms that are invariant to rigid translation (stable equilibrium, normal
consistency, bottom Laplacian) are evaluated in place; fidelity and the
simulated standability term carry the full canonicalization chain.
"""

import numpy as np

from .gradsim import (
    grad_through_sim,
    record_tape,
    _grad_from_tape,
    rotation_deviation_functional,
)
from .losses import (
    bottom_laplacian_with_grad,
    fidelity_with_grad,
    normal_consistency_with_grad,
    stable_equilibrium_with_grad,
)
from .mass import com_vjp, compute_mass_properties
from .mesh import TriMesh
from .platforms import Platform
from .simulation import SimParams


def canonicalize(mesh, density):
    """Ground the mesh and center its COM; returns (mesh, translation)."""
    props = compute_mass_properties(mesh, density)
    t = np.array([
        -props.com[0], -props.com[1], -mesh.vertices[:, 2].min()
    ])
    return mesh.with_vertices(mesh.vertices + t), t


def _grounding_pullback(vertices, faces, g_translation_sum):
    """Chain a summed cotangent on the canonical vertices through t(V).

    t = (-com_x, -com_y, -min_z); the min uses the argmin subgradient.
    """
    s = np.asarray(g_translation_sum, dtype=float)
    grad = com_vjp(vertices, faces, np.array([-s[0], -s[1], 0.0]))
    amin = int(np.argmin(vertices[:, 2]))
    grad[amin, 2] -= s[2]
    return grad


def stand_term(mesh, params=None, platform=None, **sim_kwargs):
    """Simulated standability loss and its adjoint gradient."""
    params = params or SimParams()
    platform = platform or Platform.ground()
    loss = rotation_deviation_functional()
    tape = record_tape(mesh, params, platform, **sim_kwargs)
    value, grad = _grad_from_tape(tape, mesh, loss)
    sig = (
        tape.contact_active.tobytes(),
        tape.body.contact_indices.tobytes(),
    )
    return value, grad, sig


def stable_term(mesh, density, probe):
    """Stable-equilibrium loss with the COM chain pulled back to vertices."""
    props = compute_mass_properties(mesh, density)
    value, g_v, g_com, sig = stable_equilibrium_with_grad(
        mesh.vertices, props.com, probe
    )
    grad = g_v + com_vjp(mesh.vertices, mesh.faces, g_com)
    return value, grad, sig


def normal_term(mesh):
    """Normal-consistency loss over interior-edge face pairs."""
    value, grad = normal_consistency_with_grad(
        mesh.vertices, mesh.faces, mesh.adjacent_face_pairs
    )
    return value, grad, None


def bottom_laplacian_term(mesh, band_fraction=0.02):
    """Bottom-band Laplacian loss; band measured from the lowest vertex."""
    z = mesh.vertices[:, 2]
    threshold = band_fraction * (z.max() - z.min())
    idx = np.flatnonzero(z - z.min() < threshold)
    value, grad = bottom_laplacian_with_grad(
        mesh.vertices, mesh.uniform_laplacian, idx
    )
    return value, grad, idx.tobytes()


def fidelity_term(mesh, reference, density):
    """Mean squared displacement between canonical placements.

    Both meshes are compared after grounding/centering, and the gradient
    includes the canonicalization chain of the input mesh.
    """
    canon, _ = canonicalize(mesh, density)
    ref_canon, _ = canonicalize(reference, density)
    value, g_c = fidelity_with_grad(canon.vertices, ref_canon.vertices)
    grad = g_c + _grounding_pullback(mesh.vertices, mesh.faces, g_c.sum(axis=0))
    return value, grad, None


def term_objective(term_fn, faces, *args, **kwargs):
    """Adapter making a term usable by the finite-difference harness."""

    def objective(v):
        mesh = TriMesh(v, faces)
        return term_fn(mesh, *args, **kwargs)

    return objective
