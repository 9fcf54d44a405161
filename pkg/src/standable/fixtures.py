"""Synthetic test fixtures with documented instability modes.

Each fixture is a deterministic watertight mesh around half-meter scale
(masses of order 100 kg at the default density), which keeps the penalty
contact stiff relative to weight and the per-step friction amplification
below the stability bound.  Shapes with an exact upright symmetry carry a
small built-in tilt so the instability actually manifests within the
simulated horizon instead of balancing on a knife edge.
"""

import numpy as np

from .losses import tilt_rotation
from .mass import compute_mass_properties
from .mesh import TriMesh, ground_and_center
from .primitives import box, capsule, cone

FIXTURE_NAMES = (
    "leaning-block",
    "inverted-cone",
    "offset-capsule",
    "short-leg-biped",
)


def _canonical(mesh, density=1e3):
    props = compute_mass_properties(mesh, density)
    out, _ = ground_and_center(mesh, props.com)
    return out


def leaning_block():
    """Box sheared until the COM projects outside the base: topples.

    The bottom face is dense enough that the optimized block's penalty
    compliance stays inside the battery's 3% height budget.
    """
    mesh = box((0.5, 0.5, 1.0), subdivisions=(10, 10, 8))
    v = mesh.vertices.copy()
    v[:, 2] -= v[:, 2].min()
    v[:, 0] += 0.52 * v[:, 2]
    return _canonical(TriMesh(v, mesh.faces))


def inverted_cone(lean=0.30, tip_radius=0.08):
    """Top-heavy apex-down cone leaning past its support: topples.

    The frustum foot is deliberately sized so that a standing configuration
    is reachable at the default contact stiffness (the penalty rocking
    stiffness over the foot must beat the gravitational moment), while the
    lean puts the COM projection outside the foot, so from rest every probe
    tilt toward the lean lowers the COM and the forward simulation falls.
    """
    mesh = cone(radius=0.17, height=0.42, segments=28, side_rings=8,
                cap_rings=2, apex="down", tip_radius=tip_radius)
    v = mesh.vertices @ tilt_rotation(lean, (0.0, 1.0)).T
    return _canonical(TriMesh(v, mesh.faces))


def offset_capsule(lean=0.52):
    """Capsule leaning so far that no bottom cut puts support under the COM.

    The COM projects well outside the contact patch of the lower cap, and
    outside any cross-section obtained by cutting near the bottom, which is
    what defeats the cut-plane baseline.
    """
    mesh = capsule(radius=0.18, cylinder_height=0.5, segments=28,
                   arc_steps=7)
    v = mesh.vertices @ tilt_rotation(lean, (0.0, -1.0)).T
    return _canonical(TriMesh(v, mesh.faces))


def short_leg_biped(gap_height=0.3, short_offset=0.09, blend_height=0.4):
    """Two-legged block with one leg short: stands on one foot and falls.

    Sculpted from a subdivided box by lifting the underside between the
    legs and under the short foot.  The lift fades out over the lower
    ``blend_height`` of the body so wall cells never fold, keeping the
    mesh watertight, embedded box topology.
    """
    nx, ny, nz = 12, 6, 11
    mesh = box((0.5, 0.3, 1.1), subdivisions=(nx, ny, nz))
    v = mesh.vertices.copy()
    v[:, 2] -= v[:, 2].min()
    x = v[:, 0]

    def sole_height(xi):
        # long leg x <= -0.12, arch |x| <= 0.09, short leg x >= 0.12
        if xi <= -0.12:
            return 0.0
        if xi >= 0.12:
            return short_offset
        return gap_height

    lift = np.array([sole_height(xi) for xi in x])
    fade = np.maximum(0.0, 1.0 - v[:, 2] / blend_height)
    v[:, 2] += lift * fade
    return _canonical(TriMesh(v, mesh.faces))


def make_fixture(name):
    """Build a named fixture mesh (grounded, COM-centered).

    Raises
    ------
    ValueError
        For unknown names; the message lists the valid ones.
    """
    builders = {
        "leaning-block": leaning_block,
        "inverted-cone": inverted_cone,
        "offset-capsule": offset_capsule,
        "short-leg-biped": short_leg_biped,
    }
    if name not in builders:
        raise ValueError(
            f"unknown fixture {name!r}; valid names: {', '.join(FIXTURE_NAMES)}"
        )
    return builders[name]()
