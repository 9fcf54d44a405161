"""Optimization objectives for self-supporting meshes.

Five terms: rotational standability (final simulated rotation vs identity),
stable equilibrium (center of mass must not drop under small tilts), normal
consistency and bottom-Laplacian smoothness regularizers, and a
mesh-fidelity anchor.  Each term has a ``*_with_grad`` companion returning
per-vertex gradients plus a branch signature for the finite-difference
harness.
"""

import warnings
from dataclasses import dataclass

import numpy as np

_EYE3 = np.eye(3)


@dataclass
class LossWeights:
    """Weights of the joint objective (defaults from the reference setup)."""

    fidelity: float = 1.0
    stand: float = 1e5
    stable: float = 1e5
    normal: float = 1e4
    bottom_laplacian: float = 1e7

    def __post_init__(self):
        for name in ("fidelity", "stand", "stable", "normal",
                     "bottom_laplacian"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"weight {name} must be >= 0")

    def as_dict(self):
        return {
            "fidelity": self.fidelity,
            "stand": self.stand,
            "stable": self.stable,
            "normal": self.normal,
            "bottom_laplacian": self.bottom_laplacian,
        }


@dataclass
class TiltProbe:
    """Perturbation probe: fixed tilt angle, evenly spaced directions.

    Directions are unit 2-vectors in the xy-plane, deterministic for a
    given count; the tilt rotates about the horizontal axis [v, 0] through
    the origin.
    """

    angle: float = 0.05
    n_directions: int = 20

    def directions(self):
        k = np.arange(self.n_directions)
        theta = 2.0 * np.pi * k / self.n_directions
        return np.column_stack([np.cos(theta), np.sin(theta)])

    def rotations(self):
        """Stack of 3x3 tilt matrices, one per direction."""
        return np.stack([
            tilt_rotation(self.angle, v) for v in self.directions()
        ])


def tilt_rotation(angle, direction):
    """Rodrigues rotation by ``angle`` about horizontal axis [direction, 0]."""
    a = np.array([direction[0], direction[1], 0.0])
    n = np.linalg.norm(a)
    if n == 0.0:
        raise ValueError("tilt direction must be nonzero")
    a = a / n
    k = np.array([
        [0.0, -a[2], a[1]],
        [a[2], 0.0, -a[0]],
        [-a[1], a[0], 0.0],
    ])
    return _EYE3 * np.cos(angle) + np.sin(angle) * k + (
        1.0 - np.cos(angle)
    ) * np.outer(a, a)


# -- standability ------------------------------------------------------------


def stand_loss(final_rotation):
    """Squared Frobenius deviation of the final rotation from identity.

    Zero iff the body ends the simulation in its initial orientation;
    translation history is deliberately ignored.
    """
    r = np.asarray(final_rotation, dtype=float)
    return float(np.sum((r - _EYE3) ** 2))


def stand_loss_rotation_grad(final_rotation):
    """d stand_loss / d R."""
    return 2.0 * (np.asarray(final_rotation, dtype=float) - _EYE3)


# -- stable equilibrium ------------------------------------------------------


def com_height_after_tilt(vertices, com, angle, direction):
    """COM height after tilting about [direction, 0] and re-grounding.

    The mesh and COM rotate about an origin axis, then the whole body is
    shifted vertically so its lowest vertex touches z=0; the returned value
    is the resulting COM height.  Invariant to translations of the input.
    """
    p = tilt_rotation(angle, direction)
    u = p.T @ np.array([0.0, 0.0, 1.0])
    v = np.asarray(vertices)
    return float(np.dot(com, u) - (v @ u).min())


def stable_equilibrium_loss(vertices, com, probe):
    """Mean hinge penalty on COM-height drop over the probe directions.

    Zero iff no sampled tilt lowers the center of mass, i.e. the body sits
    in a gravitational potential well for this probe resolution.
    """
    value, _, _, _ = stable_equilibrium_with_grad(vertices, com, probe)
    return value


def stable_equilibrium_with_grad(vertices, com, probe):
    """Value, vertex gradient, COM cotangent and branch signature.

    The re-grounding minimum uses the subgradient at the argmin vertex.
    Returns ``(value, g_vertices, g_com, signature)``; the caller chains
    ``g_com`` through its center-of-mass computation.
    """
    v = np.asarray(vertices, dtype=float)
    com = np.asarray(com, dtype=float)
    ez = np.array([0.0, 0.0, 1.0])
    amin0 = int(np.argmin(v[:, 2]))
    h0 = com[2] - v[amin0, 2]

    n_dir = probe.n_directions
    g_v = np.zeros_like(v)
    g_com = np.zeros(3)
    total = 0.0
    active = []
    argmins = []
    for k, direction in enumerate(probe.directions()):
        if probe.angle == 0.0:
            argmins.append(amin0)
            continue
        u = tilt_rotation(probe.angle, direction).T @ ez
        proj = v @ u
        amin = int(np.argmin(proj))
        argmins.append(amin)
        h_k = float(np.dot(com, u) - proj[amin])
        drop = h0 - h_k
        if drop > 0.0:
            total += drop
            active.append(k)
            g_com += (ez - u) / n_dir
            g_v[amin0, 2] -= 1.0 / n_dir
            g_v[amin] += u / n_dir
    value = total / n_dir
    signature = (tuple(active), amin0, tuple(argmins))
    return value, g_v, g_com, signature


# -- smoothness regularizers -------------------------------------------------


def normal_consistency_loss(mesh, pairs=None):
    """Mean (1 - n_i . n_j) over adjacent face pairs; 0 on flat patches."""
    value, _ = normal_consistency_with_grad(
        mesh.vertices, mesh.faces,
        mesh.adjacent_face_pairs if pairs is None else pairs,
    )
    return value


def normal_consistency_with_grad(vertices, faces, pairs):
    """Value and per-vertex gradient of the normal-consistency penalty."""
    pairs = np.asarray(pairs)
    if len(pairs) == 0:
        raise ValueError("normal consistency needs a nonempty pair set")
    v = np.asarray(vertices, dtype=float)
    a, b, c = v[faces[:, 0]], v[faces[:, 1]], v[faces[:, 2]]
    u = np.cross(b - a, c - a)
    norms = np.linalg.norm(u, axis=1)
    n = u / norms[:, None]

    ni, nj = n[pairs[:, 0]], n[pairs[:, 1]]
    k = len(pairs)
    value = float(np.mean(1.0 - np.einsum("ij,ij->i", ni, nj)))

    g_n = np.zeros_like(n)
    np.add.at(g_n, pairs[:, 0], -nj / k)
    np.add.at(g_n, pairs[:, 1], -ni / k)

    # n = u/|u| -> g_u = (g_n - n (n.g_n)) / |u|
    g_u = (g_n - n * np.einsum("ij,ij->i", n, g_n)[:, None]) / norms[:, None]
    g_ba = np.cross(c - a, g_u)
    g_ca = np.cross(g_u, b - a)
    grad = np.zeros_like(v)
    np.add.at(grad, faces[:, 0], -g_ba - g_ca)
    np.add.at(grad, faces[:, 1], g_ba)
    np.add.at(grad, faces[:, 2], g_ca)
    return value, grad


def bottom_laplacian_loss(mesh, bottom):
    """Mean differential-coordinate norm over the bottom vertex band.

    Empty bands yield 0 with a warning (the term simply vanishes).
    """
    if len(bottom) == 0:
        warnings.warn("empty bottom vertex set; bottom-Laplacian loss is 0",
                      stacklevel=2)
        return 0.0
    delta = mesh.laplacian_coordinates()
    return float(np.linalg.norm(delta[bottom.indices], axis=1).mean())


def bottom_laplacian_with_grad(vertices, laplacian, bottom_indices):
    """Value and vertex gradient given a fixed bottom selection.

    ``laplacian`` is the sparse uniform-Laplacian operator of the topology;
    the selection is treated as constant (piecewise definition).
    """
    idx = np.asarray(bottom_indices)
    v = np.asarray(vertices, dtype=float)
    if len(idx) == 0:
        return 0.0, np.zeros_like(v)
    delta = laplacian @ v
    norms = np.linalg.norm(delta[idx], axis=1)
    value = float(norms.mean())
    g_delta = np.zeros_like(v)
    safe = np.where(norms > 0.0, norms, 1.0)
    g_delta[idx] = delta[idx] / (safe[:, None] * len(idx))
    g_delta[idx[norms == 0.0]] = 0.0
    grad = laplacian.T @ g_delta
    return value, grad


# -- fidelity ----------------------------------------------------------------


def fidelity_loss(mesh, reference):
    """Mean squared vertex displacement from the reference mesh (m^2)."""
    value, _ = fidelity_with_grad(mesh.vertices, reference.vertices)
    return value


def fidelity_with_grad(vertices, reference_vertices):
    v = np.asarray(vertices, dtype=float)
    ref = np.asarray(reference_vertices, dtype=float)
    if v.shape != ref.shape:
        raise ValueError(
            f"topology mismatch: {v.shape} vertices vs reference {ref.shape}"
        )
    diff = v - ref
    value = float(np.sum(diff**2) / len(v))
    grad = 2.0 * diff / len(v)
    return value, grad


# -- joint objective ---------------------------------------------------------

STAND_STRIDE = 10

TERM_NAMES = ("fidelity", "stand", "stable", "normal", "bottom_laplacian")


def total_loss(components, weights, iteration, stand_stride=STAND_STRIDE):
    """Weighted sum with the standability term on its iteration schedule.

    The simulation-backed term participates only when
    ``iteration % stand_stride == 0``; all other terms apply every
    iteration.  Returns ``(value, active_mask)``.
    """
    mask = {name: True for name in TERM_NAMES}
    mask["stand"] = (iteration % stand_stride) == 0
    w = weights.as_dict()
    value = 0.0
    for name in TERM_NAMES:
        if mask[name] and name in components:
            value += w[name] * components[name]
    return value, mask
