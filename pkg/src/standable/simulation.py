"""Forward rigid-body dynamics with penalty-based frictional contact.

One rigid body falls under gravity onto an analytic platform.  Time
integration is semi-implicit Euler: momenta are updated from forces first,
then pose from the new velocities.  Contact applies, per candidate point, a
spring-damper normal force plus a viscous tangential force clamped to the
Coulomb cone.  Everything is double precision and strictly sequential, so
identical inputs give bit-identical trajectories.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import quaternion as quat
from .mass import compute_mass_properties
from .platforms import Platform, platform_sdf

GROUND_GAP = 1e-4
CONTACT_BAND_FRACTION = 0.1
CONTACT_POINT_CAP = 512


class SimulationError(RuntimeError):
    """Numerical blow-up (non-finite state or force) at a known step."""


@dataclass
class SimParams:
    """Material and integrator parameters (SI units).

    Defaults: dt 1e-3 s, contact stiffness 1e3, contact damping 2.0,
    friction coefficient 0.5, friction-force stiffness 1e3, density 1e3.
    Gravity acts along -z.
    """

    dt: float = 1e-3
    end_time: float = 2.0
    contact_stiffness: float = 1e3
    contact_damping: float = 2.0
    friction_coeff: float = 0.5
    friction_stiffness: float = 1e3
    density: float = 1e3
    gravity: float = 9.81

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.end_time < self.dt:
            raise ValueError("end_time must be >= dt")
        for name in ("contact_stiffness", "contact_damping",
                     "friction_stiffness"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")
        if self.friction_coeff < 0.0:
            raise ValueError("friction_coeff must be >= 0")
        if self.density <= 0.0:
            raise ValueError("density must be positive")

    @property
    def n_steps(self):
        return int(math.ceil(self.end_time / self.dt - 1e-12))


@dataclass
class RigidState:
    """Instantaneous state: pose plus linear and angular momentum.

    ``quaternion`` is the world-from-body rotation, renormalized every step;
    the body frame has its origin at the center of mass.
    """

    translation: np.ndarray
    quaternion: np.ndarray
    linear_momentum: np.ndarray
    angular_momentum: np.ndarray

    @staticmethod
    def rest():
        return RigidState(
            translation=np.zeros(3),
            quaternion=quat.IDENTITY.copy(),
            linear_momentum=np.zeros(3),
            angular_momentum=np.zeros(3),
        )

    def rotation(self):
        return quat.to_matrix(self.quaternion)


@dataclass
class RigidBody:
    """Simulation-ready body assembled from a mesh.

    ``contact_points`` are body-frame offsets from the COM of the candidate
    contact vertices; ``offset`` is the world position of the COM at the
    identity state, so a world point is R x + T + offset.
    """

    mass: float
    inertia_inv: np.ndarray
    contact_points: np.ndarray
    contact_indices: np.ndarray
    offset: np.ndarray
    com: np.ndarray                 # mesh-frame center of mass

    @property
    def n_contacts(self):
        return len(self.contact_points)


@dataclass
class Trajectory:
    """Recorded states at ``stride``-step intervals (first state included)."""

    times: np.ndarray
    translations: np.ndarray
    quaternions: np.ndarray
    linear_momenta: np.ndarray
    angular_momenta: np.ndarray
    dt: float
    stride: int
    body_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))
    body_com: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if len(self.times) == 0:
            raise ValueError("trajectory must contain at least one state")

    def __len__(self):
        return len(self.times)

    def rotation_at(self, k):
        return quat.to_matrix(self.quaternions[k])

    def state_at(self, k):
        return RigidState(
            translation=self.translations[k],
            quaternion=self.quaternions[k],
            linear_momentum=self.linear_momenta[k],
            angular_momentum=self.angular_momenta[k],
        )

    def world_vertices(self, vertices, k):
        """Mesh vertices in world coordinates at recorded state ``k``."""
        r = quat.to_matrix(self.quaternions[k])
        return (np.asarray(vertices) - self.body_com) @ r.T + (
            self.body_offset + self.translations[k]
        )

    def to_json(self):
        states = [
            {
                "t": float(self.times[k]),
                "T": self.translations[k].tolist(),
                "q": self.quaternions[k].tolist(),
                "P": self.linear_momenta[k].tolist(),
                "L": self.angular_momenta[k].tolist(),
            }
            for k in range(len(self))
        ]
        return {"dt": self.dt, "stride": self.stride, "states": states}

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh)


# -- contact ---------------------------------------------------------------


def _contact_forces(points_w, velocities_w, platform, params):
    """Vectorized penalty contact forces; also returns branch internals."""
    d, nrm = platform_sdf(platform, points_w)
    active = d < 0.0
    pen = np.where(active, -d, 0.0)
    vn = np.einsum("ij,ij->i", velocities_w, nrm)
    approaching = vn < 0.0
    fn_mag_raw = params.contact_stiffness * pen - params.contact_damping * (
        np.where(approaching, vn, 0.0)
    )
    # clamps take the active branch at the kink (one-sided subgradients)
    positive = fn_mag_raw >= 0.0
    fn_mag = np.where(positive, fn_mag_raw, 0.0)
    vt = velocities_w - vn[:, None] * nrm
    ft = -params.friction_stiffness * vt
    ft_norm = np.linalg.norm(ft, axis=1)
    cap = params.friction_coeff * fn_mag
    slip = active & (ft_norm >= cap) & (ft_norm > 0.0)
    safe_norm = np.where(ft_norm > 0.0, ft_norm, 1.0)
    scale = np.where(slip, cap / safe_norm, 1.0)
    force = np.where(
        active[:, None], fn_mag[:, None] * nrm + scale[:, None] * ft, 0.0
    )
    internals = {
        "d": d, "normal": nrm, "active": active, "vn": vn,
        "approaching": approaching, "fn_mag": fn_mag, "positive": positive,
        "vt": vt, "ft": ft, "ft_norm": ft_norm, "cap": cap, "slip": slip,
        "scale": scale, "safe_norm": safe_norm,
    }
    return force, internals


def contact_force(point_w, velocity_w, platform, params):
    """Contact force on one world point (or a batch of points).

    Zero outside the support; inside, a spring-damper normal force
    ``(k_n * depth - c_d * min(v_n, 0)) n`` plus tangential ``-k_f v_t``
    clamped to the Coulomb cone ``|f_t| <= mu |f_n|``.
    """
    p = np.asarray(point_w, dtype=float)
    single = p.ndim == 1
    f, _ = _contact_forces(
        np.atleast_2d(p), np.atleast_2d(np.asarray(velocity_w, dtype=float)),
        platform, params,
    )
    return f[0] if single else f


# -- body assembly ---------------------------------------------------------


def farthest_point_subsample(points, count, start=0):
    """Deterministic greedy farthest-point selection of ``count`` indices."""
    n = len(points)
    if count >= n:
        return np.arange(n)
    chosen = [start]
    dist = np.linalg.norm(points - points[start], axis=1)
    for _ in range(count - 1):
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        dist = np.minimum(dist, np.linalg.norm(points - points[nxt], axis=1))
    return np.array(sorted(chosen))


def select_contact_points(vertices, band_fraction=CONTACT_BAND_FRACTION,
                          cap=CONTACT_POINT_CAP, full=False):
    """Indices of contact-candidate vertices.

    Default: vertices whose rest height above the mesh minimum is below
    ``band_fraction`` of the bounding-box height, subsampled to ``cap``
    points by farthest-point selection.  ``full`` selects every vertex.
    """
    v = np.asarray(vertices)
    if full:
        return np.arange(len(v))
    z = v[:, 2] - v[:, 2].min()
    band = band_fraction * (v[:, 2].max() - v[:, 2].min())
    idx = np.flatnonzero(z < max(band, 1e-12))
    if len(idx) > cap:
        lowest = int(np.argmin(v[idx, 2]))
        sub = farthest_point_subsample(v[idx], cap, start=lowest)
        idx = idx[sub]
    return idx


def build_body(mesh, params, band_fraction=CONTACT_BAND_FRACTION,
               cap=CONTACT_POINT_CAP, full_vertex_contact=False,
               ground_gap=GROUND_GAP):
    """Assemble a :class:`RigidBody` from a mesh at the given density.

    The body self-canonicalizes: contact points are COM-relative and the
    world offset puts the lowest vertex ``ground_gap`` above z=0 with the
    COM on the vertical axis, matching the upright starting pose.
    """
    props = compute_mass_properties(mesh, params.density)
    v = mesh.vertices
    idx = select_contact_points(v, band_fraction, cap, full_vertex_contact)
    points = v[idx] - props.com
    offset = np.array(
        [0.0, 0.0, props.com[2] - v[:, 2].min() + ground_gap]
    )
    return RigidBody(
        mass=props.mass,
        inertia_inv=props.inertia_body_inv,
        contact_points=points,
        contact_indices=idx,
        offset=offset,
        com=props.com.copy(),
    )


# -- integration -------------------------------------------------------------


def _step_arrays(t_vec, q, p_mom, l_mom, body, platform, params):
    """One semi-implicit Euler step on raw state arrays.

    Returns the new state plus the internals the adjoint needs to replay
    the step exactly.
    """
    dt = params.dt
    rot = quat.to_matrix(q)
    iw_inv = rot @ body.inertia_inv @ rot.T
    omega = iw_inv @ l_mom
    r = body.contact_points @ rot.T
    xw = r + (t_vec + body.offset)
    vw = (p_mom / body.mass) + np.cross(omega, r)
    force_pts, contact = _contact_forces(xw, vw, platform, params)
    force = force_pts.sum(axis=0)
    force[2] -= params.gravity * body.mass
    torque = np.cross(r, force_pts).sum(axis=0)
    p_new = p_mom + dt * force
    l_new = l_mom + dt * torque
    v_new = p_new / body.mass
    omega_new = iw_inv @ l_new
    t_new = t_vec + dt * v_new
    omega_quat = np.concatenate([[0.0], omega_new])
    q_raw = q + dt * 0.5 * quat.multiply(omega_quat, q)
    q_new = q_raw / np.linalg.norm(q_raw)
    internals = {
        "rot": rot, "iw_inv": iw_inv, "omega": omega, "r": r, "xw": xw,
        "vw": vw, "force_pts": force_pts, "contact": contact,
        "p_new": p_new, "l_new": l_new, "omega_new": omega_new,
        "q_raw": q_raw,
    }
    return t_new, q_new, p_new, l_new, internals


def step(state, body, platform, params):
    """Advance one time step; raises on non-finite results."""
    t_new, q_new, p_new, l_new, _ = _step_arrays(
        state.translation, state.quaternion, state.linear_momentum,
        state.angular_momentum, body, platform, params,
    )
    if not (
        np.isfinite(t_new).all() and np.isfinite(q_new).all()
        and np.isfinite(p_new).all() and np.isfinite(l_new).all()
    ):
        raise SimulationError("non-finite state after step")
    return RigidState(t_new, q_new, p_new, l_new)


def run_steps(body, state0, n_steps, platform, params,
              record_contacts=False):
    """Integrate ``n_steps`` steps, recording every intermediate state.

    Returns dense state arrays of length n_steps + 1 (plus the per-step
    contact activation mask when requested).  This is the primal pass
    shared by :func:`simulate` and the adjoint.
    """
    t_arr = np.empty((n_steps + 1, 3))
    q_arr = np.empty((n_steps + 1, 4))
    p_arr = np.empty((n_steps + 1, 3))
    l_arr = np.empty((n_steps + 1, 3))
    t_arr[0] = state0.translation
    q_arr[0] = state0.quaternion
    p_arr[0] = state0.linear_momentum
    l_arr[0] = state0.angular_momentum
    active = (
        np.zeros((n_steps, body.n_contacts), dtype=bool)
        if record_contacts else None
    )
    t_vec, q, p_mom, l_mom = (
        state0.translation, state0.quaternion,
        state0.linear_momentum, state0.angular_momentum,
    )
    for k in range(n_steps):
        t_vec, q, p_mom, l_mom, internals = _step_arrays(
            t_vec, q, p_mom, l_mom, body, platform, params
        )
        if not np.isfinite(q).all() or not np.isfinite(t_vec).all():
            raise SimulationError(f"non-finite state at step {k + 1}")
        t_arr[k + 1] = t_vec
        q_arr[k + 1] = q
        p_arr[k + 1] = p_mom
        l_arr[k + 1] = l_mom
        if record_contacts:
            active[k] = internals["contact"]["active"]
    return t_arr, q_arr, p_arr, l_arr, active


def simulate(mesh, initial=None, params=None, platform=None, record_stride=1,
             band_fraction=CONTACT_BAND_FRACTION, cap=CONTACT_POINT_CAP,
             full_vertex_contact=False, ground_gap=GROUND_GAP, body=None):
    """Simulate a mesh for ``params.end_time`` seconds.

    The mesh should be canonical (grounded, COM over the origin); the body
    starts a hair above the support.  ``initial=None`` means the upright
    rest state.  Identical inputs produce bit-identical trajectories.
    """
    params = params or SimParams()
    platform = platform or Platform.ground()
    if body is None:
        body = build_body(
            mesh, params, band_fraction, cap, full_vertex_contact, ground_gap
        )
    state0 = initial or RigidState.rest()
    n = params.n_steps
    t_arr, q_arr, p_arr, l_arr, _ = run_steps(
        body, state0, n, platform, params
    )
    rec = np.arange(0, n + 1, record_stride)
    if rec[-1] != n:
        rec = np.append(rec, n)
    return Trajectory(
        times=rec * params.dt,
        translations=t_arr[rec],
        quaternions=q_arr[rec],
        linear_momenta=p_arr[rec],
        angular_momenta=l_arr[rec],
        dt=params.dt,
        stride=record_stride,
        body_offset=body.offset,
        body_com=body.com,
    )
