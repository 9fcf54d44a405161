"""Reverse-mode differentiation of simulated trajectories.

The adjoint target is the discrete integrator exactly as implemented in
:mod:`simulation` (discretize-then-differentiate): each step's intermediates
are recomputed from the taped input state and every operation is pulled back
by hand, including the quaternion renormalization projection and the contact
clamps (one-sided subgradients).  Gradients flow to the rest vertex
positions through the contact points, the mass properties, and the initial
grounding translation.

The whole path is double precision; a finite-difference harness that
detects contact-set changes between the +/- evaluations lives at the bottom.
"""

from dataclasses import dataclass

import numpy as np

from . import quaternion as quat
from .mass import mass_properties_vjp
from .platforms import Platform, platform_sdf_vjp
from .simulation import (
    GROUND_GAP,
    CONTACT_BAND_FRACTION,
    CONTACT_POINT_CAP,
    RigidState,
    SimParams,
    Trajectory,
    build_body,
    run_steps,
    _step_arrays,
)

STATE_BYTES = 13 * 8  # T(3) + q(4) + P(3) + L(3) doubles


class AdjointError(RuntimeError):
    """Non-finite adjoint or a loss referencing unrecorded states."""


@dataclass
class Tape:
    """Primal record of one simulation: dense states plus contact activity.

    Replaying the tape (rebuilding the trajectory and re-evaluating a loss)
    reproduces the primal value bit-exactly because the stored states are
    the integrator's own outputs.
    """

    translations: np.ndarray
    quaternions: np.ndarray
    linear_momenta: np.ndarray
    angular_momenta: np.ndarray
    contact_active: np.ndarray
    body: object
    params: SimParams
    platform: Platform

    @property
    def n_steps(self):
        return len(self.translations) - 1

    def trajectory(self):
        n = self.n_steps
        return Trajectory(
            times=np.arange(n + 1) * self.params.dt,
            translations=self.translations,
            quaternions=self.quaternions,
            linear_momenta=self.linear_momenta,
            angular_momenta=self.angular_momenta,
            dt=self.params.dt,
            stride=1,
            body_offset=self.body.offset,
            body_com=self.body.com,
        )

    def replay_loss(self, loss):
        value, _ = loss(self.trajectory())
        return value


@dataclass
class TrajectoryCotangent:
    """Loss cotangents on every recorded state (dense, stride 1)."""

    translations: np.ndarray
    quaternions: np.ndarray
    linear_momenta: np.ndarray
    angular_momenta: np.ndarray

    @staticmethod
    def zeros(n_states):
        return TrajectoryCotangent(
            translations=np.zeros((n_states, 3)),
            quaternions=np.zeros((n_states, 4)),
            linear_momenta=np.zeros((n_states, 3)),
            angular_momenta=np.zeros((n_states, 3)),
        )


def record_tape(mesh, params, platform, initial=None, **body_kwargs):
    """Run the primal simulation densely and return the tape.

    ``initial`` is treated as a constant of the differentiation (the
    upright-rest convention makes it vertex-independent).
    """
    body = build_body(mesh, params, **body_kwargs)
    t_arr, q_arr, p_arr, l_arr, active = run_steps(
        body, initial or RigidState.rest(), params.n_steps, platform, params,
        record_contacts=True,
    )
    return Tape(
        translations=t_arr, quaternions=q_arr, linear_momenta=p_arr,
        angular_momenta=l_arr, contact_active=active, body=body,
        params=params, platform=platform,
    )


# -- per-step adjoint --------------------------------------------------------


def _contact_forces_vjp(contact, velocities_w, params, g_force):
    """Pull contact-force cotangents back to (distance, normal, velocity)."""
    nrm = contact["normal"]
    active = contact["active"]
    fn_mag = contact["fn_mag"]
    vn = contact["vn"]
    ft = contact["ft"]
    cap = contact["cap"]
    slip = contact["slip"]
    scale = contact["scale"]
    safe_norm = contact["safe_norm"]

    gf = np.where(active[:, None], g_force, 0.0)
    g_fn = np.einsum("ij,ij->i", nrm, gf)
    g_n = fn_mag[:, None] * gf
    g_scale = np.einsum("ij,ij->i", ft, gf)
    g_ft = scale[:, None] * gf

    g_cap = np.where(slip, g_scale / safe_norm, 0.0)
    g_ftnorm = np.where(slip, -cap / safe_norm**2 * g_scale, 0.0)
    g_fn += params.friction_coeff * g_cap
    g_ft += (g_ftnorm / safe_norm)[:, None] * ft

    g_vt = -params.friction_stiffness * g_ft
    g_vw = g_vt.copy()
    g_vn = -np.einsum("ij,ij->i", nrm, g_vt)
    g_n += -vn[:, None] * g_vt

    positive = contact["positive"]
    g_pen = np.where(positive, params.contact_stiffness * g_fn, 0.0)
    g_vn += np.where(
        positive & contact["approaching"], -params.contact_damping * g_fn, 0.0
    )

    g_vw += g_vn[:, None] * nrm
    g_n += g_vn[:, None] * velocities_w
    g_d = np.where(active, -g_pen, 0.0)
    return g_d, g_n, g_vw


def _step_backward(state_in, cot_out, body, platform, params, grads):
    """Adjoint of one integrator step.

    ``state_in`` is the step's input state (from the tape), ``cot_out`` the
    cotangent on its output; returns the cotangent on the input state and
    accumulates into ``grads`` (keys: points, inertia_inv, offset, mass).
    """
    t_vec, q, p_mom, l_mom = state_in
    g_t1, g_q1, g_p1_out, g_l1_out = cot_out
    dt = params.dt
    mass = body.mass

    # replay the step to get intermediates on exactly the same branches
    _, _, _, _, it = _step_arrays(
        t_vec, q, p_mom, l_mom, body, platform, params
    )
    rot, iw_inv, omega, r = it["rot"], it["iw_inv"], it["omega"], it["r"]
    vw, force_pts, contact = it["vw"], it["force_pts"], it["contact"]
    p_new, l_new, omega_new = it["p_new"], it["l_new"], it["omega_new"]
    q_raw = it["q_raw"]

    # q1 = normalize(q_raw); q_raw = q + dt * 0.5 * (0, omega1) x q
    g_qraw = quat.normalize_vjp(q_raw, g_q1)
    g_q = g_qraw.copy()
    g_qdot = dt * g_qraw
    omega_quat = np.concatenate([[0.0], omega_new])
    g_omega1 = 0.5 * (quat.right_matrix(q).T @ g_qdot)[1:]
    g_q += 0.5 * (quat.left_matrix(omega_quat).T @ g_qdot)

    # T1 = T + dt * P1 / M
    g_t = g_t1.copy()
    g_v1 = dt * g_t1

    # omega1 = iw_inv @ L1
    g_iw_inv = np.outer(g_omega1, l_new)
    g_l1 = g_l1_out + iw_inv.T @ g_omega1

    # v1 = P1 / M
    g_p1 = g_p1_out + g_v1 / mass
    grads["mass"] += -float(p_new @ g_v1) / mass**2

    # P1 = P + dt F ; L1 = L + dt tau
    g_p = g_p1.copy()
    g_force = dt * g_p1
    g_l = g_l1.copy()
    g_tau = dt * g_l1

    # tau = sum r x f ; F = sum f + (0, 0, -g M)
    g_r = np.cross(force_pts, g_tau)
    g_f = np.cross(g_tau, r)
    g_f += g_force
    grads["mass"] += -params.gravity * g_force[2]

    # contact force and sdf pullbacks
    g_d, g_n, g_vw = _contact_forces_vjp(contact, vw, params, g_f)
    g_xw = platform_sdf_vjp(platform, it["xw"], g_d, g_n)

    # vw = P/M + omega x r
    g_vw_sum = g_vw.sum(axis=0)
    g_p += g_vw_sum / mass
    grads["mass"] += -float(p_mom @ g_vw_sum) / mass**2
    g_omega = np.cross(r, g_vw).sum(axis=0)
    g_r += np.cross(g_vw, omega)

    # xw = r + T + offset
    g_r += g_xw
    g_xw_sum = g_xw.sum(axis=0)
    g_t += g_xw_sum
    grads["offset"] += g_xw_sum

    # r_i = rot @ X_i
    g_rot = g_r.T @ body.contact_points
    grads["points"] += g_r @ rot

    # omega = iw_inv @ L
    g_iw_inv += np.outer(g_omega, l_mom)
    g_l += iw_inv.T @ g_omega

    # iw_inv = rot A rot^T
    a_mat = body.inertia_inv
    g_rot += g_iw_inv @ rot @ a_mat + g_iw_inv.T @ rot @ a_mat
    grads["inertia_inv"] += rot.T @ g_iw_inv @ rot

    # rot = R(q)
    g_q += quat.to_matrix_vjp(q, g_rot)
    return g_t, g_q, g_p, g_l


def _backward_over_range(tape, cot, lo, hi, states, cot_state, grads):
    """Adjoint sweep over steps hi-1 .. lo given materialized states."""
    g_t, g_q, g_p, g_l = cot_state
    for k in range(hi - 1, lo - 1, -1):
        g_t = g_t + cot.translations[k + 1]
        g_q = g_q + cot.quaternions[k + 1]
        g_p = g_p + cot.linear_momenta[k + 1]
        g_l = g_l + cot.angular_momenta[k + 1]
        state_in = (
            states[0][k - lo], states[1][k - lo],
            states[2][k - lo], states[3][k - lo],
        )
        g_t, g_q, g_p, g_l = _step_backward(
            state_in, (g_t, g_q, g_p, g_l), tape.body, tape.platform,
            tape.params, grads,
        )
        if not np.isfinite(g_q).all() or not np.isfinite(g_t).all():
            raise AdjointError(f"non-finite adjoint at step {k}")
    return g_t, g_q, g_p, g_l


def _chain_to_vertices(mesh, params, body, grads):
    """Pull body-parameter gradients back to rest vertex positions."""
    v = mesh.vertices
    grad_v = np.zeros_like(v)
    grad_v[body.contact_indices] += grads["points"]
    g_com = -grads["points"].sum(axis=0)

    # offset = (0, 0, com_z - min_z + gap); x/y entries are constants
    g_com = g_com + np.array([0.0, 0.0, grads["offset"][2]])
    amin = int(np.argmin(v[:, 2]))
    grad_v[amin, 2] += -grads["offset"][2]

    # inertia_inv = inertia_body^{-1}
    a_mat = body.inertia_inv
    g_inertia = -a_mat @ grads["inertia_inv"] @ a_mat

    grad_v += mass_properties_vjp(
        v, mesh.faces, params.density,
        g_mass=grads["mass"], g_com=g_com, g_inertia=g_inertia,
    )
    return grad_v


def _evaluate_loss(tape, loss):
    value, cot = loss(tape.trajectory())
    n_states = tape.n_steps + 1
    if len(cot.translations) != n_states or len(cot.quaternions) != n_states:
        raise AdjointError(
            "loss cotangent references states the tape did not record "
            f"(expected {n_states} states)"
        )
    return value, cot


def _grad_from_tape(tape, mesh, loss):
    value, cot = _evaluate_loss(tape, loss)
    grads = _fresh_grads(tape.body)
    states = (
        tape.translations, tape.quaternions,
        tape.linear_momenta, tape.angular_momenta,
    )
    cot_state = (np.zeros(3), np.zeros(4), np.zeros(3), np.zeros(3))
    _backward_over_range(
        tape, cot, 0, tape.n_steps, states, cot_state, grads
    )
    grad_v = _chain_to_vertices(mesh, tape.params, tape.body, grads)
    if not np.isfinite(grad_v).all():
        raise AdjointError("non-finite vertex gradient")
    return value, grad_v


def grad_through_sim(mesh, params=None, platform=None, loss=None,
                     initial=None, band_fraction=CONTACT_BAND_FRACTION,
                     cap=CONTACT_POINT_CAP, full_vertex_contact=False,
                     ground_gap=GROUND_GAP):
    """Value and per-vertex gradient of a trajectory functional.

    ``loss`` maps a dense :class:`Trajectory` to ``(value, cotangent)``.
    The returned gradient is the exact reverse-mode derivative of the
    discrete integrator with respect to the rest vertex positions,
    including the mass-property and grounding chains.
    """
    params = params or SimParams()
    platform = platform or Platform.ground()
    tape = record_tape(
        mesh, params, platform, initial=initial, band_fraction=band_fraction,
        cap=cap, full_vertex_contact=full_vertex_contact,
        ground_gap=ground_gap,
    )
    return _grad_from_tape(tape, mesh, loss)


def _fresh_grads(body):
    return {
        "points": np.zeros_like(body.contact_points),
        "inertia_inv": np.zeros((3, 3)),
        "offset": np.zeros(3),
        "mass": 0.0,
    }


def checkpointed_grad(mesh, params=None, platform=None, loss=None,
                      memory_budget=None, initial=None,
                      band_fraction=CONTACT_BAND_FRACTION,
                      cap=CONTACT_POINT_CAP, full_vertex_contact=False,
                      ground_gap=GROUND_GAP):
    """Same contract as :func:`grad_through_sim` under a tape-memory budget.

    ``memory_budget`` is in bytes and bounds the stored simulation states
    (checkpoints plus one recomputed segment); the loss functional's own
    trajectory evaluation is the caller's memory.  Segments are recomputed
    with identical arithmetic, so the gradient matches the full tape to the
    last bit.
    """
    params = params or SimParams()
    platform = platform or Platform.ground()
    if memory_budget is None:
        raise ValueError("memory_budget (bytes) is required")
    n = params.n_steps
    budget_states = int(memory_budget // STATE_BYTES)
    if budget_states >= n + 1 or n == 1:
        return grad_through_sim(
            mesh, params, platform, loss, initial, band_fraction, cap,
            full_vertex_contact, ground_gap,
        )

    # peak storage for segment length k: ceil(n/k)+1 checkpoints + k live
    best_k = None
    best_peak = None
    for k in range(1, n + 1):
        peak = -(-n // k) + 1 + k
        if peak <= budget_states and (best_peak is None or peak < best_peak):
            best_peak, best_k = peak, k
    if best_k is None:
        raise ValueError(
            f"memory budget {memory_budget} B holds {budget_states} states; "
            "below one checkpoint segment"
        )
    seg = best_k

    # One dense forward to evaluate the loss; keep only the checkpoints.
    tape_full = record_tape(
        mesh, params, platform, initial=initial, band_fraction=band_fraction,
        cap=cap, full_vertex_contact=full_vertex_contact,
        ground_gap=ground_gap,
    )
    body = tape_full.body
    value, cot = _evaluate_loss(tape_full, loss)
    starts = list(range(0, n, seg))
    checkpoints = {
        s: (
            tape_full.translations[s].copy(),
            tape_full.quaternions[s].copy(),
            tape_full.linear_momenta[s].copy(),
            tape_full.angular_momenta[s].copy(),
        )
        for s in starts
    }
    tape = Tape(
        translations=None, quaternions=None, linear_momenta=None,
        angular_momenta=None, contact_active=None, body=body,
        params=params, platform=platform,
    )
    del tape_full

    grads = _fresh_grads(body)
    cot_state = (np.zeros(3), np.zeros(4), np.zeros(3), np.zeros(3))
    for lo in reversed(starts):
        hi = min(lo + seg, n)
        # rematerialize states lo..hi-1 from the checkpoint at lo
        length = hi - lo
        seg_t = np.empty((length, 3))
        seg_q = np.empty((length, 4))
        seg_p = np.empty((length, 3))
        seg_l = np.empty((length, 3))
        t_vec, q, p_mom, l_mom = checkpoints[lo]
        seg_t[0], seg_q[0], seg_p[0], seg_l[0] = t_vec, q, p_mom, l_mom
        for j in range(1, length):
            t_vec, q, p_mom, l_mom, _ = _step_arrays(
                t_vec, q, p_mom, l_mom, body, platform, params
            )
            seg_t[j], seg_q[j], seg_p[j], seg_l[j] = t_vec, q, p_mom, l_mom
        cot_state = _backward_over_range(
            tape, cot, lo, hi, (seg_t, seg_q, seg_p, seg_l), cot_state, grads
        )
    grad_v = _chain_to_vertices(mesh, params, body, grads)
    return value, grad_v


# -- prebuilt trajectory functionals ----------------------------------------


def rotation_deviation_functional():
    """Standability objective: squared Frobenius gap ||R(T) - I||_F^2."""

    def loss(traj):
        n = len(traj) - 1
        rot = traj.rotation_at(n)
        value = float(np.sum((rot - np.eye(3)) ** 2))
        cot = TrajectoryCotangent.zeros(len(traj))
        g_rot = 2.0 * (rot - np.eye(3))
        cot.quaternions[n] = quat.to_matrix_vjp(traj.quaternions[n], g_rot)
        return value, cot

    return loss


def final_height_functional():
    """T_z at the final state (a simple decoupled-dynamics probe)."""

    def loss(traj):
        cot = TrajectoryCotangent.zeros(len(traj))
        cot.translations[-1, 2] = 1.0
        return float(traj.translations[-1, 2]), cot

    return loss


def combine_functionals(terms):
    """Weighted sum of functionals: ``terms`` is [(weight, loss_fn), ...]."""

    def loss(traj):
        total = 0.0
        cot = TrajectoryCotangent.zeros(len(traj))
        for w, fn in terms:
            v, c = fn(traj)
            total += w * v
            cot.translations += w * c.translations
            cot.quaternions += w * c.quaternions
            cot.linear_momenta += w * c.linear_momenta
            cot.angular_momenta += w * c.angular_momenta
        return total, cot

    return loss


# -- finite-difference harness ----------------------------------------------


@dataclass
class FiniteDifferenceEntry:
    vertex: int
    axis: int
    analytic: float
    numeric: float
    rel_error: float
    accepted: bool
    reason: str = ""


@dataclass
class FiniteDifferenceReport:
    entries: list

    @property
    def accepted(self):
        return [e for e in self.entries if e.accepted]

    @property
    def rejected(self):
        return [e for e in self.entries if not e.accepted]

    @property
    def max_rel_error(self):
        errs = [e.rel_error for e in self.accepted]
        return max(errs) if errs else 0.0


def finite_difference_check(objective, vertices, coords, h=1e-4,
                            zero_tol=None):
    """Compare an adjoint gradient against central finite differences.

    ``objective(V)`` returns ``(value, grad, signature)``; the signature
    identifies the active branch set (contact activations, clamp states,
    selection sets).  Coordinates where the signature differs between the
    +h and -h evaluations sit on a kink and are reported as rejected
    rather than compared.  Coordinates where both derivatives sit below
    the difference quotient's roundoff resolution count as agreeing zeros.
    """
    vertices = np.asarray(vertices, dtype=float)
    value0, grad, _ = objective(vertices)
    if zero_tol is None:
        # resolution of (f(x+h) - f(x-h)) / 2h in double precision
        zero_tol = 100.0 * np.finfo(float).eps * max(1.0, abs(value0)) / h
    entries = []
    for i, ax in coords:
        vp = vertices.copy()
        vp[i, ax] += h
        vm = vertices.copy()
        vm[i, ax] -= h
        val_p, _, sig_p = objective(vp)
        val_m, _, sig_m = objective(vm)
        analytic = float(grad[i, ax])
        if sig_p != sig_m:
            entries.append(FiniteDifferenceEntry(
                i, ax, analytic, float("nan"), float("nan"), False,
                "contact/selection set changed between +h and -h",
            ))
            continue
        numeric = (val_p - val_m) / (2.0 * h)
        denom = max(abs(analytic), abs(numeric))
        if denom < zero_tol:
            entries.append(FiniteDifferenceEntry(
                i, ax, analytic, numeric, 0.0, True, "both ~ zero"
            ))
            continue
        rel = abs(analytic - numeric) / denom
        entries.append(FiniteDifferenceEntry(i, ax, analytic, numeric,
                                             rel, True))
    return FiniteDifferenceReport(entries)


def sim_objective(faces, params=None, platform=None, loss=None,
                  initial=None, **kwargs):
    """Adapter: vertex array -> (value, grad, signature) for the harness.

    The signature captures the per-step contact activation record and the
    contact-point selection, so the harness can detect kink crossings.
    """
    from .mesh import TriMesh

    params = params or SimParams()
    platform = platform or Platform.ground()
    loss = loss or rotation_deviation_functional()

    def objective(v):
        mesh = TriMesh(v, faces)
        tape = record_tape(mesh, params, platform, initial=initial, **kwargs)
        sig = (
            tape.contact_active.tobytes(),
            tape.body.contact_indices.tobytes(),
        )
        value, grad = _grad_from_tape(tape, mesh, loss)
        return value, grad, sig

    return objective
