"""Stability certification: TRD metric, perturbation battery, platform
tests, and the cut-plane post-processing baseline.

The TRD score is the time-averaged deviation of the body's up-axis from its
initial up-axis, integrated by a left-endpoint Riemann sum with a fixed
quadrature step.  The perturbation battery re-simulates the mesh from many
seeded random initial tilts and counts the runs whose final maximum height
stays within 3% of the initial maximum height.
"""

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from . import quaternion as quat
from .losses import TiltProbe, stable_equilibrium_loss
from .mass import compute_mass_properties
from .mesh import MeshError, TriMesh, ground_and_center
from .platforms import Platform, settle_translation
from .simulation import (
    GROUND_GAP,
    RigidState,
    SimParams,
    SimulationError,
    build_body,
    run_steps,
    simulate,
)

logger = logging.getLogger(__name__)

QUADRATURE_DT = 0.02
HEIGHT_TOLERANCE = 0.03
TRD_THRESHOLD = 0.05
TABLE_ANGLES = (0.0, 0.01, 0.02, 0.04, 0.08)


@dataclass
class EvalReport:
    """Certification summary; serializable and self-describing."""

    trd: float
    success_rates: dict
    platform_verdicts: dict
    stable_equilibrium_loss: float
    certified: bool
    seed: int
    params: dict
    extras: dict = field(default_factory=dict)

    def to_json(self):
        return asdict(self)


def trd(trajectory, t_end=2.0, quad_dt=QUADRATURE_DT):
    """Time-averaged rotation deviation of the up-axis.

    Left-endpoint Riemann sum of ||R(t) z - R(0) z|| over [0, t_end) at
    ``quad_dt`` spacing, divided by ``t_end``.  The trajectory must cover
    [0, t_end] with a recording stride that lands on the quadrature times.
    """
    step_dt = trajectory.dt * trajectory.stride
    ratio = quad_dt / step_dt
    stride = int(round(ratio))
    if abs(ratio - stride) > 1e-9 or stride < 1:
        raise ValueError(
            f"recording step {step_dt} does not divide quadrature step "
            f"{quad_dt}"
        )
    n_samples = int(round(t_end / quad_dt))
    needed = (n_samples - 1) * stride
    if needed >= len(trajectory):
        raise ValueError(
            f"trajectory covers {trajectory.times[-1]:.3f}s "
            f"< requested horizon {t_end}s"
        )
    z_hat = np.array([0.0, 0.0, 1.0])
    z0 = trajectory.rotation_at(0) @ z_hat
    total = 0.0
    for k in range(n_samples):
        z_t = trajectory.rotation_at(k * stride) @ z_hat
        total += np.linalg.norm(z_t - z0)
    return float(total * quad_dt / t_end)


# -- perturbation battery ----------------------------------------------------


def _tilted_initial_state(body, vertices, phi_x, phi_y, platform, gap):
    """Initial state: rotate about x then y, then settle vertically."""
    q0 = quat.multiply(
        quat.from_axis_angle([0.0, 1.0, 0.0], phi_y),
        quat.from_axis_angle([1.0, 0.0, 0.0], phi_x),
    )
    world = (vertices - body.com) @ quat.to_matrix(q0).T + body.offset
    t_z = settle_translation(platform, world, gap)
    state = RigidState.rest()
    state.quaternion = q0
    state.translation = np.array([0.0, 0.0, t_z])
    return state


def _run_trial(mesh, body, phi_x, phi_y, params, platform, gap):
    """One battery trial; success = final max height within 3% of initial."""
    state0 = _tilted_initial_state(body, mesh.vertices, phi_x, phi_y,
                                   platform, gap)
    try:
        t_arr, q_arr, _, _, _ = run_steps(
            body, state0, params.n_steps, platform, params
        )
    except SimulationError as exc:
        logger.warning("battery trial blew up (%s); counted as failure", exc)
        return False
    v_body = mesh.vertices - body.com
    h0 = (v_body @ quat.to_matrix(q_arr[0]).T)[:, 2].max() + (
        body.offset[2] + t_arr[0, 2]
    )
    h1 = (v_body @ quat.to_matrix(q_arr[-1]).T)[:, 2].max() + (
        body.offset[2] + t_arr[-1, 2]
    )
    return abs(h1 - h0) <= HEIGHT_TOLERANCE * abs(h0)


def perturbation_battery(mesh, phi_max, n_trials=100, seed=0, params=None,
                         platform=None, threads=1, **contact_kwargs):
    """Success rate over seeded random initial tilts.

    Per trial, tilt angles about x and y are drawn uniformly from
    (-phi_max, phi_max) using a generator keyed by (seed, trial index), so
    results are bit-reproducible and independent of execution order.
    """
    if n_trials <= 0:
        raise ValueError("n_trials must be positive")
    params = params or SimParams()
    platform = platform or Platform.ground()
    body = build_body(mesh, params, **contact_kwargs)
    gap = GROUND_GAP

    def trial(i):
        rng = np.random.default_rng([seed, i])
        phi_x = rng.uniform(-phi_max, phi_max) if phi_max > 0 else 0.0
        phi_y = rng.uniform(-phi_max, phi_max) if phi_max > 0 else 0.0
        return _run_trial(mesh, body, phi_x, phi_y, params, platform, gap)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(trial, range(n_trials)))
    else:
        outcomes = [trial(i) for i in range(n_trials)]
    return sum(outcomes) / n_trials


def default_sweep_angles():
    """The 13-angle protocol: 0 plus 12 log-spaced values in [0.005, 0.08]."""
    return np.concatenate([[0.0], np.geomspace(0.005, 0.08, 12)])


def battery_sweep(mesh, angles=None, n_trials=100, seed=0, params=None,
                  platform=None, threads=1, **contact_kwargs):
    """Perturbation battery across a list of maximum tilt angles."""
    if angles is None:
        angles = default_sweep_angles()
    return [
        (float(a), perturbation_battery(
            mesh, float(a), n_trials, seed, params, platform, threads,
            **contact_kwargs,
        ))
        for a in angles
    ]


# -- platform tests ----------------------------------------------------------


def platform_test(mesh, platform, params=None, trd_threshold=TRD_THRESHOLD,
                  **contact_kwargs):
    """Forward-simulate on a platform and certify the outcome.

    Returns ``(verdict, trd_score, details)``; the verdict requires both a
    small TRD and the 3% height criterion.  ``details`` includes the
    horizontal slide distance, which flags translation-only failures such
    as sliding down a low-friction incline.
    """
    params = params or SimParams()
    body = build_body(mesh, params, **contact_kwargs)
    state0 = RigidState.rest()
    if platform.kind == "incline":
        # place the body conforming to the slope, as one physically would;
        # the deviation score is measured relative to this initial pose
        state0.quaternion = quat.from_axis_angle([0.0, -1.0, 0.0],
                                                 platform.angle)
    rot0 = quat.to_matrix(state0.quaternion)
    world = (mesh.vertices - body.com) @ rot0.T + body.offset
    state0.translation = np.array(
        [0.0, 0.0, settle_translation(platform, world, GROUND_GAP)]
    )
    traj = simulate(mesh, initial=state0, params=params, platform=platform,
                    body=body)
    score = trd(traj, t_end=params.end_time)
    h0 = traj.world_vertices(mesh.vertices, 0)[:, 2].max()
    h1 = traj.world_vertices(mesh.vertices, len(traj) - 1)[:, 2].max()
    height_ok = abs(h1 - h0) <= HEIGHT_TOLERANCE * abs(h0)
    slide = float(np.linalg.norm(traj.translations[-1][:2]))
    verdict = bool(score < trd_threshold and height_ok)
    details = {
        "trd": float(score),
        "height_ok": bool(height_ok),
        "initial_max_height": float(h0),
        "final_max_height": float(h1),
        "slide_distance": slide,
    }
    return verdict, float(score), details


def certify(mesh, params=None, platform=None, probe=None,
            trd_threshold=TRD_THRESHOLD, **contact_kwargs):
    """Certification bundle used by the optimizer's early-stop check."""
    params = params or SimParams()
    platform = platform or Platform.ground()
    probe = probe or TiltProbe()
    traj = simulate(mesh, params=params, platform=platform, **contact_kwargs)
    score = trd(traj, t_end=params.end_time)
    props = compute_mass_properties(mesh, params.density)
    stable = stable_equilibrium_loss(mesh.vertices, props.com, probe)
    return {
        "trd": float(score),
        "stable_equilibrium_loss": float(stable),
        "certified": bool(score < trd_threshold and stable == 0.0),
    }


# -- cut-plane baseline ------------------------------------------------------


def _ear_clip(points2d):
    """Triangulate a simple polygon (indices into the input order).

    Handles collinear runs; ears whose closing edge passes through another
    boundary vertex are rejected to keep the cap free of T-junctions.
    """
    n = len(points2d)
    if n < 3:
        raise ValueError("polygon needs >= 3 vertices")
    pts = np.asarray(points2d, dtype=float)
    area2 = 0.0
    for i in range(n):
        j = (i + 1) % n
        area2 += pts[i, 0] * pts[j, 1] - pts[j, 0] * pts[i, 1]
    ccw = area2 > 0.0
    scale = max(np.ptp(pts[:, 0]), np.ptp(pts[:, 1]), 1e-30)
    eps = 1e-12 * scale * scale

    def cross_z(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    def inside_or_on(a, b, c, p):
        d1 = cross_z(a, b, p)
        d2 = cross_z(b, c, p)
        d3 = cross_z(c, a, p)
        if ccw:
            return d1 >= -eps and d2 >= -eps and d3 >= -eps
        return d1 <= eps and d2 <= eps and d3 <= eps

    idx = list(range(n))
    tris = []
    while len(idx) > 3:
        clipped = False
        m = len(idx)
        for k in range(m):
            i_prev, i_cur, i_next = idx[k - 1], idx[k], idx[(k + 1) % m]
            cz = cross_z(pts[i_prev], pts[i_cur], pts[i_next])
            convex = cz > eps if ccw else cz < -eps
            if not convex:
                continue
            blocked = any(
                inside_or_on(pts[i_prev], pts[i_cur], pts[i_next], pts[o])
                for o in idx
                if o not in (i_prev, i_cur, i_next)
            )
            if blocked:
                continue
            tris.append((i_prev, i_cur, i_next))
            del idx[k]
            clipped = True
            break
        if not clipped:
            raise MeshError("cut cross-section could not be triangulated")
    tris.append((idx[0], idx[1], idx[2]))
    return tris


def _loop_is_convex(points2d):
    """True when the loop turns one way everywhere (collinear runs allowed)."""
    pts = np.asarray(points2d, dtype=float)
    n = len(pts)
    scale = max(np.ptp(pts[:, 0]), np.ptp(pts[:, 1]), 1e-30)
    eps = 1e-12 * scale * scale
    sign = 0
    for i in range(n):
        a, b, c = pts[i - 1], pts[i], pts[(i + 1) % n]
        cz = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if abs(cz) <= eps:
            continue
        s = 1 if cz > 0 else -1
        if sign == 0:
            sign = s
        elif s != sign:
            return False
    return sign != 0


def _boundary_loops(faces):
    """Closed directed boundary loops of an open triangle surface."""
    directed = {}
    for tri in faces:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            directed[(a, b)] = directed.get((a, b), 0) + 1
    boundary = [e for e in directed if (e[1], e[0]) not in directed]
    nxt = {}
    for a, b in boundary:
        if a in nxt:
            raise MeshError("non-manifold cut boundary")
        nxt[a] = b
    loops = []
    visited = set()
    for a, b in boundary:
        if a in visited:
            continue
        loop = [a]
        visited.add(a)
        cur = nxt[a]
        while cur != a:
            loop.append(cur)
            visited.add(cur)
            cur = nxt[cur]
        loops.append(loop)
    return loops


def _face_components(faces):
    """Connected components of faces linked by shared undirected edges."""
    edge_faces = {}
    for fi, tri in enumerate(faces):
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (min(a, b), max(a, b))
            edge_faces.setdefault(key, []).append(fi)
    parent = list(range(len(faces)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for group in edge_faces.values():
        for other in group[1:]:
            ra, rb = find(group[0]), find(other)
            if ra != rb:
                parent[rb] = ra
    comps = {}
    for fi in range(len(faces)):
        comps.setdefault(find(fi), []).append(fi)
    return list(comps.values())


def cut_plane(mesh, height):
    """Cut-plane baseline: truncate below ``height`` and cap the section.

    Removes geometry below the horizontal plane z = height (measured on
    the grounded mesh), triangulates the cross-section flat, re-grounds
    the result, and returns a watertight mesh.  Multiple disconnected
    shells keep only the largest (by enclosed volume) with a warning.
    """
    v = mesh.vertices
    z = v[:, 2]
    if height <= z.min():
        return mesh
    if height >= z.max():
        raise MeshError("cut height is above the mesh; nothing would remain")

    below = z < height
    new_verts = [row for row in v]
    edge_cache = {}

    def cut_point(i, j):
        a, b = (i, j) if i < j else (j, i)
        key = (a, b)
        if key in edge_cache:
            return edge_cache[key]
        s = (height - z[a]) / (z[b] - z[a])
        if s <= 1e-9:
            idx = a
        elif s >= 1.0 - 1e-9:
            idx = b
        else:
            idx = len(new_verts)
            new_verts.append(v[a] + s * (v[b] - v[a]))
        edge_cache[key] = idx
        return idx

    out_faces = []

    def emit(a, b, c):
        if a != b and b != c and a != c:
            out_faces.append((a, b, c))

    for tri in mesh.faces:
        flags = below[list(tri)]
        n_below = int(flags.sum())
        if n_below == 0:
            out_faces.append(tuple(int(t) for t in tri))
            continue
        if n_below == 3:
            continue
        # rotate so the pattern starts at index 0
        order = None
        for r in range(3):
            rolled = np.roll(flags, -r)
            if n_below == 1 and rolled[0] and not rolled[1] and not rolled[2]:
                order = np.roll(tri, -r)
                break
            if n_below == 2 and rolled[0] and rolled[1] and not rolled[2]:
                order = np.roll(tri, -r)
                break
        a, b, c = (int(x) for x in order)
        if n_below == 1:
            p_ab = cut_point(a, b)
            p_ca = cut_point(c, a)
            emit(p_ab, b, c)
            emit(p_ab, c, p_ca)
        else:
            p_bc = cut_point(b, c)
            p_ca = cut_point(c, a)
            emit(p_bc, c, p_ca)

    if not out_faces:
        raise MeshError("cut removed the entire mesh")

    # cap every boundary loop; reversed order keeps shared edges opposite.
    # Convex sections (possibly with collinear lattice runs) fan from an
    # added interior point, which cannot produce slivers; concave ones are
    # ear-clipped.
    loops = _boundary_loops(out_faces)
    for loop in loops:
        ring = loop[::-1]
        ring_pts = np.array([new_verts[i] for i in ring])
        if _loop_is_convex(ring_pts[:, :2]):
            center = len(new_verts)
            new_verts.append(ring_pts.mean(axis=0))
            for k in range(len(ring)):
                emit(center, ring[k], ring[(k + 1) % len(ring)])
        else:
            tris = _ear_clip(ring_pts[:, :2])
            for i0, i1, i2 in tris:
                emit(ring[i0], ring[i1], ring[i2])
    verts_arr = np.array(new_verts)

    # keep the largest shell if the cut disconnected the mesh
    comps = _face_components(out_faces)
    if len(comps) > 1:
        warnings.warn(
            f"cut produced {len(comps)} shells; keeping the largest",
            stacklevel=2,
        )
        faces_arr = np.array(out_faces)

        def shell_volume(face_ids):
            tris = faces_arr[face_ids]
            a = verts_arr[tris[:, 0]]
            b = verts_arr[tris[:, 1]]
            c = verts_arr[tris[:, 2]]
            return abs(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)

        comps.sort(key=shell_volume)
        out_faces = [out_faces[i] for i in comps[-1]]

    faces_arr = np.array(out_faces)
    used = np.unique(faces_arr)
    remap = -np.ones(len(verts_arr), dtype=np.int64)
    remap[used] = np.arange(len(used))
    result = TriMesh(verts_arr[used], remap[faces_arr])
    props = compute_mass_properties(result, 1.0)
    grounded, _ = ground_and_center(result, props.com)
    return grounded
