"""Deterministic watertight test solids: boxes, spheres, revolved profiles.

Everything here is exact, analytic geometry used to build fixtures with
known mass properties.  All outputs are closed, consistently oriented
triangle meshes.
"""

import numpy as np

from .mesh import TriMesh


def box(size=(1.0, 1.0, 1.0), subdivisions=1, center=(0.0, 0.0, 0.0)):
    """Axis-aligned box with ``subdivisions`` cells per edge on every face.

    Parameters
    ----------
    size : (sx, sy, sz) edge lengths in meters.
    subdivisions : int or (nx, ny, nz)
        Grid resolution per axis; 1 gives the plain 12-triangle box.
    center : box center.
    """
    if np.isscalar(subdivisions):
        nx = ny = nz = int(subdivisions)
    else:
        nx, ny, nz = (int(s) for s in subdivisions)
    sx, sy, sz = size
    xs = np.linspace(-0.5 * sx, 0.5 * sx, nx + 1)
    ys = np.linspace(-0.5 * sy, 0.5 * sy, ny + 1)
    zs = np.linspace(-0.5 * sz, 0.5 * sz, nz + 1)

    index = {}
    verts = []

    def vid(i, j, k):
        key = (i, j, k)
        if key not in index:
            index[key] = len(verts)
            verts.append((xs[i], ys[j], zs[k]))
        return index[key]

    faces = []

    def emit(quad):
        a, b, c, d = quad
        faces.append((a, b, c))
        faces.append((a, c, d))

    for i in range(nx):
        for j in range(ny):
            # z = max: CCW from above
            emit((vid(i, j, nz), vid(i + 1, j, nz),
                  vid(i + 1, j + 1, nz), vid(i, j + 1, nz)))
            # z = min: reversed
            emit((vid(i, j, 0), vid(i, j + 1, 0),
                  vid(i + 1, j + 1, 0), vid(i + 1, j, 0)))
    for i in range(nx):
        for k in range(nz):
            # y = max
            emit((vid(i, ny, k), vid(i, ny, k + 1),
                  vid(i + 1, ny, k + 1), vid(i + 1, ny, k)))
            # y = min
            emit((vid(i, 0, k), vid(i + 1, 0, k),
                  vid(i + 1, 0, k + 1), vid(i, 0, k + 1)))
    for j in range(ny):
        for k in range(nz):
            # x = max
            emit((vid(nx, j, k), vid(nx, j + 1, k),
                  vid(nx, j + 1, k + 1), vid(nx, j, k + 1)))
            # x = min
            emit((vid(0, j, k), vid(0, j, k + 1),
                  vid(0, j + 1, k + 1), vid(0, j + 1, k)))

    v = np.array(verts) + np.asarray(center, dtype=float)
    return TriMesh(v, np.array(faces))


def icosphere(radius=0.5, subdivisions=3, center=(0.0, 0.0, 0.0)):
    """Icosahedron subdivided ``subdivisions`` times, projected to a sphere."""
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=float,
    )
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [v for v in verts]
    for _ in range(subdivisions):
        cache = {}

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                cache[key] = len(verts)
                verts.append(m / np.linalg.norm(m))
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    v = np.array(verts) * radius + np.asarray(center, dtype=float)
    return TriMesh(v, np.array(faces))


def revolve(profile, segments=48):
    """Revolve an (r, z) profile around the z-axis into a closed solid.

    ``profile`` is a sequence of (radius, height) pairs walked from the
    bottom of the solid to the top; radius 0 entries are poles.  The profile
    must start and end either at a pole or with cap entries at constant z
    reaching radius 0, otherwise the result is open.  Winding follows the
    profile direction, giving outward normals for a bottom-to-top walk.
    """
    profile = [(float(r), float(z)) for r, z in profile]
    if segments < 3:
        raise ValueError("segments must be >= 3")
    theta = np.linspace(0.0, 2.0 * np.pi, segments, endpoint=False)
    cos_t, sin_t = np.cos(theta), np.sin(theta)

    verts = []
    ring_ids = []
    for r, z in profile:
        if r == 0.0:
            ring_ids.append(len(verts))
            verts.append((0.0, 0.0, z))
        else:
            base = len(verts)
            ring_ids.append(base)
            for c, s in zip(cos_t, sin_t):
                verts.append((r * c, r * s, z))

    faces = []
    for i in range(len(profile) - 1):
        r0 = profile[i][0]
        r1 = profile[i + 1][0]
        b0, b1 = ring_ids[i], ring_ids[i + 1]
        if r0 == 0.0 and r1 == 0.0:
            raise ValueError("two consecutive poles in profile")
        for j in range(segments):
            jn = (j + 1) % segments
            if r0 == 0.0:
                faces.append((b0, b1 + jn, b1 + j))
            elif r1 == 0.0:
                faces.append((b0 + j, b0 + jn, b1))
            else:
                faces.append((b0 + j, b0 + jn, b1 + jn))
                faces.append((b0 + j, b1 + jn, b1 + j))
    return TriMesh(np.array(verts), np.array(faces))


def _cap_entries(radius, z, rings, outward):
    """Constant-z cap profile entries; ``outward`` walks 0 -> radius."""
    radii = [radius * k / rings for k in range(1, rings + 1)]
    if outward:
        return [(0.0, z)] + [(r, z) for r in radii[:-1]]
    return [(r, z) for r in reversed(radii[:-1])] + [(0.0, z)]


def cone(radius=0.5, height=1.0, segments=48, side_rings=6, cap_rings=4,
         apex="up", tip_radius=0.0):
    """Closed cone; ``apex='down'`` builds the balancing-on-a-point variant.

    The apex sits at z=0 when pointing down (base disk on top); the base
    sits at z=0 when the apex points up.  ``tip_radius > 0`` truncates the
    apex into a small flat disk (frustum).
    """
    if apex == "down":
        if tip_radius > 0.0:
            tip = _cap_entries(tip_radius, 0.0, 1, outward=True)
            side = [
                (tip_radius + (radius - tip_radius) * k / side_rings,
                 height * k / side_rings)
                for k in range(side_rings + 1)
            ]
            profile = tip + side + _cap_entries(radius, height, cap_rings,
                                                outward=False)
        else:
            side = [(radius * k / side_rings, height * k / side_rings)
                    for k in range(side_rings + 1)]
            profile = side + _cap_entries(radius, height, cap_rings,
                                          outward=False)
    elif apex == "up":
        base = _cap_entries(radius, 0.0, cap_rings, outward=True)
        side = [(radius * (side_rings - k) / side_rings,
                 height * k / side_rings) for k in range(side_rings + 1)]
        profile = base + side
    else:
        raise ValueError("apex must be 'up' or 'down'")
    return revolve(profile, segments)


def capsule(radius=0.25, cylinder_height=0.5, segments=32, arc_steps=8):
    """Capsule standing on its lower cap: poles at z=0 and z=2r+h."""
    prof = [(0.0, 0.0)]
    for k in range(1, arc_steps + 1):
        phi = 0.5 * np.pi * k / arc_steps
        prof.append((radius * np.sin(phi), radius * (1.0 - np.cos(phi))))
    prof.append((radius, radius + cylinder_height))
    for k in range(1, arc_steps):
        phi = 0.5 * np.pi * k / arc_steps
        prof.append((radius * np.cos(phi),
                     radius + cylinder_height + radius * np.sin(phi)))
    prof.append((0.0, 2.0 * radius + cylinder_height))
    return revolve(prof, segments)


def cylinder(radius=0.5, height=1.0, segments=48, cap_rings=3, side_rings=1):
    """Closed cylinder with its base at z=0."""
    base = _cap_entries(radius, 0.0, cap_rings, outward=True)
    side = [(radius, height * k / side_rings) for k in range(side_rings + 1)]
    top = _cap_entries(radius, height, cap_rings, outward=False)
    return revolve(base + side + top, segments)


def l_prism(arm=2.0, thickness=1.0, depth=1.0):
    """L-shaped prism (two bars of width ``thickness``, length ``arm``).

    Cross-section in the xy-plane, extruded along z over ``depth``; the
    reflex corner makes it a useful asymmetric mass-property fixture.
    """
    a, t = float(arm), float(thickness)
    poly = np.array(
        [(0, 0), (a, 0), (a, t), (t, t), (t, a), (0, a)], dtype=float
    )
    n = len(poly)
    bottom = np.column_stack([poly, np.zeros(n)])
    top = np.column_stack([poly, np.full(n, float(depth))])
    verts = np.vstack([bottom, top])
    # polygon is star-shaped about vertex 0, so a fan triangulates it
    cap = [(0, k, k + 1) for k in range(1, n - 1)]
    faces = []
    for i0, i1, i2 in cap:
        faces.append((i0, i2, i1))                      # bottom, normal -z
        faces.append((n + i0, n + i1, n + i2))          # top, normal +z
    for i in range(n):
        j = (i + 1) % n
        faces.append((i, j, n + j))
        faces.append((i, n + j, n + i))
    return TriMesh(verts, np.array(faces))
