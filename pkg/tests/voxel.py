"""Occupancy-grid oracle for mass properties, independent of the
signed-tetrahedron integrals: casts a vertical ray through each cell of an
n-by-n grid, finds surface crossings by 2D point-in-triangle tests plus
barycentric height interpolation, and fills cells between crossing pairs.
"""

import numpy as np


def voxel_estimate(mesh, n=128):
    """(volume, center-of-mass) from an n^3 occupancy grid."""
    lo, hi = mesh.bounds()
    pad = 1e-6 * np.linalg.norm(hi - lo)
    lo, hi = lo - pad, hi + pad
    xs = np.linspace(lo[0], hi[0], n, endpoint=False) + (hi[0] - lo[0]) / (2 * n)
    ys = np.linspace(lo[1], hi[1], n, endpoint=False) + (hi[1] - lo[1]) / (2 * n)
    zs = np.linspace(lo[2], hi[2], n, endpoint=False) + (hi[2] - lo[2]) / (2 * n)
    a = mesh.vertices[mesh.faces[:, 0]]
    b = mesh.vertices[mesh.faces[:, 1]]
    c = mesh.vertices[mesh.faces[:, 2]]
    cell = (hi - lo) / n
    vol_cell = cell.prod()
    total = 0.0
    moment = np.zeros(3)
    for x in xs:
        d1x_a = b[:, 0] - a[:, 0]
        for y in ys:
            d1 = d1x_a * (y - a[:, 1]) - (b[:, 1] - a[:, 1]) * (x - a[:, 0])
            d2 = (c[:, 0] - b[:, 0]) * (y - b[:, 1]) - (c[:, 1] - b[:, 1]) * (x - b[:, 0])
            d3 = (a[:, 0] - c[:, 0]) * (y - c[:, 1]) - (a[:, 1] - c[:, 1]) * (x - c[:, 0])
            inside = ((d1 >= 0) & (d2 >= 0) & (d3 >= 0)) | (
                (d1 <= 0) & (d2 <= 0) & (d3 <= 0)
            )
            if not inside.any():
                continue
            z_hits = []
            for f in np.flatnonzero(inside):
                pa, pb, pc = a[f], b[f], c[f]
                m = np.array([
                    [pb[0] - pa[0], pc[0] - pa[0]],
                    [pb[1] - pa[1], pc[1] - pa[1]],
                ])
                det = np.linalg.det(m)
                if abs(det) < 1e-18:
                    continue
                uv = np.linalg.solve(m, np.array([x - pa[0], y - pa[1]]))
                z_hits.append(pa[2] + uv[0] * (pb[2] - pa[2])
                              + uv[1] * (pc[2] - pa[2]))
            z_hits = np.unique(np.round(np.sort(np.asarray(z_hits)), 12))
            if len(z_hits) < 2:
                continue
            occupied = np.zeros(n, dtype=bool)
            for k in range(0, len(z_hits) - 1, 2):
                occupied |= (zs >= z_hits[k]) & (zs < z_hits[k + 1])
            cnt = int(occupied.sum())
            if cnt:
                total += cnt * vol_cell
                moment += vol_cell * np.array(
                    [x * cnt, y * cnt, zs[occupied].sum()]
                )
    return total, moment / total
