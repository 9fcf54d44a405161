"""Analytic support surfaces used as simulation boundary conditions.

Each platform is a signed-distance field: distance is negative inside the
solid support and the normal is the distance gradient.  Three variants
cover the certification protocols: the flat ground plane, an inclined
plane, and a sphere (balance-on-a-bump test).
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Platform:
    """Support surface: ``kind`` in {'ground', 'incline', 'sphere'}."""

    kind: str
    angle: float = 0.0                      # incline tilt, radians
    center: tuple = (0.0, 0.0, 0.0)         # sphere center
    radius: float = 1.0                     # sphere radius

    def __post_init__(self):
        if self.kind not in ("ground", "incline", "sphere"):
            raise ValueError(f"unknown platform kind {self.kind!r}")
        if self.kind == "incline" and not 0.0 <= self.angle < 0.5 * np.pi:
            raise ValueError("incline angle must be in [0, pi/2)")
        if self.kind == "sphere" and self.radius <= 0.0:
            raise ValueError("sphere radius must be positive")

    @staticmethod
    def ground():
        return Platform("ground")

    @staticmethod
    def incline(angle):
        return Platform("incline", angle=float(angle))

    @staticmethod
    def sphere(center, radius):
        return Platform("sphere", center=tuple(float(c) for c in center),
                        radius=float(radius))

    @property
    def incline_normal(self):
        # plane through the origin, tilted about the y-axis
        return np.array([-np.sin(self.angle), 0.0, np.cos(self.angle)])


def platform_sdf(platform, points):
    """Signed distance and outward unit normal at ``points``.

    ``points`` may be (3,) or (n, 3); results match the input batching.
    Distance is negative inside the support solid.
    """
    p = np.asarray(points, dtype=float)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    if platform.kind == "ground":
        d = p[:, 2].copy()
        n = np.zeros_like(p)
        n[:, 2] = 1.0
    elif platform.kind == "incline":
        nrm = platform.incline_normal
        d = p @ nrm
        n = np.broadcast_to(nrm, p.shape).copy()
    else:
        u = p - np.asarray(platform.center)
        rho = np.linalg.norm(u, axis=1)
        d = rho - platform.radius
        safe = np.where(rho > 0.0, rho, 1.0)
        n = u / safe[:, None]
        n[rho == 0.0] = (0.0, 0.0, 1.0)
    if single:
        return float(d[0]), n[0]
    return d, n


def platform_sdf_vjp(platform, points, g_d, g_n):
    """Pull cotangents on (distance, normal) back to the query points."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    g_d = np.atleast_1d(g_d)
    g_n = np.atleast_2d(g_n)
    if platform.kind == "ground":
        g = np.zeros_like(p)
        g[:, 2] = g_d
        return g
    if platform.kind == "incline":
        return g_d[:, None] * platform.incline_normal
    u = p - np.asarray(platform.center)
    rho = np.linalg.norm(u, axis=1)
    safe = np.where(rho > 0.0, rho, 1.0)
    n = u / safe[:, None]
    # d = rho, n = u/rho: dn = (I - n n^T)/rho du
    g = g_d[:, None] * n
    g += (g_n - n * np.einsum("ij,ij->i", n, g_n)[:, None]) / safe[:, None]
    g[rho == 0.0] = 0.0
    return g


def settle_translation(platform, points, gap=0.0):
    """Vertical shift placing ``points`` so min signed distance equals gap.

    Used to drop a mesh onto a platform before simulation: returns t such
    that min_i sdf(p_i + t e_z) == gap, moving only along z.
    """
    p = np.atleast_2d(np.asarray(points, dtype=float))
    if platform.kind == "ground":
        return gap - p[:, 2].min()
    if platform.kind == "incline":
        d, _ = platform_sdf(platform, p)
        return (gap - d.min()) / np.cos(platform.angle)
    c = np.asarray(platform.center)
    reach = platform.radius + gap
    horiz2 = (p[:, 0] - c[0]) ** 2 + (p[:, 1] - c[1]) ** 2
    touchable = horiz2 <= reach**2
    if not np.any(touchable):
        raise ValueError("no vertex is above the sphere; cannot settle")
    t = c[2] + np.sqrt(reach**2 - horiz2[touchable]) - p[touchable, 2]
    return t.max()
