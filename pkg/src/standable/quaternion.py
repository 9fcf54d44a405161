"""Unit-quaternion helpers for rigid-body orientation.

Quaternions are numpy arrays ``(w, x, y, z)`` and represent world-from-body
rotations.  Every forward routine here has a matching ``*_vjp`` companion so
the simulation adjoint can pull cotangents back through orientation updates.
"""

import numpy as np

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def normalize(q):
    """Return q scaled to unit length."""
    return q / np.linalg.norm(q)


def normalize_vjp(q_raw, g_unit):
    """Pull a cotangent on ``normalize(q_raw)`` back to ``q_raw``.

    For y = q/|q| the Jacobian is (I - y y^T) / |q|.
    """
    n = np.linalg.norm(q_raw)
    y = q_raw / n
    return (g_unit - y * np.dot(y, g_unit)) / n


def multiply(a, b):
    """Hamilton product a * b."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def left_matrix(a):
    """Matrix L(a) with L(a) @ b == multiply(a, b)."""
    w, x, y, z = a
    return np.array(
        [
            [w, -x, -y, -z],
            [x, w, -z, y],
            [y, z, w, -x],
            [z, -y, x, w],
        ]
    )


def right_matrix(b):
    """Matrix R(b) with R(b) @ a == multiply(a, b)."""
    w, x, y, z = b
    return np.array(
        [
            [w, -x, -y, -z],
            [x, w, z, -y],
            [y, -z, w, x],
            [z, y, -x, w],
        ]
    )


def from_axis_angle(axis, angle):
    """Quaternion rotating by ``angle`` (radians) about ``axis`` (3-vector)."""
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n == 0.0:
        raise ValueError("rotation axis must be nonzero")
    half = 0.5 * angle
    q = np.empty(4)
    q[0] = np.cos(half)
    q[1:] = np.sin(half) * axis / n
    return q


def to_matrix(q):
    """Rotation matrix of a unit quaternion.

    Uses the homogeneous (quadratic) form so the same polynomial serves
    forward evaluation and the VJP.
    """
    w, x, y, z = q
    ww, xx, yy, zz = w * w, x * x, y * y, z * z
    wx, wy, wz = w * x, w * y, w * z
    xy, xz, yz = x * y, x * z, y * z
    return np.array(
        [
            [ww + xx - yy - zz, 2.0 * (xy - wz), 2.0 * (xz + wy)],
            [2.0 * (xy + wz), ww - xx + yy - zz, 2.0 * (yz - wx)],
            [2.0 * (xz - wy), 2.0 * (yz + wx), ww - xx - yy + zz],
        ]
    )


def to_matrix_vjp(q, g):
    """Pull a 3x3 cotangent on ``to_matrix(q)`` back to q.

    ``g`` is dL/dR; the result is dL/dq for the homogeneous polynomial form.
    """
    w, x, y, z = q
    tr = g[0, 0] + g[1, 1] + g[2, 2]
    gw = 2.0 * (
        w * tr
        - z * g[0, 1]
        + y * g[0, 2]
        + z * g[1, 0]
        - x * g[1, 2]
        - y * g[2, 0]
        + x * g[2, 1]
    )
    gx = 2.0 * (
        x * (g[0, 0] - g[1, 1] - g[2, 2])
        + y * (g[0, 1] + g[1, 0])
        + z * (g[0, 2] + g[2, 0])
        + w * (g[2, 1] - g[1, 2])
    )
    gy = 2.0 * (
        y * (g[1, 1] - g[0, 0] - g[2, 2])
        + x * (g[0, 1] + g[1, 0])
        + z * (g[1, 2] + g[2, 1])
        + w * (g[0, 2] - g[2, 0])
    )
    gz = 2.0 * (
        z * (g[2, 2] - g[0, 0] - g[1, 1])
        + x * (g[0, 2] + g[2, 0])
        + y * (g[1, 2] + g[2, 1])
        + w * (g[1, 0] - g[0, 1])
    )
    return np.array([gw, gx, gy, gz])


def rotate(q, v):
    """Rotate 3-vector(s) v by quaternion q; v may be (3,) or (n, 3)."""
    return np.asarray(v) @ to_matrix(q).T
