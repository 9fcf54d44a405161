"""Shared helpers for evaluation tests."""

import numpy as np

from standable.simulation import Trajectory


def synthetic_step_trajectory(q0, q_rest, n_records=101, dt=1e-3, stride=20):
    """Trajectory with quaternion q0 at t=0 and q_rest at every later sample."""
    quats = np.vstack([q0, np.tile(q_rest, (n_records - 1, 1))])
    zeros = np.zeros((n_records, 3))
    return Trajectory(
        times=np.arange(n_records) * dt * stride,
        translations=zeros.copy(),
        quaternions=quats,
        linear_momenta=zeros.copy(),
        angular_momenta=zeros.copy(),
        dt=dt,
        stride=stride,
    )
