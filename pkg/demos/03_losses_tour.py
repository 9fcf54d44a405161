"""A tour of the objective terms on closed-form shapes.

A grounded cube is in stable equilibrium (tilting raises its center of
mass); an apex-down cone is the canonical unstable equilibrium (any tilt
lowers it).  The smoothness terms read the mesh graph: normal consistency
over adjacent-face pairs and differential coordinates over the bottom band.
"""

import numpy as np

from standable import (
    LossWeights,
    TiltProbe,
    com_height_after_tilt,
    compute_mass_properties,
    normal_consistency_loss,
    stable_equilibrium_loss,
    stand_loss,
    bottom_laplacian_loss,
    total_loss,
)
from standable.mesh import ground_and_center
from standable.primitives import box, cone

probe = TiltProbe(angle=0.05, n_directions=20)


def canonical(mesh):
    props = compute_mass_properties(mesh, 1e3)
    out, _ = ground_and_center(mesh, props.com)
    return out, compute_mass_properties(out, 1e3).com


cube, cube_com = canonical(box((1, 1, 1), 1))
h = com_height_after_tilt(cube.vertices, cube_com, 0.1, (1.0, 0.0))
print(f"cube COM height 0.5 -> {h:.4f} after a 0.1 rad tilt (rises)")
print(f"cube stable-equilibrium loss: "
      f"{stable_equilibrium_loss(cube.vertices, cube_com, probe)}")

pointy, cone_com = canonical(
    cone(radius=0.4, height=1.0, apex="down", segments=24, side_rings=4,
         cap_rings=2)
)
h = com_height_after_tilt(pointy.vertices, cone_com, 0.1, (1.0, 0.0))
print(f"cone COM height {cone_com[2]:.4f} -> {h:.4f} after the same tilt "
      "(drops)")
print(f"cone stable-equilibrium loss: "
      f"{stable_equilibrium_loss(pointy.vertices, cone_com, probe):.2e}")

print(f"\nnormal consistency, 12-triangle cube: "
      f"{normal_consistency_loss(cube):.4f} (18 pairs: 12 at 90 deg)")
print(f"bottom-Laplacian, cube at h_b=0.1: "
      f"{bottom_laplacian_loss(cube, cube.bottom_vertices(0.1)):.4f}")

rot = np.diag([-1.0, -1.0, 1.0])  # half turn about z
print(f"\nstandability loss of a half-turn final rotation: "
      f"{stand_loss(rot):.1f}")

components = {"stand": 1e-3, "stable": 0.0, "normal": 1e-5,
              "bottom_laplacian": 1e-8, "fidelity": 0.0}
for iteration in (3, 10):
    value, mask = total_loss(components, LossWeights(), iteration)
    print(f"weighted total at iteration {iteration}: {value:.4f} "
          f"(stand term {'on' if mask['stand'] else 'off'})")
