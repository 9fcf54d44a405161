"""Certification tour: perturbation battery, platforms, cut-plane baseline.

The battery re-drops a mesh from seeded random tilts and counts runs whose
maximum height survives within 3%.  Platform tests replace the ground with
a 10-degree incline (friction keeps a cube in place at mu=0.5, it slides
off at mu=0.05) and a sphere.  The cut-plane baseline flattens the bottom
of a mesh, which works for round-bottomed shapes but cannot help when the
center of mass projects outside every achievable cross-section.
"""

import numpy as np

from standable import SimParams, compute_mass_properties, cut_plane, certify
from standable.evaluate import battery_sweep, platform_test
from standable.fixtures import make_fixture
from standable.mesh import ground_and_center
from standable.platforms import Platform
from standable.primitives import box, icosphere

cube = box((0.6, 0.6, 0.6), subdivisions=4)
cube, _ = ground_and_center(cube, compute_mass_properties(cube, 1e3).com)

print("perturbation battery on the cube (20 trials per angle, seed 0):")
for angle, rate in battery_sweep(cube, angles=[0, 0.02, 0.08], n_trials=20):
    print(f"  phi_max={angle:0.2f}: success rate {rate:.2f}")

print("\nplatform tests on the cube:")
for label, platform, params in (
    ("incline 10 deg, mu=0.5 ", Platform.incline(np.deg2rad(10)),
     SimParams()),
    ("incline 10 deg, mu=0.05", Platform.incline(np.deg2rad(10)),
     SimParams(friction_coeff=0.05)),
):
    verdict, score, details = platform_test(cube, platform, params)
    print(f"  {label}: verdict={verdict} TRD={score:.4f} "
          f"slide={details['slide_distance']:.3f} m")

sphere = icosphere(0.4, 3, center=(0, 0, 0.4))
sphere, _ = ground_and_center(sphere, compute_mass_properties(sphere, 1e3).com)
cut = cut_plane(sphere, 0.06)
print(f"\nsphere cut at 0.06: TRD {certify(cut)['trd']:.4f} "
      "(flat base makes it stand)")

capsule = make_fixture("offset-capsule")
height = 0.10 * capsule.bbox_height()
cut = cut_plane(capsule, height)
result = certify(cut)
print(f"offset capsule cut at 10% height: TRD {result['trd']:.3f} "
      "(still falls: COM projects outside the cut)")
