"""Vortex patches and the vorticity distribution function.

Euler transports vorticity without changing its distribution, so the
Wasserstein-1 distance to the initial distribution measures how far a
viscous run drifts from that invariant. A disk patch and a Koch snowflake
patch (fractal boundary, dimension log 4 / log 3) are compared.
"""

import numpy as np

from inviscid import GridSpec, SimulationConfig, evolve
from inviscid.diagnostics import distribution, wasserstein1
from inviscid.fields import KOCH_DIMENSION, PatchSpec, box_counting_dimension, patch_indicator, vortex_patch

grid = GridSpec(256)

koch = PatchSpec(shape="koch", iterations=4, radius=2.0)
print(f"Koch boundary dimension {box_counting_dimension(patch_indicator(koch, grid)):.3f}"
      f" (exact {KOCH_DIMENSION:.4f})")

for spec in (PatchSpec(shape="disk", radius=1.0, mollify=0.1), PatchSpec(shape="koch", iterations=4, radius=2.0, mollify=0.1)):
    w0 = vortex_patch(spec, grid)
    pi0 = distribution(w0)
    print(spec.shape)
    for nu in (0.0, 1e-3, 1e-2):
        traj = evolve(w0, grid, SimulationConfig(nu=nu, dt=5e-3, t_end=1.0, snapshot_stride=200))
        print(f"  nu = {nu:<6g} W1(t=1) = {wasserstein1(distribution(traj.final), pi0):.2e}"
              f"  max|w| = {np.max(np.abs(traj.final)):.4f}")
