"""Exact solutions as a first sanity pass on the solver.

sin(N x1) and cos x1 cos x2 are steady for Euler and decay as exp(-nu |k|^2 t)
under viscosity. The integrating-factor stepper reproduces that decay to
roundoff, whatever the step size.
"""

import numpy as np

from inviscid import GridSpec, SimulationConfig, evolve
from inviscid.diagnostics import lp_norm
from inviscid.fields import eigenmode, taylor_green

grid = GridSpec(128)

for N in (1, 3, 10):
    w0 = eigenmode(N, grid)
    traj = evolve(w0, grid, SimulationConfig(nu=0.01, dt=1e-2, t_end=1.0, snapshot_stride=100))
    exact = np.exp(-0.01 * N**2) * w0
    print(f"sin({N} x1): relative error {lp_norm(traj.final - exact, grid, 2) / lp_norm(exact, grid, 2):.1e}")

# Taylor-Green has |k|^2 = 2
w0 = taylor_green(grid)
traj = evolve(w0, grid, SimulationConfig(nu=0.05, dt=1e-2, t_end=2.0, snapshot_stride=50))
for t, w in zip(traj.times, traj.snapshots):
    print(f"t = {t:4.2f}  max|w| = {np.max(np.abs(w)):.6f}  exp(-2 nu t) = {np.exp(-0.1 * t):.6f}")

# Euler keeps sin(x1) fixed; the nonlinear term cancels exactly
traj = evolve(eigenmode(1, grid), grid, SimulationConfig(nu=0.0, dt=1e-2, t_end=5.0, snapshot_stride=500))
print("Euler drift of sin(x1) over T = 5:", np.max(np.abs(traj.final - traj.initial)))
