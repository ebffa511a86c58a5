"""Viscous vorticity as an average over stochastic back-to-labels maps.

omega(t, x) = E[omega0(A_t(x))], where A_t runs the flow backwards with
Brownian noise of strength sqrt(2 nu). The spread of omega0(A_t(x)) accounts
for the enstrophy lost to viscosity.
"""

import numpy as np

from inviscid import GridSpec, SimulationConfig, evolve
from inviscid.diagnostics import evaluate_fourier
from inviscid.fields import random_besov
from inviscid.lagrangian import fdr_check, mc_vorticity

grid = GridSpec(64)
nu, t = 1e-2, 1.0
w0 = random_besov(1.0, 3, grid)
traj = evolve(w0, grid, SimulationConfig(nu=nu, dt=1e-2, t_end=t))
archive = traj.velocity_archive()

pts = np.random.default_rng(0).uniform(0, 2 * np.pi, (8, 2))
est = mc_vorticity(traj.initial, archive, nu, 4000, 1e-2, t, pts, seed=1)
pde = evaluate_fourier(traj.final, pts)
for x, m, se, ref in zip(pts, est.mean, est.standard_error, pde):
    print(f"x = ({x[0]:.2f}, {x[1]:.2f})  MC {m:+.4f} +- {se:.4f}   PDE {ref:+.4f}")

fdr = fdr_check(traj, 400, 1e-2, seed=2, eval_n=32)
print(f"enstrophy dissipated {fdr.lhs:.4f}, half integrated variance {fdr.rhs:.4f} +- {fdr.standard_error:.4f}")
