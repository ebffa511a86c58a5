"""Navier-Stokes solutions approach Euler as the viscosity goes to zero.

A random field with Besov regularity s = 0.5 is evolved once with nu = 0 and
along a viscosity ladder. The sup-in-time L^p gap to the Euler run shrinks
with nu, and the log-log slope is compared with the exponent predicted from
the measured regularity. Runs at n = 128 so it finishes in about a minute;
the acceptance suite repeats it at n = 256 with the resolution guard on.
"""

from pathlib import Path

from inviscid import ExperimentSpec
from inviscid.experiments import run_E1_convergence
from inviscid.report import plot_error_vs_nu

spec = ExperimentSpec(n=128, dt=5e-3, t_end=2.0, resolution_guard=False)
res = run_E1_convergence(spec)

for p, errs in res.values["errors"].items():
    print(p, " ".join(f"{e:.4f}" for e in errs))
print(f"fitted L2 slope   {res.values['slope_L2']:.3f}")
print(f"measured index s  {res.values['measured_s']:.3f}")
print(f"predicted order   {res.values['predicted_exponent']:.3f}")

out = Path("demo_output")
out.mkdir(exist_ok=True)
print("plot:", plot_error_vs_nu(res.rows, out / "error_vs_nu.svg"))
