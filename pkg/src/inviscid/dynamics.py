"""Vorticity dynamics on the torus: Euler (nu = 0) and Navier-Stokes (nu > 0).

The advection and forcing terms are stepped with classical RK4 while
diffusion is integrated exactly through the integrating factor
``exp(-nu |k|^2 dt)`` (Lawson's scheme). The state lives in the dealiased
band ``max(|k1|, |k2|) <= n/3``, which makes the semi-discrete system a
Galerkin truncation: energy and enstrophy are conserved exactly in the
inviscid, unforced case up to time-stepping error.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import spectral as sp
from .spectral import GridSpec

log = logging.getLogger(__name__)

Forcing = Callable[[float], np.ndarray]


class SimulationError(RuntimeError):
    """Time integration aborted (non-finite values)."""

    def __init__(self, message: str, step: int):
        self.step = step
        super().__init__(f"step {step}: {message}")


class CFLViolation(SimulationError):
    def __init__(self, step: int, courant: float, limit: float):
        self.courant = courant
        super().__init__(f"Courant number {courant:.3f} exceeds {limit}", step)


@dataclass
class SimulationConfig:
    nu: float
    dt: float
    t_end: float
    forcing: Optional[Forcing] = None
    dealias: bool = True
    snapshot_stride: int = 1
    cfl_limit: float = 0.5

    def __post_init__(self):
        if self.nu < 0:
            raise ValueError(f"viscosity must be >= 0, got {self.nu}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_end < 0:
            raise ValueError(f"t_end must be >= 0, got {self.t_end}")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")

    @property
    def n_steps(self) -> int:
        steps = self.t_end / self.dt
        n = int(round(steps))
        if abs(steps - n) > 1e-8 * max(1.0, steps):
            raise ValueError(f"t_end={self.t_end} is not a multiple of dt={self.dt}")
        return n


@dataclass
class Trajectory:
    """Ordered vorticity snapshots of one run."""

    grid: GridSpec
    config: SimulationConfig
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    vorticity_bound: float = np.inf

    def append(self, step: int, t: float, omega: np.ndarray) -> None:
        if self.times and t <= self.times[-1]:
            raise ValueError("snapshot times must be strictly increasing")
        self.steps.append(step)
        self.times.append(float(t))
        self.snapshots.append(omega)

    def __len__(self):
        return len(self.snapshots)

    @property
    def initial(self) -> np.ndarray:
        return self.snapshots[0]

    @property
    def final(self) -> np.ndarray:
        return self.snapshots[-1]

    def velocity(self, i: int) -> np.ndarray:
        return sp.biot_savart(sp.project_mean(self.snapshots[i]), self.grid)

    def velocity_archive(self) -> "VelocityArchive":
        return VelocityArchive(
            self.grid,
            np.array(self.times),
            np.stack([self.velocity(i) for i in range(len(self))]),
            nu=self.config.nu,
            forced=self.config.forcing is not None,
        )

    @property
    def max_vorticity(self) -> float:
        return max(float(np.max(np.abs(w))) for w in self.snapshots)

    def diagnostics_table(self) -> list[dict]:
        rows = []
        for step, t, w in zip(self.steps, self.times, self.snapshots):
            rows.append(
                dict(
                    step=step,
                    time=t,
                    energy=kinetic_energy(w, self.grid),
                    enstrophy=0.5 * sp.spectral_energy(w, self.grid),
                    max_vorticity=float(np.max(np.abs(w))),
                )
            )
        return rows

    def save(self, directory) -> Path:
        """One snapshot file per stored time plus ``index.csv``."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        rows = self.diagnostics_table()
        for i, (t, w) in enumerate(zip(self.times, self.snapshots)):
            sp.write_snapshot(directory / f"snap_{i:05d}.yud", w, self.grid, t)
        with open(directory / "index.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            for row in rows:
                writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
        c = self.config
        meta = dict(nu=c.nu, dt=c.dt, t_end=c.t_end, snapshot_stride=c.snapshot_stride,
                    dealias=c.dealias, forced=c.forcing is not None)
        (directory / "run.json").write_text(json.dumps(meta, indent=1, sort_keys=True))
        return directory

    @classmethod
    def load(cls, directory, config: Optional[SimulationConfig] = None) -> "Trajectory":
        directory = Path(directory)
        with open(directory / "index.csv") as fh:
            rows = list(csv.DictReader(fh))
        meta_path = directory / "run.json"
        if config is None and meta_path.exists():
            meta = json.loads(meta_path.read_text())
            config = SimulationConfig(nu=meta["nu"], dt=meta["dt"], t_end=meta["t_end"],
                                      snapshot_stride=meta["snapshot_stride"], dealias=meta["dealias"])
        traj = None
        for i, row in enumerate(rows):
            w, grid, t = sp.read_snapshot(directory / f"snap_{i:05d}.yud")
            if traj is None:
                if config is None:
                    dt = float(rows[1]["time"]) - float(rows[0]["time"]) if len(rows) > 1 else 1.0
                    config = SimulationConfig(nu=0.0, dt=dt, t_end=float(rows[-1]["time"]))
                traj = cls(grid, config)
            traj.append(int(row["step"]), t, w)
        return traj


def kinetic_energy(omega: np.ndarray, grid: GridSpec) -> float:
    """``1/2 int |u|^2 dx`` from the vorticity spectrum."""
    w_hat = sp.forward(omega)
    return 0.5 * float(np.sum(grid.rfft_weights * np.abs(w_hat) ** 2 * grid.inv_k_squared)) * grid.area / grid.n**4


class _Advection:
    """Dealiased ``-u.grad(q) + g`` in rfft2 space, with ``u`` supplied by a callback."""

    def __init__(self, grid: GridSpec, dealias: bool):
        self.grid = grid
        self.mask = grid.dealias_mask if dealias else None
        self.last_max_speed = 0.0

    def __call__(self, q_hat: np.ndarray, u: np.ndarray, g: Optional[np.ndarray]) -> np.ndarray:
        grid = self.grid
        k1, k2 = grid.wavenumbers
        dq1 = sp.inverse(1j * k1 * q_hat, grid.n)
        dq2 = sp.inverse(1j * k2 * q_hat, grid.n)
        self.last_max_speed = float(np.sqrt(np.max(u[0] ** 2 + u[1] ** 2)))
        out = -sp.forward(u[0] * dq1 + u[1] * dq2)
        if self.mask is not None:
            out *= self.mask
        if g is not None:
            out += sp.forward(g)
        return out


def _checked_forcing(forcing: Optional[Forcing], t: float) -> Optional[np.ndarray]:
    if forcing is None:
        return None
    g = forcing(t)
    sp.check_zero_mean(g)
    return g


def rhs(omega: np.ndarray, nu: float, g: Optional[np.ndarray], grid: GridSpec) -> np.ndarray:
    """Grid-space ``-u.grad(omega) + nu lap(omega) + g`` with a dealiased advection product."""
    sp.check_zero_mean(omega)
    if g is not None:
        sp.check_zero_mean(g)
    w_hat = sp.forward(omega)
    u1_hat, u2_hat = sp.velocity_hat_from_vorticity_hat(w_hat, grid)
    u = np.stack([sp.inverse(u1_hat, grid.n), sp.inverse(u2_hat, grid.n)])
    out = _Advection(grid, True)(w_hat, u, g) - nu * grid.k_squared * w_hat
    return sp.inverse(out, grid.n)


def _lawson_rk4(q_hat, t0, n_steps, dt, nu, grid, nonlinear, on_step):
    """Integrating-factor RK4; ``nonlinear(q_hat, t)`` returns the explicit tendency."""
    e_half = np.exp(-0.5 * nu * dt * grid.k_squared)
    e_full = e_half * e_half
    t = t0
    for step in range(1, n_steps + 1):
        k1 = nonlinear(q_hat, t, step)
        k2 = nonlinear(e_half * (q_hat + 0.5 * dt * k1), t + 0.5 * dt, step)
        k3 = nonlinear(e_half * q_hat + 0.5 * dt * k2, t + 0.5 * dt, step)
        k4 = nonlinear(e_full * q_hat + dt * e_half * k3, t + dt, step)
        q_hat = e_full * q_hat + (dt / 6.0) * (e_full * k1 + 2.0 * e_half * (k2 + k3) + k4)
        t = t0 + step * dt
        on_step(step, t, q_hat)
    return q_hat


def _band_limited(q0: np.ndarray, grid: GridSpec, dealias: bool) -> np.ndarray:
    q_hat = sp.forward(q0)
    if dealias:
        q_hat = q_hat * grid.dealias_mask
    return q_hat


def _recorder(traj: Trajectory, grid: GridSpec, stride: int, n_steps: int):
    def on_step(step, t, q_hat):
        if not np.all(np.isfinite(q_hat)):
            raise SimulationError("non-finite values", step)
        if step % stride == 0 or step == n_steps:
            traj.append(step, t, sp.inverse(q_hat, grid.n))

    return on_step


def evolve(omega0: np.ndarray, grid: GridSpec, config: SimulationConfig) -> Trajectory:
    """Integrate the vorticity equation from ``omega0`` to ``config.t_end``.

    The initial datum is projected onto the dealiased band when
    ``config.dealias`` is set; snapshot 0 is that projected datum. Raises
    :class:`CFLViolation` as soon as ``dt max|u| / dx`` exceeds the limit and
    :class:`SimulationError` on non-finite values.
    """
    sp.check_zero_mean(omega0)
    n_steps = config.n_steps
    w_hat = _band_limited(omega0, grid, config.dealias)
    traj = Trajectory(grid, config)
    traj.append(0, 0.0, sp.inverse(w_hat, grid.n))

    g_bound = 0.0
    if config.forcing is not None:
        ts = np.linspace(0.0, config.t_end, n_steps + 1)
        g_sup = np.array([np.max(np.abs(config.forcing(t))) for t in ts])
        g_bound = float(np.trapezoid(g_sup, ts)) if n_steps else 0.0
    traj.vorticity_bound = float(np.max(np.abs(omega0))) + g_bound

    advection = _Advection(grid, config.dealias)

    def nonlinear(q_hat, t, step):
        u1_hat, u2_hat = sp.velocity_hat_from_vorticity_hat(q_hat, grid)
        u = np.stack([sp.inverse(u1_hat, grid.n), sp.inverse(u2_hat, grid.n)])
        out = advection(q_hat, u, _checked_forcing(config.forcing, t))
        courant = config.dt * advection.last_max_speed / grid.dx
        if courant > config.cfl_limit:
            raise CFLViolation(step, courant, config.cfl_limit)
        return out

    _lawson_rk4(
        w_hat, 0.0, n_steps, config.dt, config.nu, grid, nonlinear,
        _recorder(traj, grid, config.snapshot_stride, n_steps),
    )
    overshoot = traj.max_vorticity - traj.vorticity_bound
    if overshoot > 1e-8 * max(1.0, traj.vorticity_bound):
        log.warning("max|omega| exceeds the a priori bound by %.3e", overshoot)
    return traj


@dataclass
class VelocityArchive:
    """Time-ordered velocity snapshots, linearly interpolated in time."""

    grid: GridSpec
    times: np.ndarray
    velocities: np.ndarray  # (K, 2, n, n)
    nu: Optional[float] = None
    forced: bool = False

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.velocities.shape[1:] != (2, self.grid.n, self.grid.n):
            raise ValueError(f"velocity snapshots have shape {self.velocities.shape[1:]}")
        if len(self.times) != len(self.velocities):
            raise ValueError("times and velocities differ in length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("archive times must be strictly increasing")

    @classmethod
    def steady(cls, grid: GridSpec, u: np.ndarray, t_end: float) -> "VelocityArchive":
        return cls(grid, np.array([0.0, t_end]), np.stack([u, u]))

    @property
    def max_spacing(self) -> float:
        return float(np.max(np.diff(self.times))) if len(self.times) > 1 else 0.0

    def check_coverage(self, t0: float, t1: float, max_spacing: Optional[float] = None) -> None:
        tol = 1e-9 * max(1.0, abs(t1))
        lo, hi = min(t0, t1), max(t0, t1)
        if self.times[0] > lo + tol or self.times[-1] < hi - tol:
            raise ValueError(
                f"archive covers [{self.times[0]}, {self.times[-1]}], needed [{lo}, {hi}]"
            )
        if max_spacing is not None and self.max_spacing > max_spacing * (1 + 1e-9):
            raise ValueError(
                f"archive spacing {self.max_spacing} exceeds allowed {max_spacing}"
            )

    def bracket(self, t: float) -> tuple[int, float]:
        """Index ``i`` and weight ``w`` so that ``u(t) = (1-w) u[i] + w u[i+1]``."""
        if len(self.times) == 1:
            return 0, 0.0
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        i = min(max(i, 0), len(self.times) - 2)
        w = (t - self.times[i]) / (self.times[i + 1] - self.times[i])
        return i, float(min(max(w, 0.0), 1.0))

    def at(self, t: float) -> np.ndarray:
        i, w = self.bracket(t)
        if w == 0.0:
            return self.velocities[i]
        return (1.0 - w) * self.velocities[i] + w * self.velocities[i + 1]

    def max_divergence(self) -> float:
        return max(float(np.max(np.abs(sp.divergence(u, self.grid)))) for u in self.velocities)


def transport_linear(
    theta0: np.ndarray,
    archive: VelocityArchive,
    nu: float,
    dt: float,
    t_end: float,
    forcing: Optional[Forcing] = None,
    snapshot_stride: int = 1,
    dealias: bool = True,
) -> Trajectory:
    """Advect-diffuse a passive scalar with the archived velocity.

    Solves ``d_t theta + u.grad(theta) = nu lap(theta) + g`` with ``u``
    taken from ``archive`` (linear in time between snapshots). The archive
    must cover ``[0, t_end]`` with spacing at most ``dt * snapshot_stride``.
    """
    grid = archive.grid
    config = SimulationConfig(nu=nu, dt=dt, t_end=t_end, forcing=forcing,
                              dealias=dealias, snapshot_stride=snapshot_stride)
    n_steps = config.n_steps
    archive.check_coverage(0.0, t_end, max_spacing=dt * snapshot_stride)
    q_hat = _band_limited(theta0, grid, dealias)
    traj = Trajectory(grid, config)
    traj.append(0, 0.0, sp.inverse(q_hat, grid.n))
    advection = _Advection(grid, dealias)

    def nonlinear(q, t, step):
        return advection(q, archive.at(t), _checked_forcing(forcing, t))

    _lawson_rk4(q_hat, 0.0, n_steps, dt, nu, grid, nonlinear,
                _recorder(traj, grid, snapshot_stride, n_steps))
    return traj


def p_schedule(t, p0: float, beta: float):
    """Decreasing exponent ``p(t) = beta p0 / (beta + 2 p0 t)``."""
    return beta * p0 / (beta + 2.0 * p0 * np.asarray(t, dtype=float))


def p_schedule_exhaustion_time(p0: float, beta: float) -> float:
    """Time ``t*`` at which ``p(t*) = 1``."""
    return beta * (p0 - 1.0) / (2.0 * p0)


@dataclass
class TrackedNorm:
    times: np.ndarray
    exponents: np.ndarray  # 2 p(t)
    norms: np.ndarray
    t_star: float


def ptracked_norm(
    snapshots: Sequence[np.ndarray], times: Sequence[float], grid: GridSpec, p0: float, beta: float
) -> TrackedNorm:
    """``||theta(t)||_{2 p(t)}`` along the schedule, for snapshots with ``t <= t*``."""
    if not p0 > 1:
        raise ValueError(f"p0 must exceed 1, got {p0}")
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    from .diagnostics import lp_norm

    t_star = p_schedule_exhaustion_time(p0, beta)
    times = np.asarray(times, dtype=float)
    keep = times <= t_star * (1 + 1e-12)
    exps = 2.0 * p_schedule(times[keep], p0, beta)
    norms = np.array([lp_norm(w, grid, q) for w, q in zip(np.asarray(snapshots)[keep], exps)])
    return TrackedNorm(times[keep], exps, norms, t_star)


def legendre_gap(a, b):
    """``e^a + b ln b - b - a b``; nonnegative for real ``a`` and ``b > 0``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.exp(a) + b * np.log(b) - b - a * b
