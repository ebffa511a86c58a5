"""Stochastic Lagrangian flows through archived velocities.

Trajectories obey ``dX = u(X, t) dt + sqrt(2 nu) dW`` with one Brownian path
per realization shared by every label (spatially uniform additive noise).
The drift is integrated with the stochastic Heun scheme (predictor-corrector
on the drift, Euler-Maruyama noise increments); ``scheme="euler"`` gives
plain Euler-Maruyama. Velocities are evaluated by periodic cubic B-spline
interpolation in space and linear interpolation in time.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass
from typing import Optional, Sequence

import numba
import numpy as np
from scipy.ndimage import spline_filter

from . import spectral as sp
from .dynamics import Trajectory, VelocityArchive
from .spectral import GridSpec


@numba.njit(cache=True, fastmath=False)
def _bspline_eval(coef, pts, inv_dx, out):
    """Evaluate periodic cubic B-spline(s) ``coef[c]`` at ``pts`` (m, 2) into ``out`` (m, c)."""
    nc, n, _ = coef.shape
    for i in range(pts.shape[0]):
        g1 = pts[i, 0] * inv_dx
        g2 = pts[i, 1] * inv_dx
        f1 = np.floor(g1)
        f2 = np.floor(g2)
        t1 = g1 - f1
        t2 = g2 - f2
        i1 = int(f1)
        i2 = int(f2)
        a0 = (1 - t1) ** 3 / 6.0
        a1 = (3 * t1**3 - 6 * t1**2 + 4) / 6.0
        a2 = (-3 * t1**3 + 3 * t1**2 + 3 * t1 + 1) / 6.0
        a3 = t1**3 / 6.0
        b0 = (1 - t2) ** 3 / 6.0
        b1 = (3 * t2**3 - 6 * t2**2 + 4) / 6.0
        b2 = (-3 * t2**3 + 3 * t2**2 + 3 * t2 + 1) / 6.0
        b3 = t2**3 / 6.0
        wa = (a0, a1, a2, a3)
        wb = (b0, b1, b2, b3)
        for c in range(nc):
            acc = 0.0
            for p in range(4):
                r = (i1 - 1 + p) % n
                row = 0.0
                for q in range(4):
                    row += wb[q] * coef[c, r, (i2 - 1 + q) % n]
                acc += wa[p] * row
            out[i, c] = acc


def spline_coefficients(f: np.ndarray) -> np.ndarray:
    """Periodic cubic-spline coefficients for a field ``(n, n)`` or stack ``(c, n, n)``."""
    f = np.asarray(f, dtype=float)
    if f.ndim == 2:
        return spline_filter(f, order=3, mode="grid-wrap")[None]
    return np.stack([spline_filter(fc, order=3, mode="grid-wrap") for fc in f])


def interpolate(coef: np.ndarray, points: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Values ``(m, c)`` of spline coefficients ``coef`` ``(c, n, n)`` at ``points`` ``(m, 2)``."""
    pts = np.ascontiguousarray(np.mod(points, grid.length).reshape(-1, 2))
    out = np.empty((pts.shape[0], coef.shape[0]))
    _bspline_eval(np.ascontiguousarray(coef), pts, 1.0 / grid.dx, out)
    return out


class _ArchiveSampler:
    """Velocity at (points, time) from a VelocityArchive; caches per-snapshot spline coefficients."""

    def __init__(self, archive: VelocityArchive):
        self.archive = archive
        self._coef = {}

    def _snapshot(self, i):
        if i not in self._coef:
            if len(self._coef) > 8:
                self._coef.pop(next(iter(self._coef)))
            self._coef[i] = spline_coefficients(self.archive.velocities[i])
        return self._coef[i]

    def __call__(self, points: np.ndarray, t: float) -> np.ndarray:
        i, w = self.archive.bracket(t)
        coef = self._snapshot(i)
        if w > 0.0:
            coef = (1.0 - w) * coef + w * self._snapshot(i + 1)
        return interpolate(coef, points, self.archive.grid).reshape(points.shape)


def _stream_key(seed: int, label: str) -> np.ndarray:
    digest = hashlib.sha256(f"{int(seed)}:{label}".encode()).digest()
    return np.frombuffer(digest[:16], dtype=np.uint64).copy()


def brownian_increments(seed: int, label: str, step: int, M: int, dt: float) -> np.ndarray:
    """``(M, 2)`` standard-normal increments scaled by ``sqrt(dt)`` for one time step.

    Counter-based (Philox keyed by seed and label, step in the second counter
    word): the draw for a step never depends on how many steps or ensembles
    were drawn before it. Drawing advances the lowest counter word, so placing
    the step there would make consecutive steps replay shifted copies of one
    stream; in the second word the streams are 2^64 blocks apart.
    """
    counter = np.array([0, step, 0, 0], dtype=np.uint64)
    gen = np.random.Generator(np.random.Philox(key=_stream_key(seed, label), counter=counter))
    return np.sqrt(dt) * gen.standard_normal((M, 2))


@dataclass
class ParticleEnsemble:
    """Labels, realization count and unwrapped positions ``(M, P, 2)``."""

    labels: np.ndarray
    M: int
    seed: int
    unwrapped: np.ndarray
    time: float

    @property
    def positions(self) -> np.ndarray:
        return np.mod(self.unwrapped, 2.0 * np.pi)

    @property
    def displacement(self) -> np.ndarray:
        return self.unwrapped - self.labels[None]

    def to_csv(self, path) -> None:
        """Per-label ``(point id, mean x1, mean x2, variance x1, variance x2, SE x1, SE x2)``."""
        disp = self.unwrapped
        mean = disp.mean(axis=0)
        var = disp.var(axis=0, ddof=1) if self.M > 1 else np.zeros_like(mean)
        se = np.sqrt(var / self.M)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["point", "mean_x1", "mean_x2", "var_x1", "var_x2", "se_x1", "se_x2"])
            for i in range(len(self.labels)):
                w.writerow([i, *mean[i], *var[i], *se[i]])


def _check_common(archive, dt, t):
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if t < 0:
        raise ValueError("horizon must be >= 0")
    archive.check_coverage(0.0, t)


def _integrate(points, velocity, nu, M, dt, t, seed, label, scheme, sign=1.0, time_of=None):
    """Integrate ``dX = sign * u(X, time_of(s)) ds + sqrt(2 nu) dW`` for ``s in [0, t]``."""
    if M < 1:
        raise ValueError("need at least one realization")
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    n_steps = int(round(t / dt))
    if n_steps and abs(n_steps * dt - t) > 1e-9 * max(t, 1.0):
        raise ValueError(f"horizon {t} is not a multiple of dt={dt}")
    time_of = time_of or (lambda s: s)
    x = np.broadcast_to(points, (M,) + points.shape).copy()
    amp = np.sqrt(2.0 * nu)
    for step in range(n_steps):
        s = step * dt
        a = sign * velocity(x, time_of(s))
        noise = 0.0
        if nu > 0:
            noise = amp * brownian_increments(seed, label, step, M, dt)[:, None, :]
        if scheme == "euler":
            x = x + a * dt + noise
        elif scheme == "heun":
            pred = x + a * dt + noise
            b = sign * velocity(pred, time_of(s + dt))
            x = x + 0.5 * (a + b) * dt + noise
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
    return points, x


def advect(
    labels, archive: VelocityArchive, nu: float, M: int, dt: float, t: float, seed: int = 0,
    scheme: str = "heun", stream: str = "advect",
) -> ParticleEnsemble:
    """Forward flow ``X_t(labels)`` for ``M`` realizations."""
    _check_common(archive, dt, t)
    sampler = _ArchiveSampler(archive)
    labels, x = _integrate(labels, sampler, nu, M, dt, t, seed, stream, scheme)
    return ParticleEnsemble(labels, M, seed, x, t)


def back_to_labels(
    points, archive: VelocityArchive, nu: float, M: int, dt: float, t: float, seed: int = 0,
    scheme: str = "heun", stream: str = "back",
) -> ParticleEnsemble:
    """Back-to-labels map ``A_t(points)``: integrate ``dY = -u(Y, t - s) ds + sqrt(2 nu) dW``."""
    _check_common(archive, dt, t)
    sampler = _ArchiveSampler(archive)
    pts, y = _integrate(points, sampler, nu, M, dt, t, seed, stream, scheme,
                        sign=-1.0, time_of=lambda s: t - s)
    return ParticleEnsemble(pts, M, seed, y, t)


@dataclass
class MonteCarloEstimate:
    points: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    standard_error: np.ndarray
    M: int

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["point", "mean", "variance", "se"])
            for i in range(len(self.mean)):
                w.writerow([i, repr(float(self.mean[i])), repr(float(self.variance[i])),
                            repr(float(self.standard_error[i]))])


def _labels_sampled(omega0, grid, archive, nu, M, dt, t, seed, points, scheme):
    if getattr(archive, "forced", False):
        raise ValueError("the representation E[omega0(A_t)] requires an unforced archive")
    if getattr(archive, "nu", None) is not None and not np.isclose(archive.nu, nu):
        raise ValueError(f"archive was produced with nu={archive.nu}, not {nu}")
    ens = back_to_labels(points, archive, nu, M, dt, t, seed, scheme=scheme, stream="mc")
    coef = spline_coefficients(omega0)
    vals = interpolate(coef, ens.unwrapped.reshape(-1, 2), grid).reshape(M, -1)
    return ens, vals


def mc_vorticity(
    omega0: np.ndarray, archive: VelocityArchive, nu: float, M: int, dt: float, t: float,
    eval_points, seed: int = 0, scheme: str = "heun",
) -> MonteCarloEstimate:
    """Monte-Carlo estimate of ``omega(t, x) = E[omega0(A_t(x))]`` at ``eval_points``."""
    grid = archive.grid
    ens, vals = _labels_sampled(omega0, grid, archive, nu, M, dt, t, seed, eval_points, scheme)
    mean = vals.mean(axis=0)
    var = vals.var(axis=0, ddof=1) if M > 1 else np.zeros_like(mean)
    return MonteCarloEstimate(ens.labels, mean, var, np.sqrt(var / M), M)


@dataclass
class FDRResult:
    lhs: float  # nu int_0^t ||grad omega||_2^2 ds
    rhs: float  # 1/2 int Var[omega0(A_t(x))] dx
    standard_error: float
    t: float


def fdr_check(
    traj: Trajectory, M: int, dt: float, seed: int = 0, eval_n: int = 32, scheme: str = "heun",
) -> FDRResult:
    """Compare enstrophy dissipation with half the integrated variance of ``omega0(A_t)``.

    The variance is sampled on a uniform ``eval_n x eval_n`` sub-grid; its
    standard error is computed from per-realization contributions because all
    points of one realization share the same noise path.
    """
    nu = traj.config.nu
    if nu <= 0:
        raise ValueError("the fluctuation-dissipation identity needs nu > 0")
    if traj.config.forcing is not None:
        raise ValueError("fdr_check needs an unforced trajectory")
    grid = traj.grid
    t = traj.times[-1]

    rates = [np.sum(np.sum(sp.gradient(w, grid) ** 2, axis=0)) * grid.cell_area for w in traj.snapshots]
    lhs = nu * float(np.trapezoid(rates, traj.times)) if len(rates) > 1 else 0.0
    if t == 0 or M < 2:
        return FDRResult(lhs, 0.0, 0.0, t)

    archive = traj.velocity_archive()
    c = np.arange(eval_n) * (grid.length / eval_n)
    pts = np.stack(np.meshgrid(c, c, indexing="ij"), axis=-1).reshape(-1, 2)
    _, vals = _labels_sampled(traj.initial, grid, archive, nu, M, dt, t, seed, pts, scheme)
    cell = (grid.length / eval_n) ** 2
    dev2 = (vals - vals.mean(axis=0)) ** 2  # (M, P)
    per_real = 0.5 * dev2.sum(axis=1) * cell * M / (M - 1)
    return FDRResult(lhs, float(per_real.mean()), float(per_real.std(ddof=1) / np.sqrt(M)), t)


@dataclass
class PairSeparation:
    times: np.ndarray
    deltas: np.ndarray
    mean_distance: np.ndarray  # (len(times), len(deltas))
    exponents: np.ndarray  # fitted slope per time


def pair_separation(
    archive: VelocityArchive, nu: float, deltas: Sequence[float], M: int, dt: float,
    t: float, seed: int = 0, n_base: int = 64, report_every: Optional[int] = None,
    scheme: str = "heun",
) -> PairSeparation:
    """Hölder exponent of the flow from ``log E[d(X_t x, X_t y)]`` vs ``log d(x, y)``.

    ``n_base`` random base points each get one partner per initial separation
    in a random direction; both members of a pair share the noise path.
    """
    deltas = np.asarray(deltas, dtype=float)
    if deltas.max() / deltas.min() < 100:
        raise ValueError("initial separations must span at least two decades")
    _check_common(archive, dt, t)
    grid = archive.grid
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 7]))
    base = rng.uniform(0.0, grid.length, size=(n_base, 2))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n_base)
    e = np.column_stack([np.cos(theta), np.sin(theta)])
    partners = base[:, None, :] + deltas[None, :, None] * e[:, None, :]  # (B, D, 2)
    labels = np.concatenate([base, partners.reshape(-1, 2)])

    n_steps = int(round(t / dt))
    every = report_every or n_steps
    sampler = _ArchiveSampler(archive)
    times, dists = [], []
    x = np.broadcast_to(labels, (M,) + labels.shape).copy()
    amp = np.sqrt(2.0 * nu)

    def record(s, x):
        xb = x[:, :n_base][:, :, None, :]
        xp = x[:, n_base:].reshape(M, n_base, len(deltas), 2)
        d = grid.distance(xb, xp)  # (M, B, D)
        times.append(s)
        dists.append(d.mean(axis=(0, 1)))

    for step in range(n_steps):
        s = step * dt
        a = sampler(x, s)
        noise = amp * brownian_increments(seed, "pairs", step, M, dt)[:, None, :] if nu > 0 else 0.0
        if scheme == "heun":
            b = sampler(x + a * dt + noise, s + dt)
            x = x + 0.5 * (a + b) * dt + noise
        else:
            x = x + a * dt + noise
        if (step + 1) % every == 0:
            record((step + 1) * dt, x)
    mean_d = np.array(dists)
    slopes = np.array([np.polyfit(np.log(deltas), np.log(row), 1)[0] for row in mean_d])
    return PairSeparation(np.array(times), deltas, mean_d, slopes)


def triangle_areas(points: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Signed areas of triangles ``(T, 3)`` indexing unwrapped ``points`` ``(P, 2)``."""
    a, b, c = (points[triangles[:, i]] for i in range(3))
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))
