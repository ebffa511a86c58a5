"""Measurement functionals on periodic fields and trajectories."""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Callable, Iterable, Optional

import numpy as np
from scipy.special import lambertw

from . import spectral as sp
from .spectral import GridSpec


class SaturationWarning(RuntimeWarning):
    """exp(beta |grad u|) overflowed and was clamped; beta is too large."""


# -- Lebesgue norms and budgets ----------------------------------------------


def lp_norm(f: np.ndarray, grid: GridSpec, p: float) -> float:
    """``(int |f|^p dx)^(1/p)`` by the periodic rectangle rule; ``p = inf`` gives ``max|f|``."""
    if p < 1:
        raise ValueError(f"L^p needs p >= 1, got {p}")
    a = np.abs(f)
    if np.isinf(p):
        return float(a.max())
    m = a.max()
    if m == 0:
        return 0.0
    # scale first so large p does not overflow
    return float(m * (np.sum((a / m) ** p) * grid.cell_area) ** (1.0 / p))


def enstrophy(omega: np.ndarray, grid: GridSpec) -> float:
    return 0.5 * float(np.sum(omega**2)) * grid.cell_area


def palinstrophy(omega: np.ndarray, grid: GridSpec) -> float:
    g = sp.gradient(omega, grid)
    return 0.5 * float(np.sum(g[0] ** 2 + g[1] ** 2)) * grid.cell_area


def casimir(omega: np.ndarray, grid: GridSpec, f: Callable) -> float:
    return float(np.sum(f(omega))) * grid.cell_area


def dissipation_integral(traj, f_second: Optional[Callable] = None) -> float:
    """``nu int_0^T int f''(omega) |grad omega|^2 dx dt`` by the trapezoid rule over snapshots.

    ``f_second`` defaults to 1, i.e. ``f(y) = y^2 / 2`` (enstrophy dissipation).
    """
    nu = traj.config.nu
    if nu <= 0:
        raise ValueError("the dissipation integral vanishes identically for nu = 0")
    grid = traj.grid
    rates = []
    for w in traj.snapshots:
        g = sp.gradient(w, grid)
        weight = 1.0 if f_second is None else f_second(w)
        rates.append(float(np.sum(weight * (g[0] ** 2 + g[1] ** 2))) * grid.cell_area)
    if len(rates) < 2:
        return 0.0
    return nu * float(np.trapezoid(rates, traj.times))


def enstrophy_defect(traj) -> float:
    return enstrophy(traj.initial, traj.grid) - enstrophy(traj.final, traj.grid)


# -- distributions -------------------------------------------------------------


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Vorticity distribution of a grid field: sorted node values, weight ``1/n^2`` each."""

    values: np.ndarray

    def __len__(self):
        return len(self.values)

    def expect(self, f: Callable) -> float:
        return float(np.mean(f(self.values)))

    def cdf(self, y) -> np.ndarray:
        return np.searchsorted(self.values, y, side="right") / len(self.values)

    def quantile(self, q) -> np.ndarray:
        idx = np.clip(np.ceil(np.asarray(q) * len(self.values)).astype(int) - 1, 0, len(self.values) - 1)
        return self.values[idx]

    def histogram(self, bins: int = 64):
        return np.histogram(self.values, bins=bins, density=True)


def distribution(f: np.ndarray) -> EmpiricalDistribution:
    return EmpiricalDistribution(np.sort(np.asarray(f, dtype=float).ravel()))


def wasserstein1(a: EmpiricalDistribution, b: EmpiricalDistribution) -> float:
    """Exact 1D optimal-transport distance for equal-size uniform samples."""
    if len(a) != len(b):
        raise ValueError(f"sample counts differ: {len(a)} vs {len(b)}")
    return float(np.mean(np.abs(a.values - b.values)))


# -- Littlewood-Paley decomposition ---------------------------------------------

PARTITION_VERSION = "lp-cos-v1"


def _smooth_step(x):
    """C-infinity step from 0 (x <= 0) to 1 (x >= 1) with step(x) + step(1 - x) = 1."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


def dyadic_multiplier(kabs: np.ndarray, j: int) -> np.ndarray:
    """Block ``j`` lives on ``2^(j-1) < |k| < 2^(j+1)`` and equals 1 at ``|k| = 2^j``.

    The multipliers are squares-summing to one (``sum_j psi_j^2 = 1``) so that
    block energies add up to the total energy. Block 0 also owns ``|k| <= 1``.
    """
    with np.errstate(divide="ignore"):
        x = np.log2(kabs)
    out = np.zeros_like(x)
    rising = (x > j - 1) & (x <= j)
    falling = (x > j) & (x < j + 1)
    out[rising] = np.sin(0.5 * np.pi * _smooth_step(x[rising] - (j - 1)))
    out[falling] = np.cos(0.5 * np.pi * _smooth_step(x[falling] - j))
    if j == 0:
        out[x <= 0] = 1.0
    return out


def block_count(grid: GridSpec) -> int:
    return int(np.ceil(np.log2(np.sqrt(2.0) * grid.n / 2))) + 1


@lru_cache(maxsize=16)
def _multipliers(n: int) -> tuple:
    grid = GridSpec(n)
    kabs = np.sqrt(grid.k_squared)
    return tuple(dyadic_multiplier(kabs, j) for j in range(block_count(grid)))


@dataclass
class BesovSpectrum:
    blocks: np.ndarray  # j
    block_norms: np.ndarray  # ||Delta_j f||_p
    s: float
    p: float
    block_energies: np.ndarray  # ||Delta_j f||_2^2

    @property
    def weighted(self) -> np.ndarray:
        return 2.0 ** (self.blocks * self.s) * self.block_norms

    @property
    def seminorm(self) -> float:
        return float(np.max(self.weighted)) if len(self.blocks) else 0.0

    def regularity_slope(self, j_min: int = 2, j_max: Optional[int] = None) -> float:
        """Decay rate ``sigma`` of a least-squares fit ``||Delta_j f|| ~ 2^(-j sigma)``."""
        sel = (self.blocks >= j_min) & (self.block_norms > 0)
        if j_max is not None:
            sel &= self.blocks <= j_max
        if np.count_nonzero(sel) < 2:
            return float("nan")  # too few populated blocks to define a decay rate
        slope, _ = np.polyfit(self.blocks[sel], np.log2(self.block_norms[sel]), 1)
        return float(-slope)


def besov_seminorm(f: np.ndarray, grid: GridSpec, s: float, p: float = 2.0) -> BesovSpectrum:
    """``sup_j 2^(js) ||Delta_j f||_p`` over a smooth dyadic partition (see PARTITION_VERSION)."""
    if s < 0:
        raise ValueError("s must be >= 0")
    if p < 1:
        raise ValueError("p must be >= 1")
    f_hat = sp.forward(f)
    norms, energies = [], []
    scale = grid.area / grid.n**4
    for psi in _multipliers(grid.n):
        block_hat = psi * f_hat
        energies.append(float(np.sum(grid.rfft_weights * np.abs(block_hat) ** 2)) * scale)
        if p == 2:
            norms.append(np.sqrt(energies[-1]))
        else:
            norms.append(lp_norm(sp.inverse(block_hat, grid.n), grid, p))
    j = np.arange(len(norms))
    return BesovSpectrum(j, np.array(norms), float(s), float(p), np.array(energies))


def h_minus_one_norm(f: np.ndarray, grid: GridSpec) -> float:
    f_hat = sp.forward(f)
    return float(np.sqrt(np.sum(grid.rfft_weights * np.abs(f_hat) ** 2 * grid.inv_k_squared) * grid.area)) / grid.n**2


# -- velocity-gradient functionals ---------------------------------------------


def grad_u_magnitude(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Pointwise Frobenius norm of the 2x2 velocity gradient."""
    G = sp.velocity_gradient(u, grid)
    return np.sqrt(np.sum(G**2, axis=(0, 1)))


EXP_LIMIT = 700.0


def exp_integral(u: np.ndarray, grid: GridSpec, beta: float) -> float:
    """``int exp(beta |grad u|) dx``. Overflowing exponents are clamped and a SaturationWarning issued."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    arg = beta * grad_u_magnitude(u, grid)
    if arg.max() > EXP_LIMIT:
        warnings.warn(
            f"beta |grad u| reaches {arg.max():.1f}; clamped at {EXP_LIMIT}", SaturationWarning
        )
        arg = np.minimum(arg, EXP_LIMIT)
    return float(np.sum(np.exp(arg))) * grid.cell_area


def cz_ratio(omega: np.ndarray, grid: GridSpec, p: float) -> float:
    """``||grad K[omega]||_p / (p ||omega||_p)``, bounded by a constant for p >= 2."""
    u = sp.biot_savart(omega, grid)
    return lp_norm(grad_u_magnitude(u, grid), grid, p) / (p * lp_norm(omega, grid, p))


def evaluate_fourier(f: np.ndarray, points: np.ndarray, chunk: int = 256) -> np.ndarray:
    """Exact trigonometric interpolant of grid field(s) ``f`` at arbitrary points ``(m, 2)``.

    ``f`` may be ``(n, n)`` or ``(c, n, n)``; returns ``(m,)`` or ``(c, m)``.
    """
    single = f.ndim == 2
    fs = f[None] if single else f
    n = fs.shape[-1]
    coeffs = np.fft.fft2(fs) / n**2
    k = np.fft.fftfreq(n, 1.0 / n)
    if n % 2 == 0:
        coeffs[..., n // 2, :] = 0.0  # drop Nyquist rows/cols (no real-valued trigonometric owner)
        coeffs[..., :, n // 2] = 0.0
    pts = np.atleast_2d(points)
    out = np.empty((fs.shape[0], len(pts)))
    for a in range(0, len(pts), chunk):
        p = pts[a : a + chunk]
        e1 = np.exp(1j * np.outer(p[:, 0], k))  # (m, n)
        e2 = np.exp(1j * np.outer(p[:, 1], k))
        vals = np.einsum("mi,cij,mj->cm", e1, coeffs, e2, optimize=True)
        out[:, a : a + chunk] = vals.real
    return out[0] if single else out


def log_lipschitz_modulus(
    u: np.ndarray,
    grid: GridSpec,
    pair_count: int,
    seed: int,
    beta: float,
    c_k: float,
    d_min: Optional[float] = None,
    shift=(0.0, 0.0),
) -> float:
    """Smallest ``C`` with ``|u(x)-u(y)| <= (C/beta) d ln(C c_k / d^2)`` over sampled pairs.

    Pairs are a uniform base point plus an offset with log-uniform length in
    ``[d_min, pi]`` and uniform direction. ``shift`` translates the field's
    argument (the sampled points move, the pairs' geometry does not).
    """
    if pair_count < 1000:
        raise ValueError("pair_count must be >= 1000")
    d_min = grid.dx / 4 if d_min is None else d_min
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, grid.length, size=(pair_count, 2))
    r = np.exp(rng.uniform(np.log(d_min), np.log(np.pi), size=pair_count))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=pair_count)
    y = x + r[:, None] * np.column_stack([np.cos(theta), np.sin(theta)])
    x = x + np.asarray(shift)
    y = y + np.asarray(shift)
    ux = evaluate_fourier(u, x)
    uy = evaluate_fourier(u, y)
    du = np.sqrt(np.sum((ux - uy) ** 2, axis=0))
    d = grid.distance(x, y)
    if not np.any(du > 0):
        return 0.0
    ratio = beta * du / d
    a = c_k / d**2
    # C ln(C a) = ratio  <=>  C = ratio / W(ratio * a)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(ratio > 0, ratio / np.real(lambertw(ratio * a)), 0.0)
    return float(np.max(c))


# -- empirical constants --------------------------------------------------------


@dataclass(frozen=True)
class FunctionalConstants:
    gamma: float  # exp-integrability threshold for beta * ||omega||_inf
    c_k: float  # bound on int exp(beta |grad u|) at beta = gamma / ||omega||_inf
    cz: float  # bound on ||grad u||_p / (p ||omega||_p)
    loglip: float  # log-Lipschitz constant at (gamma, c_k)


def load_constants() -> FunctionalConstants:
    text = resources.files("inviscid").joinpath("data/constants.json").read_text()
    data = json.loads(text)
    return FunctionalConstants(**{k: data[k] for k in FunctionalConstants.__dataclass_fields__})


def critical_gamma(omega: np.ndarray, grid: GridSpec, c_k: float, tol: float = 1e-6) -> float:
    """Largest ``gamma`` with ``exp_integral(K[omega], gamma / ||omega||_inf) <= c_k`` (bisection)."""
    u = sp.biot_savart(omega, grid)
    scale = float(np.max(np.abs(omega)))
    lo, hi = 0.0, 1.0
    while exp_integral(u, grid, hi / scale) <= c_k:
        lo, hi = hi, 2.0 * hi
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if exp_integral(u, grid, mid / scale) <= c_k:
            lo = mid
        else:
            hi = mid
    return lo


# -- CSV emission ----------------------------------------------------------------

CSV_FIELDS = ("experiment", "time", "nu", "quantity", "value")


def write_rows(path, rows: Iterable[tuple]) -> None:
    """Write ``(experiment id, time, nu, quantity, value)`` rows with a header."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_FIELDS)
        for exp_id, t, nu, name, value in rows:
            writer.writerow([exp_id, repr(float(t)), repr(float(nu)), name, repr(float(value))])


def read_rows(path) -> list[tuple]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_FIELDS:
            raise ValueError(f"{path}: unexpected header {header}")
        return [(e, float(t), float(nu), q, float(v)) for e, t, nu, q, v in reader]
