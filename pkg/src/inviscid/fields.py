"""Initial vorticity fields: eigenmodes, Taylor-Green, power-law random fields, vortex patches."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
from matplotlib.path import Path as PolygonPath

from . import spectral as sp
from .spectral import GridSpec


def eigenmode(N: int, grid: GridSpec) -> np.ndarray:
    """``sin(N x1)``, a steady Euler solution and a Laplacian eigenfunction."""
    if not 1 <= N < grid.n / 3:
        raise ValueError(f"mode {N} outside the dealiased band [1, {grid.n / 3:.1f})")
    x1, _ = grid.mesh
    return np.sin(N * x1)


def taylor_green(grid: GridSpec, amplitude: float = 1.0) -> np.ndarray:
    x1, x2 = grid.mesh
    return amplitude * np.cos(x1) * np.cos(x2)


def random_besov(
    s: float, seed: int, grid: GridSpec, kmax: Optional[float] = None, normalize: bool = True
) -> np.ndarray:
    """Random-phase field with Fourier amplitudes ``|k|^-(1+s)``, rescaled to ``max|w| = 1``.

    Modes are populated on ``0 < max(|k1|, |k2|) <= kmax`` (default: the
    dealiased band ``n/3``). Phases are antisymmetric in ``k`` so the
    coefficients are exactly conjugate-symmetric and every populated mode
    keeps its prescribed magnitude. ``normalize=False`` skips the rescaling
    and returns ``sum_k |k|^-(1+s) exp(i (k.x + phase_k))`` as is.
    """
    if not s > 0:
        raise ValueError(f"regularity index must be positive, got {s}")
    n = grid.n
    kmax = n / 3.0 if kmax is None else float(kmax)
    k = np.fft.fftfreq(n, 1.0 / n)
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    kabs = np.hypot(k1, k2)
    band = (np.maximum(np.abs(k1), np.abs(k2)) <= kmax) & (kabs > 0)

    rng = np.random.default_rng(seed)
    phi = rng.uniform(0.0, 2.0 * np.pi, size=(n, n))
    neg = (-np.arange(n)) % n
    phase = phi - phi[np.ix_(neg, neg)]

    amp = np.zeros((n, n))
    amp[band] = kabs[band] ** (-(1.0 + s))
    f = np.real(np.fft.ifft2(amp * np.exp(1j * phase)))
    f -= f.mean()
    if not normalize:
        return f * n**2
    return f / np.max(np.abs(f))


def shell_spectrum(f: np.ndarray, grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Mean Fourier amplitude in integer shells ``round(|k|) = K`` for ``K >= 1``."""
    n = grid.n
    f_hat = np.abs(np.fft.fft2(f)) / n**2
    k = np.fft.fftfreq(n, 1.0 / n)
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    shell = np.rint(np.hypot(k1, k2)).astype(int)
    counts = np.bincount(shell.ravel())
    sums = np.bincount(shell.ravel(), weights=f_hat.ravel())
    K = np.arange(len(counts))
    ok = (K >= 1) & (counts > 0)
    return K[ok], sums[ok] / counts[ok]


# -- vortex patches -----------------------------------------------------------


@dataclass(frozen=True)
class PatchSpec:
    """Uniform vortex patch; ``radius`` is the disk radius or the Koch base circumradius."""

    shape: Literal["disk", "koch"] = "disk"
    radius: float = 1.0
    iterations: int = 0
    center: tuple = (np.pi, np.pi)
    amplitude: float = 1.0
    mollify: Optional[float] = None


def koch_snowflake(iterations: int, radius: float = 1.0, center=(0.0, 0.0)) -> np.ndarray:
    """Closed Koch snowflake polygon as ``(m, 2)`` vertices (last vertex not repeated)."""
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    pts = radius * np.exp(1j * (np.pi / 2 - 2 * np.pi * np.arange(3) / 3))
    rot = np.exp(1j * np.pi / 3)
    for _ in range(iterations):
        a = pts
        b = np.roll(pts, -1)
        s1 = a + (b - a) / 3.0
        s2 = a + 2.0 * (b - a) / 3.0
        tip = s1 + (s2 - s1) * rot.conjugate()
        pts = np.stack([a, s1, tip, s2], axis=1).ravel()
    pts = pts + complex(center[0], center[1])
    return np.column_stack([pts.real, pts.imag])


def patch_indicator(spec: PatchSpec, grid: GridSpec) -> np.ndarray:
    x1, x2 = grid.mesh
    if spec.shape == "disk":
        pts = np.stack([x1, x2], axis=-1)
        return (grid.distance(pts, np.asarray(spec.center)) <= spec.radius).astype(float)
    if spec.shape == "koch":
        if spec.iterations > 7 and grid.n < 1024:
            raise ValueError(
                f"koch({spec.iterations}) resolves below one grid cell at n={grid.n}; use n >= 1024"
            )
        poly = PolygonPath(koch_snowflake(spec.iterations, spec.radius, spec.center))
        inside = poly.contains_points(np.column_stack([x1.ravel(), x2.ravel()]))
        return inside.reshape(grid.n, grid.n).astype(float)
    raise ValueError(f"unknown patch shape {spec.shape!r}")


def vortex_patch(spec: PatchSpec, grid: GridSpec) -> np.ndarray:
    """Amplitude times the patch indicator, mean-projected (optionally pre-mollified)."""
    chi = patch_indicator(spec, grid)
    frac = chi.mean()
    if not 0.0 < frac < 1.0:
        raise ValueError(f"patch covers a fraction {frac} of the torus; need (0, 1)")
    w = spec.amplitude * (chi - frac)
    if spec.mollify:
        w = sp.project_mean(sp.mollify(w, grid, spec.mollify))
    return w


def boundary_pixels(mask: np.ndarray) -> np.ndarray:
    """Cells of ``mask`` with at least one periodic 4-neighbour outside it."""
    m = mask.astype(bool)
    outside_nb = np.zeros_like(m)
    for axis in (0, 1):
        for shift in (1, -1):
            outside_nb |= ~np.roll(m, shift, axis=axis)
    return m & outside_nb


def box_counting_dimension(mask: np.ndarray, box_sizes=(4, 8, 16, 32, 64)) -> float:
    """Box-counting dimension of the boundary of a binary image over dyadic box sizes (pixels)."""
    edge = boundary_pixels(mask)
    n = edge.shape[0]
    counts = []
    for b in box_sizes:
        blocks = edge.reshape(n // b, b, n // b, b).any(axis=(1, 3))
        counts.append(blocks.sum())
    slope, _ = np.polyfit(np.log(1.0 / np.asarray(box_sizes, float)), np.log(counts), 1)
    return float(slope)


KOCH_DIMENSION = np.log(4.0) / np.log(3.0)


def make_field(name: str, grid: GridSpec, **params) -> np.ndarray:
    """Construct an initial datum by factory name (used by experiment configs)."""
    if name == "eigenmode":
        return eigenmode(int(params.get("N", 1)), grid)
    if name == "taylor_green":
        return taylor_green(grid, float(params.get("amplitude", 1.0)))
    if name == "random_besov":
        kmax = params.get("kmax")
        return random_besov(float(params.get("s", 0.5)), int(params.get("seed", 0)), grid,
                            None if kmax is None else float(kmax))
    if name in ("disk", "koch"):
        spec = PatchSpec(
            shape=name,
            radius=float(params.get("radius", 1.0)),
            iterations=int(params.get("iterations", 0)),
            amplitude=float(params.get("amplitude", 1.0)),
            mollify=float(params["mollify"]) if params.get("mollify") else None,
        )
        return vortex_patch(spec, grid)
    if name == "zero":
        return grid.zeros()
    raise ValueError(f"unknown initial-data factory {name!r}")
