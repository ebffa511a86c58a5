"""Periodic grid, trigonometric transforms and spectral operators on the 2π torus.

Fields are plain ``(n, n)`` float arrays indexed ``[i1, i2]`` so that axis 0
carries ``x1`` and axis 1 carries ``x2``. Vector fields are ``(2, n, n)``.
All transforms are real FFTs (``scipy.fft.rfft2``); the ``workers`` setting
controls threading and never changes results beyond round-off.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

TWO_PI = 2.0 * np.pi

_workers = 1


def set_workers(count: int) -> None:
    """Set the thread count used by every FFT in the package (1 = serial reference)."""
    global _workers
    if count < 1:
        raise ValueError(f"worker count must be >= 1, got {count}")
    _workers = int(count)


class MeanViolationError(ValueError):
    """Raised when a field that must have zero mean does not."""

    def __init__(self, mean: float, scale: float):
        self.mean = mean
        self.scale = scale
        super().__init__(f"field mean {mean:.3e} is not zero (max|f| = {scale:.3e})")


@dataclass(frozen=True)
class GridSpec:
    """Square periodic grid with ``n`` points per axis on a torus of side ``length``."""

    n: int
    length: float = TWO_PI

    def __post_init__(self):
        if self.n < 16 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two >= 16, got {self.n}")
        if not np.isclose(self.length, TWO_PI):
            raise ValueError("the torus side is fixed at 2*pi")

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def area(self) -> float:
        return self.length**2

    @property
    def cell_area(self) -> float:
        return self.dx**2

    @cached_property
    def coords(self) -> np.ndarray:
        return np.arange(self.n) * self.dx

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinates ``(x1, x2)`` with ``indexing='ij'``."""
        return np.meshgrid(self.coords, self.coords, indexing="ij")

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray]:
        """Integer wavenumbers ``(k1, k2)`` broadcast to the rfft2 layout ``(n, n//2+1)``."""
        k1 = np.fft.fftfreq(self.n, 1.0 / self.n)
        k2 = np.fft.rfftfreq(self.n, 1.0 / self.n)
        return np.meshgrid(k1, k2, indexing="ij")

    @cached_property
    def k_squared(self) -> np.ndarray:
        k1, k2 = self.wavenumbers
        return k1**2 + k2**2

    @cached_property
    def inv_k_squared(self) -> np.ndarray:
        ksq = self.k_squared.copy()
        ksq[0, 0] = 1.0
        out = 1.0 / ksq
        out[0, 0] = 0.0
        return out

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        k1, k2 = self.wavenumbers
        cut = self.n / 3.0
        return (np.abs(k1) <= cut) & (np.abs(k2) <= cut)

    @cached_property
    def rfft_weights(self) -> np.ndarray:
        """Multiplicity of each rfft2 coefficient in the full spectrum (1 or 2)."""
        w = np.full((self.n, self.n // 2 + 1), 2.0)
        w[:, 0] = 1.0
        w[:, -1] = 1.0
        return w

    def distance(self, x, y) -> np.ndarray:
        """Geodesic torus distance between points (last axis = 2 coordinates)."""
        d = np.abs(np.asarray(x, float) - np.asarray(y, float)) % self.length
        d = np.minimum(d, self.length - d)
        return np.sqrt(np.sum(d**2, axis=-1))

    def zeros(self) -> np.ndarray:
        return np.zeros((self.n, self.n))


def forward(f: np.ndarray) -> np.ndarray:
    """Grid values -> rfft2 coefficients (unnormalized, numpy convention)."""
    return sfft.rfft2(f, workers=_workers)


def inverse(f_hat: np.ndarray, n: int) -> np.ndarray:
    return sfft.irfft2(f_hat, s=(n, n), workers=_workers)


def check_zero_mean(f: np.ndarray, rtol: float = 1e-12) -> None:
    mean = float(np.mean(f))
    scale = float(np.max(np.abs(f))) if f.size else 0.0
    if abs(mean) > rtol * max(scale, 1e-300) and abs(mean) > 1e-300:
        raise MeanViolationError(mean, scale)


def project_mean(f: np.ndarray) -> np.ndarray:
    return f - np.mean(f)


def velocity_hat_from_vorticity_hat(w_hat: np.ndarray, grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    # psi solves lap psi = w; u = (-d2 psi, d1 psi) so that curl u = +w
    k1, k2 = grid.wavenumbers
    psi_hat = -w_hat * grid.inv_k_squared
    return -1j * k2 * psi_hat, 1j * k1 * psi_hat


def biot_savart(omega: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Velocity ``u = grad^perp psi`` with ``lap psi = omega``; ``curl u = +omega``.

    Raises MeanViolationError when ``omega`` does not have zero mean.
    """
    check_zero_mean(omega)
    u1_hat, u2_hat = velocity_hat_from_vorticity_hat(forward(omega), grid)
    return np.stack([inverse(u1_hat, grid.n), inverse(u2_hat, grid.n)])


def stream_function(omega: np.ndarray, grid: GridSpec) -> np.ndarray:
    check_zero_mean(omega)
    return inverse(-forward(omega) * grid.inv_k_squared, grid.n)


def gradient(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    k1, k2 = grid.wavenumbers
    f_hat = forward(f)
    return np.stack([inverse(1j * k1 * f_hat, grid.n), inverse(1j * k2 * f_hat, grid.n)])


def velocity_gradient(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Tensor ``G[i, j] = d_j u_i`` with shape ``(2, 2, n, n)``."""
    return np.stack([gradient(u[0], grid), gradient(u[1], grid)])


def divergence(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    k1, k2 = grid.wavenumbers
    return inverse(1j * k1 * forward(u[0]) + 1j * k2 * forward(u[1]), grid.n)


def curl(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    k1, k2 = grid.wavenumbers
    return inverse(1j * k1 * forward(u[1]) - 1j * k2 * forward(u[0]), grid.n)


def laplacian(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    return inverse(-grid.k_squared * forward(f), grid.n)


def mollify(f: np.ndarray, grid: GridSpec, ell: float) -> np.ndarray:
    """Convolve with a unit-mass Gaussian at scale ``ell`` (multiplier exp(-(ell|k|)^2/2))."""
    if not ell > 0:
        raise ValueError(f"mollification scale must be positive, got {ell}")
    return inverse(np.exp(-0.5 * ell**2 * grid.k_squared) * forward(f), grid.n)


def dealias(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Zero every mode with max(|k1|, |k2|) > n/3."""
    return inverse(forward(f) * grid.dealias_mask, grid.n)


def resample(f: np.ndarray, n_new: int) -> np.ndarray:
    """Spectral zero-padding / truncation of a periodic field to ``n_new`` points."""
    n = f.shape[0]
    if n_new == n:
        return f.copy()
    f_hat = np.fft.fft2(f)
    m = min(n, n_new) // 2
    out = np.zeros((n_new, n_new), dtype=complex)
    idx = np.r_[0:m, -m + 1 : 0]
    out[np.ix_(idx, idx)] = f_hat[np.ix_(idx, idx)]
    return np.real(np.fft.ifft2(out)) * (n_new / n) ** 2


def spectral_energy(f: np.ndarray, grid: GridSpec) -> float:
    """``int f^2 dx`` evaluated from the Fourier coefficients (Parseval)."""
    f_hat = forward(f)
    return float(np.sum(grid.rfft_weights * np.abs(f_hat) ** 2)) * grid.area / grid.n**4


# -- snapshot files -----------------------------------------------------------

SNAPSHOT_MAGIC = "YUD1"


def write_snapshot(path, values: np.ndarray, grid: GridSpec, time: float = 0.0) -> None:
    """Write ``YUD1 <n> <length> <time>`` followed by n*n little-endian float64, row-major."""
    header = f"{SNAPSHOT_MAGIC} {grid.n} {grid.length!r} {float(time)!r}\n".encode("ascii")
    data = np.ascontiguousarray(values, dtype="<f8")
    if data.shape != (grid.n, grid.n):
        raise ValueError(f"expected shape {(grid.n, grid.n)}, got {data.shape}")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes(order="C"))


def read_snapshot(path) -> tuple[np.ndarray, GridSpec, float]:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        if len(header) != 4 or header[0] != SNAPSHOT_MAGIC:
            raise ValueError(f"{path}: not a {SNAPSHOT_MAGIC} snapshot")
        n, length, time = int(header[1]), float(header[2]), float(header[3])
        raw = fh.read()
    if len(raw) != 8 * n * n:
        raise ValueError(f"{path}: expected {8 * n * n} data bytes, found {len(raw)}")
    values = np.frombuffer(raw, dtype="<f8").reshape(n, n).astype(float)
    return values, GridSpec(n, length), time
