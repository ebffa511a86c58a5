"""Least-squares convergence-order fits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    residuals: np.ndarray

    def predict(self, x):
        return self.intercept + self.slope * np.asarray(x)


def rate_fit(xs, ys, min_points: int = 4) -> RateFit:
    """Fit ``y = intercept + slope * x`` (callers pass logarithms)."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape:
        raise ValueError("xs and ys differ in length")
    if len(x) < min_points:
        raise ValueError(f"a rate fit needs at least {min_points} points, got {len(x)}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite values in rate fit")
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (intercept + slope * x)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(slope), float(intercept), r2, resid)


def loglog_fit(nus, errors, min_points: int = 4) -> RateFit:
    return rate_fit(np.log(nus), np.log(errors), min_points)


def corollary_exponent(s: float, rate_constant: float, T: float, omega_sup: float, p: float) -> float:
    """Predicted L^p convergence order ``s e^{-2cT W} / (p (1 + s e^{-cT W}))`` in ``nu T``."""
    decay = np.exp(-rate_constant * T * omega_sup)
    return float(s * decay**2 / (p * (1.0 + s * decay)))
