"""Trajectory-function-of-time fitting over the sliding window.

Per-axis ridge least squares on the power basis of window-normalized time
s = (t - t_k1) / (t_kL - t_k1), evaluated densely for the auxiliary channel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_GAMMA = 2
DEFAULT_LAMBDA = 1e-3


@dataclass(frozen=True)
class TfotFit:
    degree: int
    coeffs: np.ndarray      # (degree+1, 2), columns are x and y
    t0: float
    t1: float
    lam: float

    def __post_init__(self):
        if self.coeffs.shape != (self.degree + 1, 2):
            raise ValueError("coefficient block must be (degree+1) x 2")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("non-finite fit coefficients")

    def evaluate(self, t):
        s = self._normalize(np.asarray(t, dtype=float))
        v = np.vander(np.atleast_1d(s), self.degree + 1, increasing=True)
        return v @ self.coeffs

    def _normalize(self, t):
        span = self.t1 - self.t0
        if span <= 0.0:
            return np.zeros_like(t)
        return (t - self.t0) / span


def fit_tfot(points, gamma: int = DEFAULT_GAMMA, lam: float = DEFAULT_LAMBDA) -> TfotFit:
    """Fit converted-measurement positions against normalized window time.

    points: sequence of ConvertedMeasurement (or anything with .t, .x, .y).
    """
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    if lam < 0.0:
        raise ValueError("lambda must be >= 0")
    n = len(points)
    if n < gamma + 1:
        raise ValueError(f"need at least {gamma + 1} points for degree {gamma}")
    ts = np.array([p.t for p in points], dtype=float)
    pos = np.array([[p.x, p.y] for p in points], dtype=float)
    t0, t1 = float(ts.min()), float(ts.max())
    span = t1 - t0
    s = (ts - t0) / span if span > 0.0 else np.zeros_like(ts)
    v = np.vander(s, gamma + 1, increasing=True)
    lhs = v.T @ v + lam * np.eye(gamma + 1)
    coeffs = np.linalg.solve(lhs, v.T @ pos)
    return TfotFit(degree=gamma, coeffs=coeffs, t0=t0, t1=t1, lam=lam)


def sample_tfot(fit: TfotFit, n_s: int):
    """n_s uniform evaluations over the window, endpoints inclusive: [(t, x, y), ...]."""
    if n_s < 2:
        raise ValueError("n_s must be >= 2")
    ts = np.linspace(fit.t0, fit.t1, n_s)
    xy = fit.evaluate(ts)
    return [(float(t), float(p[0]), float(p[1])) for t, p in zip(ts, xy)]
