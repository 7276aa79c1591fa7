"""Discrete-time dynamic model matrices shared by the simulator and the filter bank.

State layout is per-axis stacked: [x, vx, (ax, (jx)), y, vy, (ay, (jy))].
Polynomial and CT matrices are closed-form; Singer uses Van Loan discretization
to avoid the small-alpha*T cancellation in the textbook Q entries.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import block_diag, expm


def poly_f(order: int, dt: float) -> np.ndarray:
    """Per-axis Taylor transition for a polynomial model (1=CV, 2=CA, 3=Jerk)."""
    n = order + 1
    f = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            f[i, j] = dt ** (j - i) / math.factorial(j - i)
    return f


def poly_q(order: int, dt: float, q: float) -> np.ndarray:
    """Per-axis process noise, white noise of spectral density q on the highest derivative."""
    n = order + 1
    out = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            k = 2 * order + 1 - i - j
            out[i, j] = q * dt ** k / (math.factorial(order - i) * math.factorial(order - j) * k)
    return out


def lti_discretize(a: np.ndarray, g: np.ndarray, qc: np.ndarray, dt: float):
    """Van Loan: continuous (A, G, Qc) -> discrete (F, Q)."""
    n = a.shape[0]
    m = np.zeros((2 * n, 2 * n))
    m[:n, :n] = -a
    m[:n, n:] = g @ qc @ g.T
    m[n:, n:] = a.T
    e = expm(m * dt)
    f = e[n:, n:].T
    return f, f @ e[:n, n:]


def lti_input(a: np.ndarray, b: np.ndarray, dt: float) -> np.ndarray:
    """Discrete input map integral(exp(A s) ds) B for a constant input over dt."""
    n = a.shape[0]
    k = b.shape[1]
    m = np.zeros((n + k, n + k))
    m[:n, :n] = a
    m[:n, n:] = b
    return expm(m * dt)[:n, n:]


def singer_a(tau: float) -> np.ndarray:
    return np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, -1.0 / tau]])


def singer_fq(dt: float, tau: float, sigma_m2: float):
    """Per-axis Singer (F, Q); exponentially correlated acceleration, variance sigma_m2."""
    a = singer_a(tau)
    g = np.array([[0.0], [0.0], [1.0]])
    qc = np.array([[2.0 * sigma_m2 / tau]])
    return lti_discretize(a, g, qc, dt)


def singer_input(dt: float, tau: float) -> np.ndarray:
    """Per-axis input column mapping a constant mean acceleration into the CS step.

    Chosen so that a noise-free step with the state's own acceleration as the
    mean reproduces the CA kinematics exactly.
    """
    b = np.array([[0.0], [0.0], [1.0 / tau]])
    return lti_input(singer_a(tau), b, dt)[:, 0]


def ct_f(omega: float, dt: float) -> np.ndarray:
    """Coordinated-turn transition on [x, vx, y, vy]; omega in rad/s."""
    if abs(omega) < 1e-12:
        return block_diag(poly_f(1, dt), poly_f(1, dt))
    wt = omega * dt
    s, c = math.sin(wt), math.cos(wt)
    return np.array(
        [
            [1.0, s / omega, 0.0, -(1.0 - c) / omega],
            [0.0, c, 0.0, -s],
            [0.0, (1.0 - c) / omega, 1.0, s / omega],
            [0.0, s, 0.0, c],
        ]
    )


def ct_q(dt: float, q: float) -> np.ndarray:
    """White-acceleration process noise on [x, vx, y, vy]."""
    return block_diag(poly_q(1, dt, q), poly_q(1, dt, q))


def two_axis(m: np.ndarray) -> np.ndarray:
    return block_diag(m, m)


def chol_psd(q: np.ndarray) -> np.ndarray:
    """Cholesky-like factor of a PSD matrix; tolerates zero and near-singular Q."""
    if not np.any(q):
        return np.zeros_like(q)
    try:
        return np.linalg.cholesky(q)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(q)
        w = np.clip(w, 0.0, None)
        return v * np.sqrt(w)
