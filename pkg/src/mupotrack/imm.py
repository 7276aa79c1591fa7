"""IMM filter bank over MUCM-converted Cartesian measurements.

Models of different state dimension are mixed by lifting into a canonical
6-state [x, vx, ax, y, vy, ay]: missing components enter as zero mean with
pad_var variance, and each model truncates back to its own layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import models
from .geometry import ConvertedMeasurement

_CANON = 6
_CANON4 = np.array([0, 1, 3, 4])   # [x, vx, y, vy] inside the canonical layout
_MU_FLOOR = 1e-12
_DEG = math.pi / 180.0


@dataclass(frozen=True)
class FilterModel:
    label: str
    dim: int
    idx: tuple                     # canonical indices of this model's components
    f_fn: object                   # dt -> F
    q_fn: object                   # dt -> Q

    def transition(self, dt):
        return self.f_fn(dt)

    def noise(self, dt):
        return self.q_fn(dt)

    @property
    def pos_idx(self):
        return self.idx.index(0), self.idx.index(3)


def cv_model(q: float, label: str = None) -> FilterModel:
    return FilterModel(
        label=label or f"CV(q={q:g})",
        dim=4,
        idx=(0, 1, 3, 4),
        f_fn=lambda dt: models.two_axis(models.poly_f(1, dt)),
        q_fn=lambda dt: models.two_axis(models.poly_q(1, dt, q)),
    )


def ca_model(q: float, label: str = None) -> FilterModel:
    return FilterModel(
        label=label or f"CA(q={q:g})",
        dim=6,
        idx=(0, 1, 2, 3, 4, 5),
        f_fn=lambda dt: models.two_axis(models.poly_f(2, dt)),
        q_fn=lambda dt: models.two_axis(models.poly_q(2, dt, q)),
    )


def ct_model(omega: float, q: float = 1.0, label: str = None) -> FilterModel:
    return FilterModel(
        label=label or f"CT(w={omega / _DEG:+.3g}deg/s)",
        dim=4,
        idx=(0, 1, 3, 4),
        f_fn=lambda dt: models.ct_f(omega, dt),
        q_fn=lambda dt: models.ct_q(dt, q),
    )


def markov_pi(n: int, self_prob: float = 0.95) -> np.ndarray:
    if n == 1:
        return np.ones((1, 1))
    pi = np.full((n, n), (1.0 - self_prob) / (n - 1))
    np.fill_diagonal(pi, self_prob)
    return pi


def default_bank() -> tuple:
    """Desk-scale bank: CV x2, CA x2, CT x4."""
    omegas = (3.0, -3.0, 10.0, -10.0)
    return (
        cv_model(0.1),
        cv_model(10.0),
        ca_model(1.0),
        ca_model(50.0),
        *(ct_model(w * _DEG) for w in omegas),
    )


def cv_pair_bank(q_low: float = 0.1, q_high: float = 10.0) -> tuple:
    return (cv_model(q_low), cv_model(q_high))


def full16_bank() -> tuple:
    """Wider 16-model preset: CV/CA process-noise spreads plus eight turn rates."""
    cvs = (0.1, 1.0, 10.0, 100.0)
    cas = (0.1, 1.0, 10.0, 50.0)
    omegas = (1.0, -1.0, 3.0, -3.0, 5.0, -5.0, 10.0, -10.0)
    return (
        *(cv_model(q) for q in cvs),
        *(ca_model(q) for q in cas),
        *(ct_model(w * _DEG) for w in omegas),
    )


BANK_PRESETS = {
    "default8": default_bank,
    "cv-pair": cv_pair_bank,
    "full16": full16_bank,
}


@dataclass(frozen=True)
class ImmConfig:
    models: tuple = field(default_factory=default_bank)
    trans: np.ndarray = None       # Markov mixing matrix
    mu0: np.ndarray = None
    pad_var: float = 100.0         # variance for lifted (unknown) components

    def __post_init__(self):
        n = len(self.models)
        if n == 0:
            raise ValueError("empty model bank")
        trans = markov_pi(n) if self.trans is None else np.asarray(self.trans, dtype=float)
        mu0 = np.full(n, 1.0 / n) if self.mu0 is None else np.asarray(self.mu0, dtype=float)
        if trans.shape != (n, n) or np.max(np.abs(trans.sum(axis=1) - 1.0)) > 1e-12 or np.any(trans < 0):
            raise ValueError("trans must be row-stochastic over the bank")
        if mu0.shape != (n,) or abs(mu0.sum() - 1.0) > 1e-9 or np.any(mu0 < 0):
            raise ValueError("mu0 must be a probability vector")
        object.__setattr__(self, "trans", trans)
        object.__setattr__(self, "mu0", mu0)


@dataclass(frozen=True)
class ImmEstimate:
    """Combined estimate plus the per-model states the next step mixes from."""

    t: float
    x: np.ndarray                  # [x, vx, y, vy]
    p: np.ndarray                  # 4x4
    mu: np.ndarray
    model_states: tuple            # ((x_i, P_i), ...) in bank order

    @property
    def position(self) -> np.ndarray:
        return self.x[[0, 2]]

    @property
    def velocity(self) -> np.ndarray:
        return self.x[[1, 3]]


def _lift(x, p, idx, pad_var):
    xl = np.zeros(_CANON)
    pl = np.diag(np.full(_CANON, pad_var))
    ii = np.asarray(idx)
    xl[ii] = x
    pl[np.ix_(ii, ii)] = p
    return xl, pl


def _combine(states, weights, cfg: ImmConfig):
    xc = np.zeros(_CANON)
    lifted = []
    for (x, p), m, w in zip(states, cfg.models, weights):
        xl, pl = _lift(x, p, m.idx, cfg.pad_var)
        lifted.append((xl, pl))
        xc += w * xl
    pc = np.zeros((_CANON, _CANON))
    for (xl, pl), w in zip(lifted, weights):
        d = xl - xc
        pc += w * (pl + np.outer(d, d))
    return xc, pc


def _solve_spd(s, b):
    """Solve s @ y = b with one jitter retry, then raise."""
    try:
        return np.linalg.solve(s, b)
    except np.linalg.LinAlgError:
        jitter = 1e-9 * max(np.trace(s) / s.shape[0], 1.0)
        return np.linalg.solve(s + jitter * np.eye(s.shape[0]), b)


def _kf_update(xp, pp, z_pos, r, hix):
    """Linear position update; returns posterior and the measurement log-likelihood."""
    dim = xp.shape[0]
    h = np.zeros((2, dim))
    h[0, hix[0]] = 1.0
    h[1, hix[1]] = 1.0
    nu = z_pos - h @ xp
    s = h @ pp @ h.T + r
    s = 0.5 * (s + s.T)
    sinv_nu = _solve_spd(s, nu)
    k = pp @ h.T @ _solve_spd(s, np.eye(2))
    x = xp + k @ nu
    ikh = np.eye(dim) - k @ h
    p = ikh @ pp @ ikh.T + k @ r @ k.T  # Joseph form
    p = 0.5 * (p + p.T)
    sign, logdet = np.linalg.slogdet(s)
    if sign <= 0:
        raise np.linalg.LinAlgError("innovation covariance not positive definite")
    loglik = -0.5 * (nu @ sinv_nu) - 0.5 * logdet - math.log(2.0 * math.pi)
    return x, p, loglik


def imm_step(prev: ImmEstimate, z: ConvertedMeasurement, dt: float, cfg: ImmConfig) -> ImmEstimate:
    """One IMM cycle: mix, per-model KF predict/update, probability update, combine."""
    n = len(cfg.models)
    mu = prev.mu
    c = cfg.trans.T @ mu                      # predicted model probabilities
    c = np.maximum(c, _MU_FLOOR)
    posts = []
    logliks = np.empty(n)
    for j, m in enumerate(cfg.models):
        w = cfg.trans[:, j] * mu / c[j]       # mixing weights mu_{i|j}
        w = w / w.sum()
        x0c, p0c = _combine([st for st in prev.model_states], w, cfg)
        ii = np.asarray(m.idx)
        x0 = x0c[ii]
        p0 = p0c[np.ix_(ii, ii)]
        f = m.transition(dt)
        q = m.noise(dt)
        xp = f @ x0
        pp = f @ p0 @ f.T + q
        x, p, ll = _kf_update(xp, pp, z.position, z.cov, m.pos_idx)
        posts.append((x, p))
        logliks[j] = ll
    logw = logliks + np.log(c)
    mu_new = np.exp(logw - logsumexp(logw))
    mu_new = np.maximum(mu_new, _MU_FLOOR)
    mu_new = mu_new / mu_new.sum()
    xc, pc = _combine(posts, mu_new, cfg)
    return ImmEstimate(
        t=z.t,
        x=xc[_CANON4],
        p=pc[np.ix_(_CANON4, _CANON4)],
        mu=mu_new,
        model_states=tuple(posts),
    )


def init_from_measurements(z1: ConvertedMeasurement, z2: ConvertedMeasurement, cfg: ImmConfig) -> ImmEstimate:
    """Two-point differencing initialization."""
    dt = z2.t - z1.t
    if dt <= 0.0:
        raise ValueError("z2 must be later than z1")
    x4 = np.array([z2.x, (z2.x - z1.x) / dt, z2.y, (z2.y - z1.y) / dt])
    # linear map from (z1, z2) stacked as (x1, y1, x2, y2)
    t = np.array(
        [
            [0.0, 0.0, 1.0, 0.0],
            [-1.0 / dt, 0.0, 1.0 / dt, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [0.0, -1.0 / dt, 0.0, 1.0 / dt],
        ]
    )
    big = np.zeros((4, 4))
    big[:2, :2] = z1.cov
    big[2:, 2:] = z2.cov
    p4 = t @ big @ t.T
    # lift [x, vx, y, vy] into the canonical layout, then cut per model
    x6 = np.zeros(_CANON)
    p6 = np.diag(np.full(_CANON, cfg.pad_var))
    x6[_CANON4] = x4
    p6[np.ix_(_CANON4, _CANON4)] = p4
    states = []
    for m in cfg.models:
        ii = np.asarray(m.idx)
        states.append((x6[ii].copy(), p6[np.ix_(ii, ii)].copy()))
    return ImmEstimate(t=z2.t, x=x4, p=p4, mu=cfg.mu0.copy(), model_states=tuple(states))
