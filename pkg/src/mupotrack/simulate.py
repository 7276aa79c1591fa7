"""Maneuvering-target scenario simulator.

Ground truth is produced by Markov-switched dynamic models whose switch times
follow a homogeneous Poisson process; radar measurements carry Swerling-1
SNR fluctuation driving the per-return noise level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import models
from .geometry import PolarMeasurement, RadarParams, polar_of, snr_to_polar_sigma, propagate_snr, wrap_angle

MODEL_TAGS = ("CV", "CA", "Jerk", "Singer", "CS", "CT_known", "CT_unknown")

# scratch layout: [x, vx, ax, jx, y, vy, ay, jy]
_AXIS = (slice(0, 4), slice(4, 8))
_CT_IDX = np.array([0, 1, 4, 5])
_SCRATCH_IDX = np.array([2, 3, 6, 7])  # model-internal accel/jerk, zeroed on switch

_DEG = math.pi / 180.0


@dataclass(frozen=True)
class DynamicModel:
    """One entry of the model set; only the fields the tag uses are read."""

    tag: str
    q: float = 1.0                 # process-noise spectral density
    omega: float = 0.0             # rad/s, CT_known
    omega_range: tuple = (-10.0 * _DEG, 10.0 * _DEG)  # rad/s, CT_unknown
    tau: float = 20.0              # s, Singer/CS time constant
    sigma_m: float = 10.0          # m/s^2, Singer maneuver std
    a_max: float = 40.0            # m/s^2, CS acceleration limit

    def __post_init__(self):
        if self.tag not in MODEL_TAGS:
            raise ValueError(f"unknown model tag {self.tag!r}")
        if self.q < 0.0:
            raise ValueError("q must be >= 0")
        if self.tau <= 0.0:
            raise ValueError("tau must be positive")
        if self.omega_range[0] > self.omega_range[1]:
            raise ValueError("omega_range must be ordered")


@dataclass(frozen=True)
class TargetState:
    t: float
    x: float
    y: float
    vx: float
    vy: float
    model: str


@dataclass(frozen=True)
class Track:
    states: tuple

    def __len__(self):
        return len(self.states)

    def positions(self) -> np.ndarray:
        return np.array([[s.x, s.y] for s in self.states])

    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    def state_at(self, t: float, sim_dt: float) -> TargetState:
        i = int(round(t / sim_dt))
        if not 0 <= i < len(self.states):
            raise ValueError(f"t={t} outside track")
        return self.states[i]


@dataclass(frozen=True)
class InitRanges:
    """Uniform sampling intervals for the initial state (radial m, azimuth rad, speed m/s, course rad)."""

    rho: tuple = (150e3, 400e3)
    azimuth: tuple = (-math.pi, math.pi)
    speed: tuple = (200.0, 220.0)
    course: tuple = (-math.pi, math.pi)

    def __post_init__(self):
        for name in ("rho", "azimuth", "speed", "course"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"InitRanges.{name} interval is empty")


def default_model_set() -> tuple:
    return (
        DynamicModel("CV", q=0.1),
        DynamicModel("CA", q=0.5),
        DynamicModel("Jerk", q=0.05),
        DynamicModel("Singer", q=0.0, tau=20.0, sigma_m=10.0),
        DynamicModel("CS", q=0.0, tau=20.0, a_max=40.0),
        DynamicModel("CT_known", q=1.0, omega=3.0 * _DEG),
        DynamicModel("CT_unknown", q=1.0, omega_range=(-10.0 * _DEG, 10.0 * _DEG)),
    )


def uniform_offdiag_matrix(n: int) -> np.ndarray:
    """Row-stochastic matrix, uniform over the other models, zero self-transition."""
    if n == 1:
        return np.ones((1, 1))
    p = np.full((n, n), 1.0 / (n - 1))
    np.fill_diagonal(p, 0.0)
    return p


@dataclass(frozen=True)
class ScenarioConfig:
    models: tuple = field(default_factory=default_model_set)
    init_ranges: InitRanges = field(default_factory=InitRanges)
    duration: float = 200.0
    sim_dt: float = 0.1
    meas_dt: float = 1.0
    lambda_switch: float = 0.02        # 1/s
    transition: np.ndarray = None      # row-stochastic over models; default uniform off-diagonal
    initial_model: str = "CV"
    snr_1: float = 100.0               # linear, at the first measurement tick
    radar: RadarParams = field(default_factory=lambda: RadarParams(range_coeff=150.0, azimuth_coeff=0.02))
    v_max: float = 300.0               # m/s simulation clamp and region sizing
    seed: int = 0

    def __post_init__(self):
        if self.transition is None:
            object.__setattr__(self, "transition", uniform_offdiag_matrix(len(self.models)))
        p = np.asarray(self.transition, dtype=float)
        if p.shape != (len(self.models), len(self.models)):
            raise ValueError("transition matrix shape must match the model set")
        if np.any(p < 0.0) or np.max(np.abs(p.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("transition matrix rows must sum to 1")
        object.__setattr__(self, "transition", p)
        if self.sim_dt <= 0.0 or self.meas_dt <= 0.0 or self.sim_dt > self.meas_dt:
            raise ValueError("need 0 < sim_dt <= meas_dt")
        ratio = self.meas_dt / self.sim_dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("meas_dt must be a multiple of sim_dt")
        if self.lambda_switch < 0.0:
            raise ValueError("lambda_switch must be >= 0")
        if self.duration <= 0.0:
            raise ValueError("duration must be positive")
        tags = [m.tag for m in self.models]
        if self.initial_model not in tags:
            raise ValueError(f"initial_model {self.initial_model!r} not in the model set")

    def model_index(self, tag: str) -> int:
        return [m.tag for m in self.models].index(tag)


def sample_initial_state(ranges: InitRanges, rng: np.random.Generator, model: str = "CV") -> TargetState:
    rho = rng.uniform(*ranges.rho)
    az = rng.uniform(*ranges.azimuth)
    speed = rng.uniform(*ranges.speed)
    course = rng.uniform(*ranges.course)
    return TargetState(
        t=0.0,
        x=rho * math.cos(az),
        y=rho * math.sin(az),
        vx=speed * math.cos(course),
        vy=speed * math.sin(course),
        model=model,
    )


def sample_switch_schedule(lambda_switch, duration, p: np.ndarray, initial_index: int, rng) -> list:
    """Poisson event times on (0, duration] with Markov-drawn successor models.

    Returns [(time, model_index), ...] in time order.
    """
    p = np.asarray(p, dtype=float)
    if np.any(p < 0.0) or np.max(np.abs(p.sum(axis=1) - 1.0)) > 1e-12:
        raise ValueError("transition matrix rows must sum to 1")
    events = []
    if lambda_switch <= 0.0:
        return events
    current = initial_index
    t = rng.exponential(1.0 / lambda_switch)
    while t <= duration:
        current = int(rng.choice(len(p), p=p[current]))
        events.append((t, current))
        t += rng.exponential(1.0 / lambda_switch)
    return events


class _Segment:
    """Discretized stepper for one model segment at a fixed dt."""

    def __init__(self, model: DynamicModel, dt: float, rng):
        self.model = model
        tag = model.tag
        if tag in ("CV", "CA", "Jerk"):
            order = {"CV": 1, "CA": 2, "Jerk": 3}[tag]
            self.n = order + 1
            self.f = models.poly_f(order, dt)
            self.chol = models.chol_psd(models.poly_q(order, dt, model.q))
            self.step = self._step_axiswise
        elif tag == "Singer":
            self.n = 3
            f, q = models.singer_fq(dt, model.tau, model.sigma_m**2)
            self.f = f
            self.chol = models.chol_psd(q)
            self.step = self._step_axiswise
        elif tag == "CS":
            self.n = 3
            f, q_unit = models.singer_fq(dt, model.tau, 1.0)
            self.f = f
            self.chol_unit = models.chol_psd(q_unit)
            self.u = models.singer_input(dt, model.tau)
            self.step = self._step_cs
        elif tag in ("CT_known", "CT_unknown"):
            omega = model.omega if tag == "CT_known" else rng.uniform(*model.omega_range)
            self.f = models.ct_f(omega, dt)
            self.chol = models.chol_psd(models.ct_q(dt, model.q))
            self.step = self._step_ct
        else:  # pragma: no cover - guarded by DynamicModel
            raise ValueError(f"unknown model tag {tag!r}")

    def _step_axiswise(self, s, rng):
        n = self.n
        for ax in _AXIS:
            sub = s[ax][:n]
            s[ax][:n] = self.f @ sub + self.chol @ rng.standard_normal(n)

    def _step_cs(self, s, rng):
        c = math.sqrt((4.0 - math.pi) / math.pi)
        for ax in _AXIS:
            sub = s[ax][:3]
            abar = sub[2]
            sigma_a = c * max(self.model.a_max - abs(abar), 0.0)
            noise = (sigma_a * self.chol_unit) @ rng.standard_normal(3)
            s[ax][:3] = self.f @ sub + self.u * abar + noise

    def _step_ct(self, s, rng):
        v = s[_CT_IDX]
        s[_CT_IDX] = self.f @ v + self.chol @ rng.standard_normal(4)


def propagate(state: TargetState, model: DynamicModel, dt: float, rng) -> TargetState:
    """Single step of one model; scratch acceleration/jerk starts at zero."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    s = np.zeros(8)
    s[0], s[1], s[4], s[5] = state.x, state.vx, state.y, state.vy
    _Segment(model, dt, rng).step(s, rng)
    return TargetState(t=state.t + dt, x=s[0], y=s[4], vx=s[1], vy=s[5], model=model.tag)


def generate_track(config: ScenarioConfig, rng, schedule=None) -> Track:
    """Simulate one truth track on the sim_dt grid.

    schedule overrides the random switch draw with explicit (time, model)
    events; model entries may be tags or indices into config.models.
    """
    init = sample_initial_state(config.init_ranges, rng, config.initial_model)
    idx0 = config.model_index(config.initial_model)
    if schedule is None:
        schedule = sample_switch_schedule(
            config.lambda_switch, config.duration, config.transition, idx0, rng
        )
    else:
        events = []
        prev = 0.0
        for t_ev, model in schedule:
            idx = config.model_index(model) if isinstance(model, str) else int(model)
            if not 0.0 < t_ev <= config.duration:
                raise ValueError("schedule times must lie in (0, duration]")
            if t_ev <= prev:
                raise ValueError("schedule times must be increasing")
            events.append((float(t_ev), idx))
            prev = t_ev
        schedule = events
    n_steps = int(round(config.duration / config.sim_dt))
    s = np.zeros(8)
    s[0], s[1], s[4], s[5] = init.x, init.vx, init.y, init.vy
    current = idx0
    seg = _Segment(config.models[current], config.sim_dt, rng)
    states = [init]
    ev = 0
    for k in range(1, n_steps + 1):
        t_prev = (k - 1) * config.sim_dt
        switched = False
        while ev < len(schedule) and schedule[ev][0] <= t_prev + 1e-12:
            current = schedule[ev][1]
            ev += 1
            switched = True
        if switched:
            s[_SCRATCH_IDX] = 0.0
            seg = _Segment(config.models[current], config.sim_dt, rng)
        seg.step(s, rng)
        speed = math.hypot(s[1], s[5])
        if speed > config.v_max:
            scale = config.v_max / speed
            s[1] *= scale
            s[5] *= scale
        states.append(
            TargetState(
                t=k * config.sim_dt,
                x=s[0], y=s[4], vx=s[1], vy=s[5],
                model=config.models[current].tag,
            )
        )
    return Track(states=tuple(states))


def generate_measurements(track: Track, config: ScenarioConfig, rng) -> list:
    """One PolarMeasurement per meas_dt tick at t = meas_dt, 2*meas_dt, ..."""
    if len(track) == 0:
        raise ValueError("empty track")
    n_ticks = int(math.floor(config.duration / config.meas_dt + 1e-9))
    out = []
    rho_1 = None
    for k in range(1, n_ticks + 1):
        t = k * config.meas_dt
        st = track.state_at(t, config.sim_dt)
        rho_true, theta_true = polar_of(st.x, st.y)
        if rho_1 is None:
            rho_1 = rho_true
        snr_mean = propagate_snr(config.snr_1, rho_1, rho_true)
        snr = max(rng.exponential(snr_mean), 1e-12)  # Swerling 1, scan to scan
        sigma_rho, sigma_theta = snr_to_polar_sigma(snr, config.radar)
        rho = max(rho_true + sigma_rho * rng.standard_normal(), 1.0)
        theta = wrap_angle(theta_true + sigma_theta * rng.standard_normal())
        out.append(PolarMeasurement(rho=rho, theta=theta, snr=snr, t=t))
    return out


def scenario_rng(config: ScenarioConfig) -> np.random.Generator:
    return np.random.default_rng(config.seed)


def with_seed(config: ScenarioConfig, seed: int) -> ScenarioConfig:
    return replace(config, seed=seed)
