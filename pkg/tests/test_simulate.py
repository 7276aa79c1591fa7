import math

import numpy as np
import pytest

from mupotrack.geometry import RadarParams
from mupotrack.simulate import (
    MODEL_TAGS,
    DynamicModel,
    InitRanges,
    ScenarioConfig,
    TargetState,
    default_model_set,
    generate_measurements,
    generate_track,
    propagate,
    sample_initial_state,
    sample_switch_schedule,
    scenario_rng,
    uniform_offdiag_matrix,
    with_seed,
)


def small_scenario(**kw):
    base = dict(duration=20.0, seed=5)
    base.update(kw)
    return ScenarioConfig(**base)


class TestConfigValidation:
    def test_model_tag_checked(self):
        with pytest.raises(ValueError):
            DynamicModel("spline")

    def test_negative_q(self):
        with pytest.raises(ValueError):
            DynamicModel("CV", q=-1.0)

    def test_dt_multiple(self):
        with pytest.raises(ValueError):
            ScenarioConfig(sim_dt=0.3, meas_dt=1.0)

    def test_transition_shape(self):
        with pytest.raises(ValueError):
            ScenarioConfig(transition=np.eye(3))

    def test_transition_rows(self):
        bad = np.full((7, 7), 0.1)
        with pytest.raises(ValueError):
            ScenarioConfig(transition=bad)

    def test_initial_model_in_set(self):
        with pytest.raises(ValueError):
            ScenarioConfig(models=(DynamicModel("CA"),), initial_model="CV",
                           transition=np.eye(1))

    def test_default_transition_uniform(self):
        cfg = ScenarioConfig()
        p = cfg.transition
        assert p.shape == (7, 7)
        assert np.allclose(p.sum(axis=1), 1.0)
        assert not np.any(np.diag(p))

    def test_default_models_cover_tags(self):
        assert tuple(m.tag for m in default_model_set()) == MODEL_TAGS


class TestInitialState:
    def test_ranges_respected(self, rng):
        ranges = InitRanges()
        for _ in range(100):
            st = sample_initial_state(ranges, rng)
            rho = math.hypot(st.x, st.y)
            speed = math.hypot(st.vx, st.vy)
            assert ranges.rho[0] <= rho <= ranges.rho[1]
            assert ranges.speed[0] <= speed <= ranges.speed[1]
            assert st.t == 0.0

    def test_empty_interval_rejected(self):
        with pytest.raises(ValueError):
            InitRanges(speed=(220.0, 200.0))


class TestSchedule:
    def test_zero_rate(self, rng):
        assert sample_switch_schedule(0.0, 100.0, uniform_offdiag_matrix(3), 0, rng) == []

    def test_sorted_within_horizon(self, rng):
        p = uniform_offdiag_matrix(4)
        for _ in range(50):
            ev = sample_switch_schedule(0.1, 200.0, p, 0, rng)
            times = [t for t, _ in ev]
            assert times == sorted(times)
            assert all(0.0 < t <= 200.0 for t in times)

    def test_no_self_transition_with_offdiag(self, rng):
        p = uniform_offdiag_matrix(4)
        prev = 0
        for _ in range(30):
            for t, idx in sample_switch_schedule(0.2, 100.0, p, prev, rng):
                assert idx != prev
                prev = idx

    def test_poisson_mean_quick(self):
        rng = np.random.default_rng(7)
        lam, horizon = 0.05, 100.0
        p = uniform_offdiag_matrix(3)
        counts = [len(sample_switch_schedule(lam, horizon, p, 0, rng)) for _ in range(2000)]
        assert np.mean(counts) == pytest.approx(lam * horizon, rel=0.08)


class TestPropagate:
    def test_cv_noise_free_is_linear(self, rng):
        st = TargetState(t=0.0, x=10.0, y=-5.0, vx=3.0, vy=4.0, model="CV")
        nxt = propagate(st, DynamicModel("CV", q=0.0), 0.5, rng)
        assert nxt.x == pytest.approx(11.5)
        assert nxt.y == pytest.approx(-3.0)
        assert nxt.vx == pytest.approx(3.0)
        assert nxt.vy == pytest.approx(4.0)
        assert nxt.t == pytest.approx(0.5)
        assert nxt.model == "CV"

    def test_ct_noise_free_turns(self, rng):
        st = TargetState(t=0.0, x=0.0, y=0.0, vx=10.0, vy=0.0, model="CV")
        model = DynamicModel("CT_known", q=0.0, omega=math.pi / 2.0)
        nxt = propagate(st, model, 1.0, rng)
        assert nxt.x == pytest.approx(20.0 / math.pi)
        assert nxt.y == pytest.approx(20.0 / math.pi)
        assert nxt.vx == pytest.approx(0.0, abs=1e-12)
        assert nxt.vy == pytest.approx(10.0)

    def test_cs_noise_free_from_zero_accel_is_cv(self, rng):
        # Scratch acceleration starts at zero, so the mean-adaptive step
        # reduces to straight-line motion when a_max noise is suppressed.
        st = TargetState(t=0.0, x=0.0, y=0.0, vx=50.0, vy=0.0, model="CS")
        model = DynamicModel("CS", a_max=0.0)
        nxt = propagate(st, model, 1.0, rng)
        assert nxt.x == pytest.approx(50.0)
        assert nxt.vx == pytest.approx(50.0)

    def test_bad_dt(self, rng):
        st = TargetState(t=0.0, x=0.0, y=0.0, vx=0.0, vy=0.0, model="CV")
        with pytest.raises(ValueError):
            propagate(st, DynamicModel("CV"), 0.0, rng)


class TestGenerateTrack:
    def test_deterministic(self):
        cfg = small_scenario()
        t1 = generate_track(cfg, scenario_rng(cfg))
        t2 = generate_track(cfg, scenario_rng(cfg))
        assert t1 == t2

    def test_seed_changes_track(self):
        cfg = small_scenario()
        t1 = generate_track(cfg, scenario_rng(cfg))
        cfg2 = with_seed(cfg, 6)
        t2 = generate_track(cfg2, scenario_rng(cfg2))
        assert t1 != t2

    def test_grid_and_length(self):
        cfg = small_scenario(duration=10.0, sim_dt=0.1)
        track = generate_track(cfg, scenario_rng(cfg))
        assert len(track) == 101
        assert track.states[0].t == 0.0
        assert track.states[-1].t == pytest.approx(10.0)
        dts = np.diff(track.times())
        assert np.allclose(dts, 0.1)

    def test_speed_clamped(self):
        cfg = small_scenario(duration=60.0, v_max=250.0,
                             models=(DynamicModel("CA", q=500.0),),
                             initial_model="CA", transition=np.eye(1),
                             lambda_switch=0.0)
        track = generate_track(cfg, scenario_rng(cfg))
        speeds = np.hypot([s.vx for s in track.states], [s.vy for s in track.states])
        assert np.max(speeds) <= 250.0 + 1e-9

    def test_switch_quantization(self):
        # An event at time e takes effect on the first step that begins at or
        # after e: the new tag first appears at index ceil(e/dt) + 1.
        cfg = small_scenario(duration=30.0, lambda_switch=0.05, seed=11)
        rng = scenario_rng(cfg)
        sample_initial_state(cfg.init_ranges, rng, cfg.initial_model)
        schedule = sample_switch_schedule(
            cfg.lambda_switch, cfg.duration, cfg.transition,
            cfg.model_index(cfg.initial_model), rng)
        track = generate_track(cfg, scenario_rng(cfg))
        assert schedule, "seed 11 must produce at least one switch in 30 s"
        e_time, e_idx = schedule[0]
        k = next(kk for kk in range(1, len(track))
                 if (kk - 1) * cfg.sim_dt >= e_time - 1e-12)
        if len(schedule) > 1:
            assert schedule[1][0] > (k - 1) * cfg.sim_dt + 1e-9
        assert track.states[k].model == cfg.models[e_idx].tag
        assert track.states[k - 1].model != cfg.models[e_idx].tag

    def test_initial_model_tag(self):
        cfg = small_scenario(lambda_switch=0.0)
        track = generate_track(cfg, scenario_rng(cfg))
        assert all(s.model == "CV" for s in track.states)

    def test_state_at(self):
        cfg = small_scenario(duration=5.0)
        track = generate_track(cfg, scenario_rng(cfg))
        assert track.state_at(2.0, cfg.sim_dt) == track.states[20]
        with pytest.raises(ValueError):
            track.state_at(9.0, cfg.sim_dt)


class TestGenerateMeasurements:
    def test_count_and_times(self):
        cfg = small_scenario(duration=20.0)
        rng = scenario_rng(cfg)
        track = generate_track(cfg, rng)
        zs = generate_measurements(track, cfg, rng)
        assert len(zs) == 20
        assert [z.t for z in zs] == [float(k) for k in range(1, 21)]

    def test_deterministic(self):
        cfg = small_scenario()
        rng = scenario_rng(cfg)
        track = generate_track(cfg, rng)
        zs1 = generate_measurements(track, cfg, rng)
        rng = scenario_rng(cfg)
        track = generate_track(cfg, rng)
        zs2 = generate_measurements(track, cfg, rng)
        assert zs1 == zs2

    def test_angles_wrapped_and_fields_positive(self):
        cfg = small_scenario(duration=60.0, seed=3)
        rng = scenario_rng(cfg)
        track = generate_track(cfg, rng)
        for z in generate_measurements(track, cfg, rng):
            assert -math.pi < z.theta <= math.pi
            assert z.rho >= 1.0
            assert z.snr > 0.0

    def test_snr_mean_follows_range(self):
        # With noise frozen by averaging many draws, mean SNR tracks the
        # fourth-power law anchored at the first tick's range.
        cfg = small_scenario(duration=5.0, seed=9, lambda_switch=0.0)
        rng = scenario_rng(cfg)
        track = generate_track(cfg, rng)
        rho_1, _ = None, None
        snr_sums = np.zeros(5)
        n_rep = 4000
        for rep in range(n_rep):
            zs = generate_measurements(track, cfg, np.random.default_rng(rep))
            snr_sums += [z.snr for z in zs]
        means = snr_sums / n_rep
        st = track.state_at(1.0, cfg.sim_dt)
        rho_1 = math.hypot(st.x, st.y)
        for k in range(5):
            st = track.state_at(float(k + 1), cfg.sim_dt)
            rho_k = math.hypot(st.x, st.y)
            want = cfg.snr_1 * (rho_1 / rho_k) ** 4
            assert means[k] == pytest.approx(want, rel=0.08)


class TestExplicitSchedule:
    def test_segments_follow_plan(self):
        cfg = small_scenario(duration=30.0, seed=2)
        plan = [(10.0, "CT_known"), (20.0, "CV")]
        track = generate_track(cfg, scenario_rng(cfg), schedule=plan)
        tags = {s.t: s.model for s in track.states}
        assert tags[5.0] == "CV"
        assert tags[15.0] == "CT_known"
        assert tags[25.0] == "CV"

    def test_indices_accepted(self):
        cfg = small_scenario(duration=10.0, seed=2)
        idx = cfg.model_index("CA")
        track = generate_track(cfg, scenario_rng(cfg), schedule=[(4.0, idx)])
        assert track.state_at(8.0, cfg.sim_dt).model == "CA"

    def test_deterministic_given_rng(self):
        cfg = small_scenario(duration=10.0, seed=7)
        plan = [(3.0, "Jerk"), (7.0, "CV")]
        a = generate_track(cfg, scenario_rng(cfg), schedule=plan)
        b = generate_track(cfg, scenario_rng(cfg), schedule=plan)
        assert a == b

    def test_bad_times_rejected(self):
        cfg = small_scenario(duration=10.0)
        with pytest.raises(ValueError, match="increasing"):
            generate_track(cfg, scenario_rng(cfg), schedule=[(5.0, "CV"), (5.0, "CA")])
        with pytest.raises(ValueError, match="duration"):
            generate_track(cfg, scenario_rng(cfg), schedule=[(11.0, "CV")])
        with pytest.raises(ValueError, match="duration"):
            generate_track(cfg, scenario_rng(cfg), schedule=[(0.0, "CV")])
