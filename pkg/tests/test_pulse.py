import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import signal

from qcrdamp.errors import RangeError
from qcrdamp.params import EnvironmentRates
from qcrdamp.pulse import (
    NS,
    BiasPulse,
    ConstantRate,
    ScaledRate,
    Timeline,
    distort,
    edge_average_rate,
    evolve_amplitude,
    predicted_log_ratio,
    pulse_voltage,
    timeline_from_dict,
    total_damping,
)

from . import oracles


def bias(params, fraction):
    return fraction * 2 * params.Delta / oracles.E


class TestPulseShape:
    p = BiasPulse(V_p=345e-6, tau=20 * NS, dt_rise=1.25 * NS, dt_fall=1.25 * NS, t_start=30 * NS)

    def test_plateau_midpoint(self):
        assert pulse_voltage(40 * NS, self.p) == 345e-6

    def test_half_rise(self):
        assert pulse_voltage(30 * NS + 0.625 * NS, self.p) == pytest.approx(345e-6 / 2, rel=1e-12)

    def test_half_fall(self):
        assert pulse_voltage(50 * NS - 0.625 * NS, self.p) == pytest.approx(345e-6 / 2, rel=1e-12)

    def test_zero_outside(self):
        t = np.array([0.0, 29.999, 50.001, 80.0]) * NS
        assert np.all(pulse_voltage(t, self.p) == 0.0)

    def test_continuous(self):
        for b in self.p.breakpoints():
            v = pulse_voltage(np.array([b - 1e-15, b, b + 1e-15]), self.p)
            assert np.ptp(v) < 1e-9 * 345e-6

    def test_example_pulse_is_point_eight_of_gap(self, params):
        assert self.p.V_p / bias(params, 1.0) == pytest.approx(0.8, abs=0.005)
        assert self.p.dt_rise == self.p.dt_fall == 1.25 * NS

    def test_edges_included_in_tau(self):
        with pytest.raises(ValueError, match="shorter than rise"):
            BiasPulse(1e-4, 2 * NS, 1.25 * NS, 1.25 * NS)
        BiasPulse(1e-4, 2.5 * NS, 1.25 * NS, 1.25 * NS)

    def test_negative_duration_rejected(self):
        with pytest.raises(ValueError):
            BiasPulse(1e-4, 5 * NS, -1 * NS)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0, 5), st.floats(0, 5), st.floats(0, 30), st.floats(0, 1))
    def test_bounded_by_plateau(self, r, f, extra, u):
        p = BiasPulse(1.0, (r + f + extra) * NS, r * NS, f * NS, 10 * NS)
        t = 10 * NS + u * p.tau
        v = pulse_voltage(t, p)
        assert 0.0 <= v <= 1.0


class TestDistort:
    def test_identity(self):
        x = np.random.default_rng(0).normal(size=500)
        assert np.array_equal(distort(x, 0.1 * NS, 0.0), x)

    def test_step_time_constant(self):
        dt = 0.05 * NS
        x = np.r_[np.zeros(100), np.ones(400)]
        y = distort(x, dt, 2 * NS)
        t_cross = (np.argmax(y >= 1 - math.exp(-1) - 1e-12) - 100) * dt
        assert abs(t_cross - 2 * NS) <= dt
        assert y[100 + 40] == pytest.approx(1 - math.exp(-1), rel=1e-12)

    def test_matches_continuous_single_pole(self):
        # zero-order-hold input through 1/(1 + s tau_c), simulated by scipy
        dt, tau_c = 0.1 * NS, 2.65 * NS
        t = np.arange(800) * dt
        x = np.sin(t / (7 * NS)) ** 2 + (t > 20 * NS)
        _, ref, _ = signal.lsim(([1.0], [tau_c, 1.0]), x, t, interp=False)
        np.testing.assert_allclose(distort(x, dt, tau_c), ref, atol=1e-12)

    def test_settled_start(self):
        y = distort(np.full(50, 3.0), NS, 2 * NS)
        np.testing.assert_allclose(y, 3.0, rtol=1e-15)


ENV = EnvironmentRates(gamma_tr=1.2e7, gamma_x_fraction=0.1, gamma_qcr_off=0.0)


def timeline(tau=20 * NS, V_p=345e-6, edge=0.0, env=ENV, tau_c=0.0, t_start=30 * NS):
    return Timeline(BiasPulse(V_p, tau, edge, edge, t_start), 20 * NS, 100 * NS, env, tau_c=tau_c, t_end=110 * NS)


class TestTotalDamping:
    def test_off_state_before_pulse(self, theory_curve):
        tl = timeline(edge=1.25 * NS, tau_c=2.65 * NS)
        g = total_damping(np.array([0.0, 25 * NS]), tl, theory_curve)
        np.testing.assert_allclose(g, ENV.background + theory_curve(0.0), rtol=1e-12)

    def test_zero_height_pulse(self, theory_curve):
        tl = timeline(V_p=0.0)
        assert total_damping(40 * NS, tl, theory_curve) == total_damping(10 * NS, tl, theory_curve)

    def test_plateau_level(self, theory_curve, params):
        V = bias(params, 0.8)
        pinned = ScaledRate(theory_curve, 6.7e8 / float(theory_curve(V)))
        tl = timeline(V_p=V, edge=1.25 * NS)
        g = total_damping(40 * NS, tl, pinned)
        assert g == pytest.approx(6.7e8 + 1.2e7 + 1.2e6, rel=1e-9)

    def test_outside_curve_raises(self, theory_curve, params):
        tl = timeline(V_p=bias(params, 1.5))
        with pytest.raises(RangeError):
            total_damping(40 * NS, tl, theory_curve)


class TestTimeline:
    def test_bracketing(self):
        p = BiasPulse(1e-4, 10 * NS, t_start=30 * NS)
        with pytest.raises(ValueError):
            Timeline(p, 30 * NS, 100 * NS)
        with pytest.raises(ValueError):
            Timeline(p, 20 * NS, 40 * NS)
        with pytest.raises(ValueError):
            Timeline(BiasPulse(1e-4, 60 * NS, t_start=30 * NS), 20 * NS, 80 * NS)

    def test_dict_round_trip(self):
        tl = timeline(edge=1.25 * NS, tau_c=2.65 * NS)
        back = timeline_from_dict(tl.to_dict())
        assert back.to_dict() == tl.to_dict()
        assert back.digest() == tl.digest()
        assert tl.to_dict()["pulse"]["V_p_uV"] == pytest.approx(345.0)

    def test_missing_key(self):
        doc = timeline().to_dict()
        del doc["t_a_ns"]
        with pytest.raises(ValueError, match="t_a_ns"):
            timeline_from_dict(doc)


class TestEvolution:
    def test_free_decay(self):
        g = ENV.background
        tl = Timeline(BiasPulse(0.0, 0.0, t_start=50 * NS), 10 * NS, 400 * NS, ENV, t_end=400 * NS)
        traj = evolve_amplitude(tl, ConstantRate(0.0))
        t = 5 / g
        assert traj.amplitude(t) == pytest.approx(math.exp(-g * t / 2), rel=1e-6)

    @pytest.mark.parametrize("gamma", [1e7, 1e8, 6.7e8])
    def test_rectangular_closed_form(self, gamma):
        env = EnvironmentRates(1.2e7, 0.1, 1.1e5)
        tl = timeline(tau=17 * NS, env=env)
        traj = evolve_amplitude(tl, ConstantRate(gamma, env.gamma_qcr_off))
        ref = oracles.rectangular_log_ratio(gamma, 17 * NS, env.background, env.gamma_qcr_off, 80 * NS)
        assert traj.log_ratio() == pytest.approx(ref, rel=1e-9)

    def test_piecewise_schedules(self):
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(50):
            edge = rng.choice([0.0, rng.uniform(0.2, 3.0)]) * NS
            t_start = rng.uniform(15, 40) * NS
            tau = rng.uniform(2 * edge / NS + 0.5, 40) * NS
            env = EnvironmentRates(rng.uniform(1e6, 5e7), rng.uniform(0, 0.5), rng.uniform(0, 1e6))
            on = 10 ** rng.uniform(6, 9)
            tl = Timeline(BiasPulse(1e-4, tau, edge, edge, t_start), 10 * NS, t_start + tau + 5 * NS, env)
            traj = evolve_amplitude(tl, ConstantRate(on, env.gamma_qcr_off))
            edges = [0.0, t_start, t_start + tau, tl.stop]
            rates = [env.background + env.gamma_qcr_off, env.background + on, env.background + env.gamma_qcr_off]
            for t in np.r_[rng.uniform(0, tl.stop, 10), tl.t_b, tl.t_a, t_start, t_start + tau]:
                ref = math.exp(oracles.piecewise_log_amplitude(t, edges, rates))
                worst = max(worst, abs(traj.amplitude(t) / ref - 1))
        assert worst < 1e-6

    def test_simulator_matches_analysis_model_rectangular(self):
        env = EnvironmentRates(1.2e7, 0.1, 2e5)
        for tau in (3, 11, 29, 55):
            tl = timeline(tau=tau * NS, env=env)
            traj = evolve_amplitude(tl, ConstantRate(3e8, env.gamma_qcr_off))
            assert traj.log_ratio() == pytest.approx(predicted_log_ratio(tl, 3e8), rel=1e-6)

    def test_simulator_matches_analysis_model_with_edges(self, theory_curve, params):
        V = bias(params, 0.8)
        env = EnvironmentRates(1.2e7, 0.1, float(theory_curve(0.0)))
        p = BiasPulse(V, 12 * NS, 1.25 * NS, 1.25 * NS, 30 * NS)
        g_edge = edge_average_rate(p, theory_curve)
        tl = Timeline(p, 20 * NS, 100 * NS, env)
        traj = evolve_amplitude(tl, theory_curve)
        pred = predicted_log_ratio(tl, float(theory_curve(V)), g_edge)
        assert traj.log_ratio() == pytest.approx(pred, rel=1e-6)

    def test_step_size_bound(self):
        tl = timeline(edge=1.25 * NS)
        traj = evolve_amplitude(tl, ConstantRate(6.7e8))
        h_max = min(1.25 * NS, 1 / (6.7e8 + ENV.background)) / 20
        assert np.max(np.diff(traj.t)) <= h_max * (1 + 1e-9)

    def test_distorted_step_size_bound(self):
        tl = timeline(edge=1.25 * NS, tau_c=0.5 * NS)
        traj = evolve_amplitude(tl, ConstantRate(1e6))
        assert np.max(np.diff(traj.t)) <= 0.5 * NS / 20 * (1 + 1e-9)

    @settings(max_examples=20, deadline=None)
    @given(
        st.floats(0.1, 1.1),
        st.floats(2.5, 40),
        st.one_of(st.just(0.0), st.floats(0.2, 1.25)),
        st.one_of(st.just(0.0), st.floats(0.5, 4)),
    )
    def test_amplitude_monotone(self, theory_curve, params, frac, tau, edge, tau_c):
        tl = timeline(tau=tau * NS, V_p=bias(params, frac), edge=edge * NS, tau_c=tau_c * NS)
        traj = evolve_amplitude(tl, theory_curve)
        assert traj.A[0] == 1.0
        assert np.all(np.diff(traj.log_A) <= 0)
        assert np.all(traj.A > 0)

    def test_pathological_step_rejected(self):
        tl = timeline(edge=1e-25 * NS)
        with pytest.raises(FloatingPointError, match="step size underflow"):
            evolve_amplitude(tl, ConstantRate(1e8))

    def test_outside_time_rejected(self):
        traj = evolve_amplitude(timeline(), ConstantRate(1e8))
        with pytest.raises(ValueError):
            traj.amplitude(200 * NS)


class TestAnalysisModel:
    def test_no_decay(self):
        env = EnvironmentRates(gamma_tr=1e-30, gamma_x_fraction=0.0, gamma_qcr_off=0.0)
        assert abs(predicted_log_ratio(timeline(env=env), 0.0, 0.0)) < 1e-36

    def test_edges_only_pulse(self):
        tl = timeline(tau=2.5 * NS, edge=1.25 * NS)
        assert predicted_log_ratio(tl, 0.0, 5e7) == predicted_log_ratio(tl, 9e8, 5e7)

    def test_slope_is_half_gamma(self):
        taus = np.linspace(10, 30, 21) * NS
        y = [predicted_log_ratio(timeline(tau=t, edge=1.25 * NS), 2e8, 3e7) for t in taus]
        slope = np.polyfit(taus, y, 1)[0]
        assert slope == pytest.approx(-1e8, rel=1e-9)

    def test_window_precondition(self):
        tl = timeline()
        bad = Timeline.__new__(Timeline)
        object.__setattr__(bad, "pulse", BiasPulse(1e-4, 90 * NS, t_start=30 * NS))
        for name in ("t_b", "t_a", "env", "drive_end", "tau_c", "t_end"):
            object.__setattr__(bad, name, getattr(tl, name))
        with pytest.raises(ValueError):
            predicted_log_ratio(bad, 1e8)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.05, 1.2))
    def test_edge_average_between_extremes(self, theory_curve, params, frac):
        V_p = bias(params, frac)
        g = edge_average_rate(BiasPulse(V_p, 10 * NS, NS, NS), theory_curve)
        grid = theory_curve(np.linspace(0, V_p, 2001))
        assert grid.min() * (1 - 1e-9) <= g <= grid.max() * (1 + 1e-9)


class TestReset:
    def test_plateau_time_for_one_percent(self):
        g = 6.7e8
        env = EnvironmentRates(gamma_tr=1e-3, gamma_x_fraction=0.0)
        tl = timeline(tau=30 * NS, env=env)
        traj = evolve_amplitude(tl, ConstantRate(g))
        t_reset = traj.reset_time(tl.pulse.t_start) - tl.pulse.t_start
        assert t_reset == pytest.approx(math.log(100) / g, rel=1e-6)
        assert math.log(100) / g == pytest.approx(6.87e-9, abs=0.01e-9)
