import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kerr_echoes.analysis import detect_echoes, fit_collapse_time
from kerr_echoes.analytic import q_free
from kerr_echoes.dynamics import (KickSpec, PulseSpec, SystemParams, TimeSeries, energy_level,
                                  free_propagate, propagate_driven, run_kicked_scenario,
                                  sort_pulses, states_at)
from kerr_echoes.errors import NumericalToleranceError
from kerr_echoes.fock import (Truncation, apply_displacement, coherent_state, fidelity,
                              recommended_n_max)

FIG2_LAM = -3 * 0.01 * math.sqrt(math.pi)


def coherent(a, kicks=()):
    return coherent_state(a, Truncation(recommended_n_max(a, kicks)))


class TestEnergies:
    def test_ground(self):
        assert energy_level(0, SystemParams(0.3)) == 0

    def test_first_level_without_detuning(self):
        assert energy_level(1, SystemParams(0.0)) == 0

    @given(st.integers(0, 500), st.floats(-2, 2))
    def test_gap(self, n, d):
        p = SystemParams(d)
        assert energy_level(n + 1, p) - energy_level(n, p) == pytest.approx(d + 2 * n, abs=1e-9)

    def test_negative_level(self):
        with pytest.raises(ValueError):
            energy_level(-1, SystemParams(0.0))


class TestFreePropagation:
    def test_zero_duration(self):
        s = coherent(2)
        assert free_propagate(s, 0.0, SystemParams(0.1)) is s

    def test_revival_at_pi(self):
        s = coherent(4)
        out = free_propagate(s, math.pi, SystemParams(0.0))
        assert np.max(np.abs(out.amps - s.amps)) < 1e-10

    def test_matches_closed_form(self):
        from kerr_echoes.fock import expect_q_moment
        s = free_propagate(coherent(4), 0.3, SystemParams(0.0))
        assert expect_q_moment(s, 1) == pytest.approx(float(q_free(0.3, 4, 0.0)), abs=1e-10)

    @given(st.floats(0, 3))
    def test_revival_periodicity(self, t):
        s = coherent(4)
        p = SystemParams(0.0)
        a = free_propagate(s, t, p)
        b = free_propagate(s, t + math.pi, p)
        assert fidelity(a, b) > 1 - 1e-10

    def test_negative_duration(self):
        with pytest.raises(ValueError):
            free_propagate(coherent(1), -0.1, SystemParams(0.0))


class TestDriven:
    def test_zero_drive_is_free(self):
        s = coherent(3)
        p = SystemParams(0.01)
        out = propagate_driven(s, PulseSpec(0.0, 0.01, 0.5), 0.45, 0.55, p)
        ref = free_propagate(s, 0.1, p)
        assert np.max(np.abs(out.amps - ref.amps)) < 1e-10

    def test_split_window(self):
        s = coherent(4)
        p = SystemParams(0.01)
        pulse = PulseSpec(3.0, 0.02, 0.8)
        whole = propagate_driven(s, pulse, 0.7, 0.9, p, dt=1e-4)
        half = propagate_driven(s, pulse, 0.7, 0.8, p, dt=1e-4)
        half = propagate_driven(half, pulse, 0.8, 0.9, p, dt=1e-4)
        assert np.max(np.abs(whole.amps - half.amps)) < 1e-10

    def test_norm_conserved(self):
        s = coherent(6, [FIG2_LAM])
        out = propagate_driven(s, PulseSpec(3.0, 0.01, 0.5), 0.45, 0.55, SystemParams(0.01))
        assert abs(out.norm - s.norm) < 1e-9 * 0.1

    def test_norm_drift_detected(self):
        s = coherent(6, [FIG2_LAM])
        with pytest.raises(NumericalToleranceError):
            propagate_driven(s, PulseSpec(3.0, 0.01, 0.5), 0.45, 0.55, SystemParams(0.01), dt=0.01)

    def _impulsive_distance(self, sigma, lam=FIG2_LAM, a=6.0):
        p = SystemParams(0.01)
        e0 = -lam / (sigma * math.sqrt(math.pi))
        pulse = PulseSpec(e0, sigma, 0.5)
        t0, t1 = pulse.window
        s = coherent(a, [lam])
        out = propagate_driven(s, pulse, t0, t1, p)
        ref = free_propagate(s, 0.5 - t0, p)
        ref = free_propagate(apply_displacement(ref, 1j * lam), t1 - 0.5, p)
        return float(np.linalg.norm(out.amps - ref.amps))

    @pytest.mark.xfail(strict=True, reason="the Kerr phase accumulated during a sigma=0.01 pulse "
                                           "at alpha0=6 leaves an L2 distance near 0.06")
    def test_fig2_pulse_close_to_displacement(self):
        assert self._impulsive_distance(0.01) < 1e-2

    def test_pulse_converges_to_displacement(self):
        d = [self._impulsive_distance(s) for s in (0.02, 0.01, 0.005, 0.0025)]
        assert all(x > y for x, y in zip(d, d[1:]))
        assert d[-1] < 0.25 * d[1]


class TestScenario:
    def test_free_series_matches_closed_form(self):
        ts = np.linspace(0, 2 * math.pi, 1001)
        series = run_kicked_scenario(coherent(4), [], SystemParams(0.0), ts)
        assert np.max(np.abs(series.q1 - q_free(ts, 4, 0.0))) < 1e-8
        assert np.max(np.abs(series.norm_or_trace - 1)) < 1e-12

    def test_fig3a_echo(self):
        ts = np.linspace(0, 3.6, 1801)
        pulse = PulseSpec(0.5, 0.02, 0.8)
        series = run_kicked_scenario(coherent(4, [pulse.kick_strength]), [pulse], SystemParams(0.01), ts)
        echo = detect_echoes(series, 0.8, 4.0).find("quantum_echo", 1)
        assert echo.time == pytest.approx(2.34, abs=0.03)

    def test_fig2_responses(self):
        ts = np.linspace(0, 3.5, 3501)
        pulse = PulseSpec(3.0, 0.01, 0.5)
        series = run_kicked_scenario(coherent(6, [FIG2_LAM]), [pulse], SystemParams(0.01), ts)
        rep = detect_echoes(series, 0.5, 6.0)
        assert rep.find("classical_echo", 1).time == pytest.approx(1.0, abs=0.03)
        assert rep.find("quantum_echo", 2).time == pytest.approx(2.14, abs=0.03)
        assert rep.find("quantum_echo", 1).time == pytest.approx(2.64, abs=0.03)

    def test_collapse_time(self):
        ts = np.linspace(0, 0.3, 3001)
        series = run_kicked_scenario(coherent(4), [], SystemParams(0.0), ts)
        assert fit_collapse_time(ts, series.q1, 0.3) == pytest.approx(0.125, rel=0.05)

    def test_impulsive_convergence(self):
        ts = np.linspace(0, 3.6, 1801)
        lam = -0.5 * 0.02 * math.sqrt(math.pi)
        p = SystemParams(0.01)
        s0 = coherent(4, [lam])
        kicked = run_kicked_scenario(s0, [KickSpec(lam, 0.8)], p, ts)
        errs = []
        for sigma in (0.04, 0.02, 0.01):
            pulse = PulseSpec(-lam / (sigma * math.sqrt(math.pi)), sigma, 0.8)
            series = run_kicked_scenario(s0, [pulse], p, ts)
            errs.append(np.max(np.abs(series.q1 - kicked.q1)))
        assert errs[0] > errs[1] > errs[2]

    def test_sample_inside_pulse_does_not_perturb(self):
        p = SystemParams(0.01)
        pulse = PulseSpec(3.0, 0.02, 0.8)
        s0 = coherent(4, [pulse.kick_strength])
        sparse = run_kicked_scenario(s0, [pulse], p, [0.5, 1.5])
        dense = run_kicked_scenario(s0, [pulse], p, np.concatenate(([0.5], np.linspace(0.75, 0.85, 7), [1.5])))
        assert abs(sparse.q1[-1] - dense.q1[-1]) < 1e-12

    def test_kick_and_two_pulses(self):
        p = SystemParams(0.0)
        pulses = [KickSpec(0.1, 0.2), PulseSpec(1.0, 0.02, 0.6)]
        states = states_at(coherent(2, [0.1, 0.04]), pulses, p, [0.1, 0.3, 1.0])
        assert len(states) == 3
        assert all(abs(s.norm - 1) < 1e-9 for s in states)

    def test_overlapping_pulses_rejected(self):
        with pytest.raises(ValueError):
            sort_pulses([PulseSpec(1.0, 0.1, 0.5), PulseSpec(1.0, 0.1, 0.8)])

    def test_samples_must_increase(self):
        with pytest.raises(ValueError):
            run_kicked_scenario(coherent(1), [], SystemParams(0.0), [0.0, 0.2, 0.1])

    def test_timeseries_validates_lengths(self):
        with pytest.raises(ValueError):
            TimeSeries([0, 1], [0], [0, 0], [1, 1])
