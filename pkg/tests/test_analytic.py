import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kerr_echoes.analytic import (PerturbationContext, coefficient_set, packet_terms, q_first_order,
                                  q_free, q_kicked_piecewise, q_near_revival, q_second_order, z_of)
from kerr_echoes.dynamics import PulseSpec, SystemParams, run_kicked_scenario
from kerr_echoes.fock import Truncation, coherent_state, recommended_n_max

FIG2 = PerturbationContext(6.0, 0.01, 0.5, -3 * 0.01 * math.sqrt(math.pi))
FIG3A = PerturbationContext(4.0, 0.01, 0.8, -0.5 * 0.02 * math.sqrt(math.pi))

contexts = st.builds(PerturbationContext, st.floats(1, 6), st.floats(-0.1, 0.1),
                     st.floats(0, 1.5), st.floats(-0.1, 0.1))


def envelope_peak(t, values):
    return float(t[np.argmax(np.abs(values))])


class TestFree:
    def test_at_zero(self):
        assert q_free(0.0, 4, 0.0) == pytest.approx(4 * math.sqrt(2), abs=1e-12)

    def test_half_revival(self):
        assert q_free(math.pi / 2, 4, 0.0) == pytest.approx(math.sqrt(2) * 4 * math.exp(-32), rel=1e-6)

    @given(st.floats(0, 10), st.floats(0.5, 5))
    def test_periodic(self, t, a):
        assert q_free(t + math.pi, a, 0.0) == pytest.approx(float(q_free(t, a, 0.0)), abs=1e-9)

    @pytest.mark.parametrize("a0", [1.0, 2.0, 4.0, 6.0])
    def test_matches_fock_sum(self, a0):
        n_max = max(int(4 * a0 * a0), recommended_n_max(a0))
        ts = np.linspace(0, math.pi, 1000)
        series = run_kicked_scenario(coherent_state(a0, Truncation(n_max)), [], SystemParams(0.0), ts)
        assert np.max(np.abs(series.q1 - q_free(ts, a0, 0.0))) < 1e-10

    def test_complex_amplitude(self):
        a0 = 2 * np.exp(0.4j)
        ts = np.linspace(0, 1, 50)
        series = run_kicked_scenario(coherent_state(a0, Truncation(60)), [], SystemParams(0.02), ts)
        assert np.max(np.abs(series.q1 - q_free(ts, a0, 0.02))) < 1e-10


class TestNearRevival:
    def test_center(self):
        assert q_near_revival(0.0, 4, 0.0) == pytest.approx(4 * math.sqrt(2))

    def test_envelope_width(self):
        t = 1 / (math.sqrt(2) * 4)  # 0.1768, where 2 |alpha0|^2 t^2 = 1
        ratio = q_near_revival(t, 4, 0.0) / (math.sqrt(2) * 4 * math.cos(2 * t * 16))
        assert ratio == pytest.approx(math.exp(-1), rel=1e-12)

    def test_close_to_closed_form(self):
        t = np.linspace(-0.05, 0.05, 501)
        exact = q_free(t, 4, 0.0)
        assert np.max(np.abs(q_near_revival(t, 4, 0.0) - exact)) < 0.05 * np.max(np.abs(exact))

    def test_detuning_sign(self):
        # the Delta t phase must follow the closed form, not its conjugate
        t = np.linspace(-0.05, 0.05, 501)
        exact = q_free(t, 4, 0.5)
        good = np.max(np.abs(q_near_revival(t, 4, 0.5) - exact))
        flipped = np.max(np.abs(q_near_revival(t, 4, -0.5) - exact))
        assert good < flipped


class TestCoefficients:
    def test_unkicked(self):
        ctx = PerturbationContext(4.0, 0.01, 0.7, 0.0)
        cs = coefficient_set(np.array([1.0]), ctx)
        z = np.array([0.3 + 0.4j, 2.0])
        for table in (cs.g, cs.h, cs.w):
            for f in table.values():
                assert np.all(f(z) == 0)

    def test_a0_independent_of_tau(self):
        t = np.linspace(0, 3, 7)
        a = coefficient_set(t, PerturbationContext(2.0, 0.1, 0.3, 0.1)).A[0]
        b = coefficient_set(t, PerturbationContext(2.0, 0.1, 1.9, 0.1)).A[0]
        assert np.allclose(a, b, atol=0, rtol=1e-15)
        assert np.allclose(a, 2.0 * math.exp(-4.0) * np.exp(-0.1j * t))

    def test_first_order_polynomials(self):
        cs = coefficient_set(np.array([0.0]), PerturbationContext(1.0, 0.0, 0.5, 0.1))
        assert cs.g[-1](1.0) == pytest.approx(0.2j)
        assert cs.h[-1](1.0) == pytest.approx(-0.1j)

    @given(st.complex_numbers(max_magnitude=50), st.floats(-1, 1))
    def test_constant_polynomials(self, z, lam):
        cs = coefficient_set(np.array([0.0]), PerturbationContext(1.0, 0.0, 0.5, lam))
        assert cs.g[1](z) == 1j * lam
        assert cs.h[1](z) == -1j * lam
        assert cs.w[1, 1](z) == lam * lam

    def test_complex_alpha_rejected(self):
        with pytest.raises(ValueError):
            PerturbationContext(1 + 1j, 0.0, 0.5, 0.1)

    def test_negative_tau_rejected(self):
        with pytest.raises(ValueError):
            PerturbationContext(1.0, 0.0, -0.5, 0.1)


class TestPerturbative:
    def test_unkicked_first_order_is_free(self):
        ctx = PerturbationContext(4.0, 0.01, 0.8, 0.0)
        t = np.linspace(0.8, 4, 400)
        exact = q_free(t, 4.0, 0.01)
        assert np.max(np.abs(q_first_order(t, ctx) - exact)) < 1e-14 * np.max(np.abs(exact))

    @given(contexts, st.floats(0, 7))
    def test_second_order_truncates_to_first(self, ctx, dt):
        t = np.array([ctx.tau + dt])
        terms = packet_terms(t, ctx, order=2)
        first = sum(v for k, v in terms.items() if k in ("free", "j=-1", "j=+1"))
        assert np.array_equal(first, q_first_order(t, ctx))

    @given(contexts.filter(lambda c: abs(c.lam) >= 1e-3))
    def test_second_order_correction_is_quadratic(self, ctx):
        # smaller kicks put the lam^2 part below the rounding of the sums
        t = np.linspace(ctx.tau, ctx.tau + 4, 800)
        half = PerturbationContext(ctx.alpha0, ctx.delta, ctx.tau, ctx.lam / 2)
        full = np.max(np.abs(q_second_order(t, ctx) - q_first_order(t, ctx)))
        small = np.max(np.abs(q_second_order(t, half) - q_first_order(t, half)))
        if full > 1e-250:
            assert full / small == pytest.approx(4.0, rel=0.1)

    @given(contexts, st.integers(-2, 2), st.floats(0, 7))
    def test_packet_envelopes_periodic(self, ctx, j, t):
        a2 = ctx.alpha0 ** 2
        e1 = abs(np.exp(z_of(t + j * ctx.tau, a2)))
        e2 = abs(np.exp(z_of(t + math.pi + j * ctx.tau, a2)))
        assert e1 == pytest.approx(e2, rel=1e-9)

    @pytest.mark.parametrize("j", [-2, -1, 1, 2])
    def test_packet_envelopes_peak_at_multiples_of_pi(self, j):
        a2 = FIG2.alpha0 ** 2
        t = np.linspace(0, 4, 40001)
        env = np.abs(np.exp(z_of(t + j * FIG2.tau, a2)))
        peak = t[np.argmax(env)]
        assert math.remainder(peak + j * FIG2.tau, math.pi) == pytest.approx(0, abs=1e-4)

    def test_fig3a_quantum_echo_position(self):
        t = np.linspace(0.8, 3.6, 28001)
        term = packet_terms(t, FIG3A, order=1)["j=+1"]
        assert envelope_peak(t, term) == pytest.approx(math.pi - 0.8, abs=0.03)

    def test_fig3a_against_numerics(self):
        ts = np.linspace(0, math.pi, 1571)
        pulse = PulseSpec(0.5, 0.02, 0.8)
        n_max = recommended_n_max(4.0, [pulse.kick_strength])
        series = run_kicked_scenario(coherent_state(4.0, Truncation(n_max)), [pulse], SystemParams(0.01), ts)
        diff = np.abs(q_kicked_piecewise(ts, FIG3A, 1) - series.q1)
        assert np.max(diff) <= 0.05 * np.max(np.abs(series.q1))

    def test_fig2_second_order_packets(self):
        t = np.linspace(0.5, 3.5, 30001)
        terms = packet_terms(t, FIG2, order=2)
        # kick response and classical echo are one-sided or skewed: judge by the
        # envelope of exp(z(t + j tau)), which the prefactors only modulate
        env_m2 = np.abs(np.exp(z_of(t - 2 * FIG2.tau, 36.0)))
        env_p2 = np.abs(np.exp(z_of(t + 2 * FIG2.tau, 36.0)))
        assert t[np.argmax(env_m2)] == pytest.approx(1.0, abs=1e-3)
        assert t[np.argmax(env_p2 * (t < 3))] == pytest.approx(math.pi - 1.0, abs=1e-3)
        assert envelope_peak(t, terms["j=+2"]) == pytest.approx(math.pi - 1.0, abs=0.03)
        assert envelope_peak(t, terms["j=-2"]) == pytest.approx(1.0, abs=0.05)

    def test_printed_diagonal_only_changes_the_j0_term(self):
        t = np.linspace(0.5, 3.5, 301)
        a = packet_terms(t, FIG2, 2)
        b = packet_terms(t, FIG2, 2, printed_diagonal=True)
        for key in a:
            if key == "lam2:j=0":
                assert not np.allclose(a[key], b[key])
            else:
                assert np.array_equal(a[key], b[key])

    def test_piecewise_switches_at_tau(self):
        t = np.array([0.79, 0.81])
        out = q_kicked_piecewise(t, FIG3A, 1)
        assert out[0] == q_free(0.79, 4.0, 0.01)
        assert out[1] == q_first_order(0.81, FIG3A)

    def test_order_checked(self):
        with pytest.raises(ValueError):
            packet_terms(np.array([1.0]), FIG2, order=3)
