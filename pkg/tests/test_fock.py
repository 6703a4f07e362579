import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import poisson

from conftest import expect_p
from kerr_echoes.errors import NumericalToleranceError, TruncationError, TruncationWarning
from kerr_echoes.fock import (Truncation, annihilate, apply_displacement,
                              coherent_state, create, expect_q_moment, fidelity, number_state,
                              overlap, recommended_n_max)


def mean_n(state):
    return float(np.sum(np.arange(state.n_max + 1) * state.populations()))


class TestCoherentState:
    def test_vacuum(self):
        s = coherent_state(0, Truncation(10))
        assert s.amps[0] == 1
        assert np.all(s.amps[1:] == 0)

    def test_mean_occupation(self):
        s = coherent_state(4, Truncation(80))
        assert abs(mean_n(s) - 16.0) < 1e-10

    def test_poisson_level_36(self):
        s = coherent_state(6, Truncation(120))
        assert abs(s.populations()[36] - poisson.pmf(36, 36.0)) < 1e-14

    def test_large_amplitude_has_no_overflow(self):
        a = 15.0
        s = coherent_state(a, Truncation(recommended_n_max(a)))
        assert np.all(np.isfinite(s.amps))
        assert abs(s.norm - 1) < 1e-12

    def test_complex_phase(self):
        a = 2 * np.exp(0.7j)
        s = coherent_state(a, Truncation(60))
        n = np.arange(61)
        assert np.allclose(np.angle(s.amps[1:5]), np.angle(np.exp(0.7j * n[1:5])))

    def test_short_cutoff_rejected(self):
        with pytest.raises(TruncationError):
            coherent_state(6, Truncation(30))

    def test_truncation_must_be_positive(self):
        with pytest.raises(ValueError):
            Truncation(0)

    @given(st.floats(0.0, 6.0))
    def test_poissonian_occupation(self, a):
        trunc = Truncation(recommended_n_max(a))
        s = coherent_state(a, trunc)
        n = np.arange(trunc.n_max - 9)
        assert np.max(np.abs(s.populations()[n] - poisson.pmf(n, a * a))) < 1e-12

    @given(st.floats(0.0, 8.0))
    def test_recommended_cutoff_tail(self, a):
        s = coherent_state(a, Truncation(recommended_n_max(a)))
        assert s.tail_mass() < 1e-10


class TestMoments:
    def test_q_of_coherent(self):
        s = coherent_state(4, Truncation(80))
        assert expect_q_moment(s, 1) == pytest.approx(4 * math.sqrt(2), abs=1e-10)

    def test_vacuum_variance(self):
        s = number_state(0, Truncation(5))
        assert expect_q_moment(s, 2) == pytest.approx(0.5, abs=1e-14)

    def test_complex_amplitude(self):
        s = coherent_state(2 + 1j, Truncation(50))
        assert expect_q_moment(s, 1) == pytest.approx(2 * math.sqrt(2), abs=1e-10)

    def test_coherent_second_moment(self):
        # <q^2> = 2 Re(a)^2 + 1/2
        a = 1.5 - 0.5j
        s = coherent_state(a, Truncation(60))
        assert expect_q_moment(s, 2) == pytest.approx(2 * a.real ** 2 + 0.5, abs=1e-10)

    def test_power_checked(self):
        with pytest.raises(ValueError):
            expect_q_moment(number_state(0, Truncation(3)), 3)


class TestLadder:
    @given(st.integers(0, 38))
    def test_create_then_annihilate(self, n):
        v = number_state(n, Truncation(40)).amps
        out = annihilate(create(v))
        expected = np.zeros(41)
        expected[n] = n + 1
        # sqrt(n) * sqrt(n) is exact up to one rounding
        assert np.allclose(out, expected, rtol=4e-16, atol=0)

    @given(st.integers(0, 40))
    def test_number_operator(self, n):
        v = number_state(n, Truncation(40)).amps
        out = create(annihilate(v))
        expected = np.zeros(41)
        expected[n] = n
        assert np.allclose(out, expected, rtol=4e-16, atol=0)


class TestDisplacement:
    def test_vacuum_to_coherent(self):
        lam = -0.7
        trunc = Truncation(40)
        out = apply_displacement(number_state(0, trunc), 1j * lam)
        assert fidelity(out, coherent_state(1j * lam, trunc)) > 1 - 1e-9

    def test_shift_rule_with_phase(self):
        a, b = 1.2 + 0.3j, -0.4 + 0.8j
        trunc = Truncation(60)
        out = apply_displacement(coherent_state(a, trunc), b)
        ov = overlap(coherent_state(a + b, trunc), out)
        phase = np.exp((b * np.conj(a) - np.conj(b) * a) / 2)
        assert abs(abs(ov) - 1) < 1e-8
        assert abs(ov - phase) < 1e-8

    def test_fig2_kick_moves_momentum(self):
        lam = -0.0532
        s = coherent_state(6, Truncation(120))
        out = apply_displacement(s, 1j * lam)
        assert abs(expect_q_moment(out, 1) - expect_q_moment(s, 1)) < 1e-4
        assert expect_p(out.amps) - expect_p(s.amps) == pytest.approx(math.sqrt(2) * lam, abs=1e-10)

    @given(st.floats(0, 3), st.floats(0, 1), st.floats(0, 2 * math.pi))
    def test_unitary(self, a, r, phi):
        beta = r * np.exp(1j * phi)
        trunc = Truncation(recommended_n_max(a, [r]))
        s = coherent_state(a, trunc)
        out = apply_displacement(s, beta)
        assert abs(out.norm - s.norm) < 1e-9

    def test_small_cutoff_stays_unitary(self):
        s = number_state(9, Truncation(10))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            out = apply_displacement(s, 3.0)
        assert abs(out.norm - 1) < 1e-9

    def test_tail_warning(self):
        s = number_state(2, Truncation(6))
        with pytest.warns(TruncationWarning):
            apply_displacement(s, 1.5)


class TestOverlap:
    def test_self(self):
        s = coherent_state(1.3, Truncation(40))
        assert overlap(s, s) == pytest.approx(1, abs=1e-12)

    def test_orthonormal(self):
        t = Truncation(4)
        assert overlap(number_state(0, t), number_state(1, t)) == 0

    def test_coherent_overlap(self):
        t = Truncation(60)
        ov = overlap(coherent_state(2, t), coherent_state(3, t))
        assert abs(ov) == pytest.approx(math.exp(-0.5), abs=1e-10)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            overlap(number_state(0, Truncation(3)), number_state(0, Truncation(4)))


def test_norm_check_error_type():
    assert issubclass(TruncationError, NumericalToleranceError)
