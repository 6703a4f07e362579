"""
Truncated Fock-space states of a single bosonic mode.

States are stored as complex amplitude vectors indexed by the occupation
number n = 0..n_max.  Ladder operators are never materialised as dense
matrices for the hot paths; the sub/super-diagonal sqrt(n) couplings are
applied directly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln
from scipy.stats import poisson

from .errors import NumericalToleranceError, TruncationError, TruncationWarning

# tail mass allowed in the top five levels before a warning is issued
TOP_LEVEL_TAIL = 1e-10


@dataclass(frozen=True)
class Truncation:
    n_max: int
    tail_tolerance: float = 1e-12

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError(f"n_max must be a positive integer, got {self.n_max!r}")

    @property
    def dim(self) -> int:
        return self.n_max + 1


def recommended_n_max(alpha0: complex, kick_strengths=()) -> int:
    """Cutoff ``ceil(a^2 + 10 a + 20)`` with ``a = |alpha0| + sum |lambda|``."""
    a = abs(alpha0) + sum(abs(k) for k in kick_strengths)
    return int(math.ceil(a * a + 10.0 * a + 20.0))


@dataclass(frozen=True, eq=False)
class StateVector:
    amps: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amps, dtype=complex)
        if amps.ndim != 1 or amps.size < 2:
            raise ValueError("amps must be a 1-D array with at least two levels")
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    @property
    def n_max(self) -> int:
        return self.amps.size - 1

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def populations(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def tail_mass(self, top: int = 5) -> float:
        """Probability carried by the levels n > n_max - top."""
        return float(np.sum(self.populations()[-top:]))


def number_state(n: int, trunc: Truncation) -> StateVector:
    if not 0 <= n <= trunc.n_max:
        raise ValueError(f"level {n} outside 0..{trunc.n_max}")
    amps = np.zeros(trunc.dim, dtype=complex)
    amps[n] = 1.0
    return StateVector(amps)


def coherent_amplitudes(alpha0: complex, n_max: int) -> np.ndarray:
    """exp(-|a|^2/2) a^n / sqrt(n!) evaluated in log space (safe for n > 170)."""
    n = np.arange(n_max + 1)
    out = np.zeros(n_max + 1, dtype=complex)
    if alpha0 == 0:
        out[0] = 1.0
        return out
    r = abs(alpha0)
    phase = np.exp(1j * np.angle(alpha0) * n)
    out[:] = np.exp(n * math.log(r) - 0.5 * r * r - 0.5 * gammaln(n + 1)) * phase
    return out


def coherent_state(alpha0: complex, trunc: Truncation) -> StateVector:
    """Coherent state |alpha0> truncated at ``trunc.n_max``.

    The amplitudes are not renormalised, so the squared norm falls short of
    one by exactly the Poisson mass beyond the cutoff.  That mass must not
    exceed ``trunc.tail_tolerance``.
    """
    mean = abs(alpha0) ** 2
    lost = float(poisson.sf(trunc.n_max, mean)) if mean > 0 else 0.0
    if lost > trunc.tail_tolerance:
        raise TruncationError(
            f"n_max={trunc.n_max} drops Poisson mass {lost:.3e} for |alpha0|^2={mean:.4g}; "
            f"use at least {recommended_n_max(alpha0)}"
        )
    state = StateVector(coherent_amplitudes(alpha0, trunc.n_max))
    check_tail(state)
    return state


def check_tail(state: StateVector) -> float:
    tail = state.tail_mass()
    if tail > TOP_LEVEL_TAIL:
        warnings.warn(
            f"top five Fock levels carry probability {tail:.3e} (n_max={state.n_max})",
            TruncationWarning,
            stacklevel=3,
        )
    return tail


def ladder_couplings(n_max: int) -> np.ndarray:
    """sqrt(n) for n = 1..n_max: the matrix elements <n-1|a|n>."""
    return np.sqrt(np.arange(1, n_max + 1, dtype=float))


def annihilate(amps: np.ndarray) -> np.ndarray:
    s = ladder_couplings(amps.size - 1)
    out = np.zeros_like(amps)
    out[:-1] = s * amps[1:]
    return out


def create(amps: np.ndarray) -> np.ndarray:
    s = ladder_couplings(amps.size - 1)
    out = np.zeros_like(amps)
    out[1:] = s * amps[:-1]
    return out


def apply_x(amps: np.ndarray) -> np.ndarray:
    """(a + a^dagger) applied to an amplitude vector."""
    s = ladder_couplings(amps.size - 1)
    out = np.zeros_like(amps)
    out[:-1] = s * amps[1:]
    out[1:] += s * amps[:-1]
    return out


def annihilation_matrix(n_max: int) -> np.ndarray:
    return np.diag(ladder_couplings(n_max), 1)


def expect_q_moment(state: StateVector, power: int) -> float:
    """<q^power> with q = (a + a^dagger)/sqrt(2), for power 1 or 2."""
    if power not in (1, 2):
        raise ValueError("power must be 1 or 2")
    psi = state.amps
    x_psi = apply_x(psi)
    if power == 1:
        val = np.vdot(psi, x_psi) / math.sqrt(2.0)
    else:
        val = np.vdot(x_psi, x_psi) / 2.0
    if abs(val.imag) > 1e-8:
        raise NumericalToleranceError(f"<q^{power}> has imaginary part {val.imag:.3e}")
    return float(val.real)


def displacement_generator(beta: complex, n_max: int) -> np.ndarray:
    a = annihilation_matrix(n_max)
    return beta * a.T - np.conj(beta) * a


def displacement_operator(beta: complex, n_max: int) -> np.ndarray:
    return expm(displacement_generator(beta, n_max))


def apply_displacement(state: StateVector, beta: complex) -> StateVector:
    """D(beta)|psi> with D(beta) = exp(beta a^dagger - beta^* a).

    The truncated generator is exponentiated directly (Pade with scaling and
    squaring), so the result is unitary up to rounding whatever the cutoff;
    norm loss therefore only shows up through the truncation of the input.
    """
    out = displacement_operator(beta, state.n_max) @ state.amps
    drift = abs(np.linalg.norm(out) - state.norm)
    if drift > 1e-6:
        raise NumericalToleranceError(
            f"displacement by {beta} changed the norm by {drift:.3e}; increase n_max"
        )
    result = StateVector(out)
    check_tail(result)
    return result


def overlap(a: StateVector, b: StateVector) -> complex:
    """<a|b>."""
    if a.n_max != b.n_max:
        raise ValueError(f"dimension mismatch: n_max {a.n_max} vs {b.n_max}")
    return complex(np.vdot(a.amps, b.amps))


def fidelity(a: StateVector, b: StateVector) -> float:
    return abs(overlap(a, b))
