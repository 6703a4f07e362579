"""
Unitary dynamics of the kicked Kerr oscillator in the rotated, dimensionless
frame

    H = delta * n + n (n - 1) + E0 f(t) (a + a^dagger),

so that the Fock level energies are E_n = (delta - 1) n + n^2.

Between pulses the evolution is diagonal and applied exactly.  Inside a
pulse window the drive is integrated with RK4 in the interaction picture of
the diagonal part; the reference time of the interaction picture is reset at
the start of every step, so only two phase vectors (half and full step) are
ever needed and no stiff n^2 phase enters the integrator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

from .errors import NumericalToleranceError
from .fock import StateVector, apply_displacement, apply_x, check_tail, expect_q_moment

# Gaussian pulses are treated as exactly zero outside center +/- WINDOW_SIGMAS * sigma
WINDOW_SIGMAS = 5.0
# largest interaction-picture phase advance allowed per RK4 step (radians)
MAX_PHASE_PER_STEP = 0.1


@dataclass(frozen=True)
class SystemParams:
    delta: float

    def __post_init__(self):
        if not math.isfinite(self.delta):
            raise ValueError("delta must be finite")


@dataclass(frozen=True)
class PulseSpec:
    """Gaussian drive E0 exp(-(t - center)^2 / sigma^2)."""

    e0: float
    sigma: float
    center: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"pulse sigma must be positive, got {self.sigma}")

    def amplitude(self, t):
        return self.e0 * np.exp(-(((np.asarray(t) - self.center) / self.sigma) ** 2))

    @property
    def window(self) -> tuple[float, float]:
        half = WINDOW_SIGMAS * self.sigma
        return self.center - half, self.center + half

    @property
    def kick_strength(self) -> float:
        """lambda = -E0 * integral f dt = -E0 sigma sqrt(pi)."""
        return -self.e0 * self.sigma * math.sqrt(math.pi)

    def to_kick(self) -> "KickSpec":
        return KickSpec(self.kick_strength, self.center)


@dataclass(frozen=True)
class KickSpec:
    """Impulsive kick D(i*lam) applied at ``center``."""

    lam: float
    center: float

    def __post_init__(self):
        if not math.isfinite(self.lam):
            raise ValueError("kick strength must be finite")

    @property
    def beta(self) -> complex:
        return 1j * self.lam

    @property
    def window(self) -> tuple[float, float]:
        return self.center, self.center

    @property
    def kick_strength(self) -> float:
        return self.lam


Pulse = Union[PulseSpec, KickSpec]


@dataclass
class TimeSeries:
    times: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    norm_or_trace: np.ndarray
    extra: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        n = self.times.size
        for name in ("q1", "q2", "norm_or_trace"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise ValueError(f"{name} has shape {arr.shape}, expected ({n},)")
            setattr(self, name, arr)
        if n > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self):
        return self.times.size

    def observable(self, name: str) -> np.ndarray:
        if name in ("q1", "q2", "norm_or_trace"):
            return getattr(self, name)
        return np.asarray(self.extra[name])

    def window(self, t0: float, t1: float) -> "TimeSeries":
        sel = (self.times >= t0) & (self.times <= t1)
        extra = {k: np.asarray(v)[sel] for k, v in self.extra.items()}
        return TimeSeries(self.times[sel], self.q1[sel], self.q2[sel],
                          self.norm_or_trace[sel], extra, dict(self.meta))


def energy_level(n: int, params: SystemParams) -> float:
    if n < 0:
        raise ValueError("n must be non-negative")
    return (params.delta - 1.0) * n + n * n


def energies(n_max: int, params: SystemParams) -> np.ndarray:
    n = np.arange(n_max + 1, dtype=float)
    return (params.delta - 1.0) * n + n * n


def free_propagate(state: StateVector, duration: float, params: SystemParams) -> StateVector:
    if duration < 0:
        raise ValueError("duration must be non-negative")
    if duration == 0:
        return state
    phases = np.exp(-1j * energies(state.n_max, params) * duration)
    return StateVector(state.amps * phases)


def default_dt(pulse: PulseSpec, t0: float, t1: float, n_max: int | None = None,
               params: SystemParams | None = None) -> float:
    """min(sigma/50, window/200), further capped so that no interaction-picture
    coupling rotates by more than MAX_PHASE_PER_STEP per step."""
    dt = min(pulse.sigma / 50.0, (t1 - t0) / 200.0)
    if n_max is not None:
        delta = params.delta if params is not None else 0.0
        top = abs(delta) + 2.0 * n_max
        dt = min(dt, MAX_PHASE_PER_STEP / top)
    return dt


def step_grid(t0: float, t1: float, dt: float) -> tuple[int, float]:
    """Number of equal steps covering [t0, t1] with step <= dt."""
    n = max(1, int(math.ceil((t1 - t0) / dt - 1e-9)))
    return n, (t1 - t0) / n


class _DrivenStepper:
    """RK4 step for psi' = -i E0 f(t) (a + a^dagger) psi in the interaction
    picture of the diagonal Hamiltonian, with the picture reset every step."""

    def __init__(self, pulse: PulseSpec, energies_: np.ndarray, h: float):
        self.pulse = pulse
        self.energies = energies_
        self.h = h
        self._half = np.exp(-1j * energies_ * (h / 2))
        self._full = self._half * self._half

    def _rhs(self, t, v, phase):
        # phase = exp(-i E s); interaction picture: e^{iEs} X e^{-iEs}
        if phase is None:
            return -1j * self.pulse.amplitude(t) * apply_x(v)
        return -1j * self.pulse.amplitude(t) * np.conj(phase) * apply_x(phase * v)

    def step(self, psi: np.ndarray, t: float, h: float | None = None) -> np.ndarray:
        if h is None or h == self.h:
            h, half, full = self.h, self._half, self._full
        else:
            half = np.exp(-1j * self.energies * (h / 2))
            full = half * half
        k1 = self._rhs(t, psi, None)
        k2 = self._rhs(t + h / 2, psi + (h / 2) * k1, half)
        k3 = self._rhs(t + h / 2, psi + (h / 2) * k2, half)
        k4 = self._rhs(t + h, psi + h * k3, full)
        return full * (psi + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4))


def _check_norm(before: float, after: float, span: float, where: str):
    drift = abs(after - before)
    if drift > 1e-6:
        raise NumericalToleranceError(
            f"norm drift {drift:.3e} over {span:.4g} time units in {where}; "
            "reduce dt or raise n_max"
        )


def propagate_driven(state: StateVector, pulse: PulseSpec, t0: float, t1: float,
                     params: SystemParams, dt: float | None = None) -> StateVector:
    """Integrate the driven Schroedinger equation from t0 to t1."""
    if not t1 > t0:
        raise ValueError("need t0 < t1")
    if dt is None:
        dt = default_dt(pulse, t0, t1, state.n_max, params)
    if dt <= 0:
        raise ValueError("dt must be positive")
    n_steps, h = step_grid(t0, t1, dt)
    stepper = _DrivenStepper(pulse, energies(state.n_max, params), h)
    psi = np.array(state.amps)
    for k in range(n_steps):
        psi = stepper.step(psi, t0 + k * h)
    _check_norm(state.norm, float(np.linalg.norm(psi)), t1 - t0, "propagate_driven")
    return StateVector(psi)


# -- schedules ---------------------------------------------------------------

def sort_pulses(pulses: Iterable[Pulse]) -> list[Pulse]:
    """Sort by window start and reject overlapping windows."""
    ordered = sorted(pulses, key=lambda p: p.window[0])
    for prev, nxt in zip(ordered, ordered[1:]):
        if nxt.window[0] < prev.window[1] or (
            isinstance(prev, KickSpec) and isinstance(nxt, KickSpec) and prev.center == nxt.center
        ):
            raise ValueError(f"pulse windows overlap: {prev} and {nxt}")
    return ordered


def schedule_start(pulses: Sequence[Pulse], sample_times) -> float:
    """Time of the initial state: 0, or earlier if a sample or pulse window is."""
    t = min(0.0, float(np.asarray(sample_times)[0]))
    for p in pulses:
        t = min(t, p.window[0])
    return t


def _validate_samples(sample_times) -> np.ndarray:
    ts = np.asarray(sample_times, dtype=float)
    if ts.ndim != 1 or ts.size == 0:
        raise ValueError("sample_times must be a non-empty 1-D sequence")
    if ts.size > 1 and np.any(np.diff(ts) <= 0):
        raise ValueError("sample_times must be strictly increasing")
    return ts


def iter_states(initial: StateVector, pulses: Sequence[Pulse], params: SystemParams,
                sample_times, dt: float | None = None,
                t_initial: float | None = None) -> Iterator[tuple[float, StateVector]]:
    """Yield (t, state) at every sample time.

    ``initial`` is the state at ``t_initial`` (default: t = 0, moved earlier
    if the first sample or pulse window starts before 0).  Sampling never
    perturbs the main trajectory: samples inside a pulse window are reached
    by a partial step from the last grid point.
    """
    ts = _validate_samples(sample_times)
    pulses = sort_pulses(pulses)
    t_cur = schedule_start(pulses, ts) if t_initial is None else float(t_initial)
    if ts[0] < t_cur or any(p.window[0] < t_cur for p in pulses):
        raise ValueError("samples and pulses must not precede the initial time")
    state = initial
    i = 0

    def flush_free(t_end):
        nonlocal i
        while i < ts.size and ts[i] < t_end:
            yield ts[i], free_propagate(state, ts[i] - t_cur, params)
            i += 1

    for pulse in pulses:
        a, b = pulse.window
        yield from flush_free(a)
        state = free_propagate(state, a - t_cur, params)
        t_cur = a
        if isinstance(pulse, KickSpec):
            state = apply_displacement(state, pulse.beta)
            continue
        step_dt = dt if dt is not None else default_dt(pulse, a, b, state.n_max, params)
        n_steps, h = step_grid(a, b, step_dt)
        stepper = _DrivenStepper(pulse, energies(state.n_max, params), h)
        psi = np.array(state.amps)
        norm0 = state.norm
        for k in range(n_steps):
            tk = a + k * h
            t_next = b if k == n_steps - 1 else tk + h
            while i < ts.size and ts[i] < t_next:
                frac = ts[i] - tk
                out = psi if frac == 0 else stepper.step(psi, tk, frac)
                yield ts[i], StateVector(out)
                i += 1
            psi = stepper.step(psi, tk)
        _check_norm(norm0, float(np.linalg.norm(psi)), b - a, f"pulse at t={pulse.center}")
        state = StateVector(psi)
        check_tail(state)
        t_cur = b
    yield from flush_free(math.inf)


def run_kicked_scenario(initial: StateVector, pulses: Sequence[Pulse], params: SystemParams,
                        sample_times, dt: float | None = None,
                        t_initial: float | None = None) -> TimeSeries:
    """Record <q>, <q^2> and the norm at every sample time."""
    ts = _validate_samples(sample_times)
    q1 = np.empty(ts.size)
    q2 = np.empty(ts.size)
    norms = np.empty(ts.size)
    for k, (_, psi) in enumerate(iter_states(initial, pulses, params, ts, dt, t_initial)):
        q1[k] = expect_q_moment(psi, 1)
        q2[k] = expect_q_moment(psi, 2)
        norms[k] = psi.norm
    return TimeSeries(ts, q1, q2, norms,
                      meta={"n_max": initial.n_max, "delta": params.delta})


def states_at(initial: StateVector, pulses: Sequence[Pulse], params: SystemParams,
              times, dt: float | None = None, t_initial: float | None = None) -> list[StateVector]:
    return [psi for _, psi in iter_states(initial, pulses, params, times, dt, t_initial)]
