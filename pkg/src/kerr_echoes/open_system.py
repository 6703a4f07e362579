"""
Damped Kerr oscillator: the reduced density matrix S obeys

    dS/dt = -i[H, S] + gamma nbar [[a, S], a^dagger]
            + gamma/2 (2 a S a^dagger - a^dagger a S - S a^dagger a)

with H = diag(E_n) + E0 f(t) (a + a^dagger).  Integration is RK4 in the
interaction picture of diag(E_n), reset at every step, so the stiff diagonal
phases are applied exactly and only the drive and the dissipator are stepped.
Every operator acting on S is a shifted slice, so a right-hand side costs
O(n_max^2).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

from .dynamics import (KickSpec, Pulse, PulseSpec, SystemParams, TimeSeries, energies,
                       schedule_start, sort_pulses, step_grid, _validate_samples)
from .errors import NumericalToleranceError, TruncationError, TruncationWarning
from .fock import StateVector, Truncation, coherent_state

DT_PULSE = 1e-4
DT_FREE = 5e-4
TRACE_TOL = 1e-6
HERMITICITY_TOL = 1e-8
POSITIVITY_FLOOR = -1e-8
THERMAL_TAIL_TOL = 1e-10


@dataclass(frozen=True)
class BathParams:
    """Damping constant and bath occupation; give exactly one of nbar, epsilon."""

    gamma: float
    nbar: float | None = None
    epsilon: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma >= 0):
            raise ValueError("gamma must be finite and >= 0")
        if (self.nbar is None) == (self.epsilon is None):
            raise ValueError("give exactly one of nbar and epsilon")
        if self.nbar is not None and not (math.isfinite(self.nbar) and self.nbar >= 0):
            raise ValueError("nbar must be finite and >= 0")
        if self.epsilon is not None and not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValueError("epsilon must be finite and > 0")

    @property
    def n_thermal(self) -> float:
        if self.nbar is not None:
            return float(self.nbar)
        return 1.0 / math.expm1(self.epsilon)


@dataclass
class DensityMatrix:
    elements: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        el = np.asarray(self.elements, dtype=complex)
        if el.ndim != 2 or el.shape[0] != el.shape[1] or el.shape[0] < 2:
            raise ValueError("density matrix must be square with dimension >= 2")
        self.elements = el

    @property
    def n_max(self) -> int:
        return self.elements.shape[0] - 1

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.elements))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.elements - self.elements.conj().T)))

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.elements + self.elements.conj().T)
        return float(np.linalg.eigvalsh(herm)[0])

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.elements)).copy()

    @classmethod
    def pure(cls, state: StateVector) -> "DensityMatrix":
        v = state.amps
        return cls(np.outer(v, np.conj(v)))


def thermal_populations(nbar: float, n_max: int) -> np.ndarray:
    n = np.arange(n_max + 1)
    if nbar == 0:
        return (n == 0).astype(float)
    r = nbar / (1.0 + nbar)
    return np.exp(n * math.log(r)) / (1.0 + nbar)


def thermal_state(bath: BathParams, trunc: Truncation) -> DensityMatrix:
    """Bose-Einstein mixture P_n = nbar^n / (1 + nbar)^(n+1), renormalised
    after truncation; the discarded mass is kept in ``meta['tail_mass']``."""
    nbar = bath.n_thermal
    pops = thermal_populations(nbar, trunc.n_max)
    tail = (nbar / (1.0 + nbar)) ** (trunc.n_max + 1) if nbar > 0 else 0.0
    if tail > THERMAL_TAIL_TOL:
        raise TruncationError(
            f"thermal tail mass {tail:.3g} beyond n_max={trunc.n_max} exceeds {THERMAL_TAIL_TOL:g}")
    pops = pops / pops.sum()
    return DensityMatrix(np.diag(pops).astype(complex), meta={"tail_mass": tail, "nbar": nbar})


def coherent_density(alpha0: complex, trunc: Truncation) -> DensityMatrix:
    return DensityMatrix.pure(coherent_state(alpha0, trunc))


def recommended_thermal_n_max(nbar: float, kick_strengths=(), tail: float = THERMAL_TAIL_TOL) -> int:
    """Basis size for a thermal state displaced by the listed kicks.

    The thermal radius sqrt((nbar + 1/2) ln(1/tail)) is shifted outward by
    the total kick strength; 10 levels of headroom are added.
    """
    r = sum(abs(k) for k in kick_strengths) + math.sqrt((nbar + 0.5) * math.log(1.0 / tail))
    return int(math.ceil(r * r)) + 10


# -- right-hand side ---------------------------------------------------------

# Kernels work on padded (N+1) x (N+1) arrays whose last row and column are
# zero, so the ladder shifts need no boundary tests (index -1 wraps onto the
# zero padding as well).

@numba.njit(cache=True, fastmath=True)
def _apply_l1(S, drive, gamma, nbar, sq, cn, p, out):
    """out = Phi o (drive term + dissipator)[S], Phi[m, n] = p_m conj(p_n).

    ``sq[k] = sqrt(k)``; ``cn[n]`` is the diagonal of a a^dagger in the
    truncated basis.  The diagonal Hamiltonian is excluded.
    """
    N = S.shape[0] - 1
    g1 = gamma * nbar
    g2 = 0.5 * gamma
    mdrive = -1j * drive
    for m in range(N):
        sm = sq[m]
        sm1 = sq[m + 1]
        pm = p[m]
        row, row_up, row_dn = S[m], S[m + 1], S[m - 1]
        orow = out[m]
        for n in range(N):
            s_mn = row[n]
            up = row_up[n + 1] * (sm1 * sq[n + 1])
            down = row_dn[n - 1] * (sm * sq[n])
            acc = (g1 + gamma) * up + g1 * down - (g1 * (cn[n] + m) + g2 * (m + n)) * s_mn
            xs = sm1 * row_up[n] + sm * row_dn[n] - row[n + 1] * sq[n + 1] - row[n - 1] * sq[n]
            orow[n] = (acc + mdrive * xs) * (pm * p[n].conjugate())


@numba.njit(cache=True, fastmath=True)
def _shifted(rho, k, c, p, tmp):
    """tmp = conj(Phi) o (rho + c k) on the unpadded block."""
    N = rho.shape[0] - 1
    for m in range(N):
        cpm = p[m].conjugate()
        for n in range(N):
            tmp[m, n] = (rho[m, n] + c * k[m, n]) * (cpm * p[n])


@numba.njit(cache=True, fastmath=True)
def _rk4(rho, h, d0, dh, d1, p_half, p_full, gamma, nbar, sq, cn, ones, k1, k2, k3, k4, tmp):
    """One RK4 step in the interaction picture anchored at the step start."""
    N = rho.shape[0] - 1
    _apply_l1(rho, d0, gamma, nbar, sq, cn, ones, k1)
    _shifted(rho, k1, 0.5 * h, p_half, tmp)
    _apply_l1(tmp, dh, gamma, nbar, sq, cn, p_half, k2)
    _shifted(rho, k2, 0.5 * h, p_half, tmp)
    _apply_l1(tmp, dh, gamma, nbar, sq, cn, p_half, k3)
    _shifted(rho, k3, h, p_full, tmp)
    _apply_l1(tmp, d1, gamma, nbar, sq, cn, p_full, k4)
    out = np.zeros_like(rho)
    c = h / 6.0
    for m in range(N):
        cpm = p_full[m].conjugate()
        for n in range(N):
            v = rho[m, n] + c * (k1[m, n] + 2.0 * k2[m, n] + 2.0 * k3[m, n] + k4[m, n])
            out[m, n] = v * (cpm * p_full[n])
    return out


def _pad(rho: np.ndarray) -> np.ndarray:
    n = rho.shape[0]
    out = np.zeros((n + 1, n + 1), dtype=complex)
    out[:n, :n] = rho
    return out


def _aa_dagger_diag(n: int) -> np.ndarray:
    cn = np.arange(1.0, n + 1.0)
    cn[-1] = 0.0
    return np.append(cn, 0.0)


def _x_times(S: np.ndarray) -> np.ndarray:
    s = np.sqrt(np.arange(1, S.shape[0]))
    out = np.zeros_like(S)
    out[:-1] += s[:, None] * S[1:]
    out[1:] += s[:, None] * S[:-1]
    return out


def lindblad_rhs(S: DensityMatrix | np.ndarray, drive: float, params: SystemParams,
                 bath: BathParams) -> np.ndarray:
    """dS/dt for instantaneous drive amplitude E0 f(t)."""
    rho = np.ascontiguousarray(S.elements if isinstance(S, DensityMatrix) else S, dtype=complex)
    n = rho.shape[0]
    out = np.zeros((n + 1, n + 1), dtype=complex)
    _apply_l1(_pad(rho), float(drive), float(bath.gamma), float(bath.n_thermal),
              np.sqrt(np.arange(n + 2.0)), _aa_dagger_diag(n), np.ones(n + 1, dtype=complex), out)
    out = out[:n, :n]
    e = energies(rho.shape[0] - 1, params)
    return out - 1j * (e[:, None] - e[None, :]) * rho


def expect_q(rho: np.ndarray) -> tuple[float, float]:
    """(<q>, <q^2>) with q = (a + a^dagger)/sqrt(2)."""
    xs = _x_times(rho)
    q1 = np.real(np.trace(xs)) / math.sqrt(2.0)
    q2 = np.real(np.trace(_x_times(xs))) / 2.0
    return float(q1), float(q2)


# -- propagation -------------------------------------------------------------

class _Integrator:
    """Steps padded density matrices (see ``_pad``)."""

    def __init__(self, e: np.ndarray, gamma: float, nbar: float):
        self.e = np.append(e, 0.0)
        self.gamma = gamma
        self.nbar = nbar
        n = e.size
        self.ones = np.ones(n + 1, dtype=complex)
        self.sq = np.sqrt(np.arange(n + 2.0))
        self.cn = _aa_dagger_diag(n)
        self.buf = [np.zeros((n + 1, n + 1), dtype=complex) for _ in range(5)]
        self._cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def phases(self, h: float):
        hit = self._cache.get(h)
        if hit is None:
            half = np.exp(1j * self.e * (h / 2))
            hit = (half, half * half)
            if len(self._cache) < 8:
                self._cache[h] = hit
        return hit

    def step(self, rho, t, h, drive_fn):
        p_half, p_full = self.phases(h)
        if drive_fn is None:
            d0 = dh = d1 = 0.0
        else:
            d0, dh, d1 = (float(drive_fn(x)) for x in (t, t + h / 2, t + h))
        return _rk4(rho, h, d0, dh, d1, p_half, p_full, self.gamma, self.nbar,
                    self.sq, self.cn, self.ones, *self.buf)

    def rotate(self, rho, duration):
        p = np.exp(-1j * self.e * duration)
        return rho * p[:, None] * np.conj(p)[None, :]


def _tail(rho: np.ndarray, top: int = 5) -> float:
    return float(np.sum(np.real(np.diag(rho))[-top:]))


def propagate_lindblad(S0: DensityMatrix, pulses: Sequence[Pulse], params: SystemParams,
                       bath: BathParams, sample_times, dt: float | None = None,
                       dt_free: float | None = None, t_initial: float | None = None,
                       positivity_stride: int = 1, check_every: int = 200) -> TimeSeries:
    """Integrate the master equation from ``t_initial`` and sample <q>, <q^2>, Tr S.

    ``dt`` applies inside pulse windows (default 1e-4) and ``dt_free``
    between them (default 5e-4).  Undamped drive-free gaps are rotated
    exactly.  The trace is never renormalised: drift beyond 1e-6 or an
    anti-Hermitian part beyond 1e-8 raises NumericalToleranceError.  The
    smallest eigenvalue is checked at every ``positivity_stride``-th sample
    (0 disables the check).  ``extra`` carries the Hermiticity error and the
    top-5-level population at each sample.
    """
    ts = _validate_samples(sample_times)
    pulses = sort_pulses(pulses)
    for pl in pulses:
        if isinstance(pl, KickSpec):
            raise ValueError("density-matrix propagation needs finite-width pulses, not ideal kicks")
    dt = DT_PULSE if dt is None else dt
    dt_free = DT_FREE if dt_free is None else dt_free
    if dt <= 0 or dt_free <= 0:
        raise ValueError("dt must be positive")
    t0 = schedule_start(pulses, ts) if t_initial is None else float(t_initial)
    if ts[0] < t0 or any(pl.window[0] < t0 for pl in pulses):
        raise ValueError("samples and pulses must not precede the initial time")

    rho = _pad(S0.elements)
    n_max = S0.n_max
    integ = _Integrator(energies(n_max, params), float(bath.gamma), float(bath.n_thermal))
    tr0 = complex(np.trace(rho)).real
    herm0 = S0.hermiticity_error()

    q1, q2, tr, herm, tail = (np.empty(ts.size) for _ in range(5))
    min_eig = np.full(ts.size, np.nan)
    state = {"idx": 0, "steps": 0}

    def monitor(r, t):
        r = r[:-1, :-1]
        trace_err = abs(complex(np.trace(r)).real - tr0) + abs(complex(np.trace(r)).imag)
        h_err = float(np.max(np.abs(r - r.conj().T)))
        if trace_err > TRACE_TOL:
            raise NumericalToleranceError(f"trace drift {trace_err:.3g} at t={t:.6g} exceeds {TRACE_TOL:g}")
        if h_err - herm0 > HERMITICITY_TOL:
            raise NumericalToleranceError(
                f"Hermiticity drift {h_err:.3g} at t={t:.6g} exceeds {HERMITICITY_TOL:g}")
        return h_err

    def record(r, t):
        i = state["idx"]
        herm[i] = monitor(r, t)
        r = r[:-1, :-1]
        q1[i], q2[i] = expect_q(r)
        tr[i] = complex(np.trace(r)).real
        tail[i] = _tail(r)
        if positivity_stride and i % positivity_stride == 0:
            herm_part = 0.5 * (r + r.conj().T)
            min_eig[i] = float(np.linalg.eigvalsh(herm_part)[0])
            if min_eig[i] < POSITIVITY_FLOOR:
                raise NumericalToleranceError(
                    f"density matrix eigenvalue {min_eig[i]:.3g} at t={t:.6g} below {POSITIVITY_FLOOR:g}")
        state["idx"] = i + 1

    def stepped(r, a, b, h_max, drive_fn):
        nsteps, h = step_grid(a, b, h_max)
        for s in range(nsteps):
            tk = a + s * h
            t_next = b if s == nsteps - 1 else tk + h
            while state["idx"] < ts.size and ts[state["idx"]] < t_next:
                te = ts[state["idx"]]
                record(r if te == tk else integ.step(r, tk, te - tk, drive_fn), te)
            r = integ.step(r, tk, h, drive_fn)
            state["steps"] += 1
            if state["steps"] % check_every == 0:
                monitor(r, t_next)
        return r

    def free(r, a, b):
        if b <= a:
            return r
        if bath.gamma == 0:
            while state["idx"] < ts.size and ts[state["idx"]] < b:
                te = ts[state["idx"]]
                record(integ.rotate(r, te - a), te)
            return integ.rotate(r, b - a)
        return stepped(r, a, b, dt_free, None)

    t = t0
    t_end = float(ts[-1])
    for pl in pulses:
        a, b = pl.window
        if a >= t_end:
            break
        b = min(b, t_end)
        rho = free(rho, t, a)
        rho = stepped(rho, a, b, dt, pl.amplitude)
        t = b
    rho = free(rho, t, t_end)
    while state["idx"] < ts.size:
        record(rho, t_end)
    if np.max(tail) > 1e-10:
        warnings.warn(f"top Fock levels reached population {np.max(tail):.3g}; increase n_max",
                      TruncationWarning, stacklevel=2)
    return TimeSeries(ts, q1, q2, tr, extra={"hermiticity": herm, "tail_mass": tail, "min_eig": min_eig},
                      meta={"n_max": n_max, "dt": dt, "dt_free": dt_free, "gamma": bath.gamma,
                            "nbar": bath.n_thermal, "delta": params.delta, "t_initial": t0,
                            "final_state": DensityMatrix(rho[:-1, :-1])})
