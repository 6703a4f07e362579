"""
Monte Carlo ensemble of classical Kerr oscillators.

    H = delta/2 (q^2 + p^2) + (q^2 + p^2)^2 / 4 + sqrt(2) E0 f(t) q

    dq/dt =  (delta + r^2) p
    dp/dt = -(delta + r^2) q - sqrt(2) E0 f(t)

Without drive every particle rotates clockwise at the radius-dependent rate
delta + r^2, which is what filaments the phase-space distribution.  Drive-free
segments use that exact rotation by default (``free_flow="exact"``); RK4 is
used inside pulse windows and, on request, for the free flow too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dynamics import KickSpec, Pulse, SystemParams, TimeSeries, sort_pulses, step_grid
from .errors import NumericalToleranceError

SIGMA_QP = 1.0 / math.sqrt(2.0)
DEFAULT_DT = 1e-4


@dataclass
class Ensemble:
    q: np.ndarray
    p: np.ndarray
    seed: int | None = None
    t: float = 0.0

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        if self.q.shape != self.p.shape or self.q.ndim != 1 or self.q.size < 1:
            raise ValueError("q and p must be equal-length 1-D arrays with N >= 1")

    def __len__(self):
        return self.q.size

    def copy(self) -> "Ensemble":
        return Ensemble(self.q.copy(), self.p.copy(), self.seed, self.t)


@dataclass
class PhaseGrid:
    """Density on a rectangular (q, p) grid; ``density[i, j]`` belongs to the
    cell [q_edges[i], q_edges[i+1]) x [p_edges[j], p_edges[j+1])."""

    q_edges: np.ndarray
    p_edges: np.ndarray
    density: np.ndarray
    t: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def q_centers(self) -> np.ndarray:
        return 0.5 * (self.q_edges[1:] + self.q_edges[:-1])

    @property
    def p_centers(self) -> np.ndarray:
        return 0.5 * (self.p_edges[1:] + self.p_edges[:-1])

    @property
    def cell_area(self) -> np.ndarray:
        return np.outer(np.diff(self.q_edges), np.diff(self.p_edges))

    def mass(self) -> float:
        return float(np.sum(self.density * self.cell_area))


def sample_initial_ensemble(alpha0: float, n_particles: int, seed: int) -> Ensemble:
    """Gaussian cloud centred at (sqrt(2) alpha0, 0) with sigma_q = sigma_p = 1/sqrt(2).

    Uses numpy's PCG64 generator; normal variates come from its ziggurat
    transform of uniform draws.
    """
    if n_particles < 1:
        raise ValueError("n_particles must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    q = math.sqrt(2.0) * alpha0 + SIGMA_QP * rng.standard_normal(n_particles)
    p = SIGMA_QP * rng.standard_normal(n_particles)
    return Ensemble(q, p, seed, 0.0)


def energy(q, p, params: SystemParams):
    r2 = np.asarray(q) ** 2 + np.asarray(p) ** 2
    return 0.5 * params.delta * r2 + 0.25 * r2 * r2


def _rk4_step(q, p, t, h, delta, drive):
    def f(q, p, t):
        w = delta + q * q + p * p
        dq = w * p
        dp = -w * q
        if drive is not None:
            dp = dp - math.sqrt(2.0) * float(drive(t))
        return dq, dp

    k1q, k1p = f(q, p, t)
    k2q, k2p = f(q + 0.5 * h * k1q, p + 0.5 * h * k1p, t + 0.5 * h)
    k3q, k3p = f(q + 0.5 * h * k2q, p + 0.5 * h * k2p, t + 0.5 * h)
    k4q, k4p = f(q + h * k3q, p + h * k3p, t + h)
    return (q + (h / 6) * (k1q + 2 * k2q + 2 * k3q + k4q),
            p + (h / 6) * (k1p + 2 * k2p + 2 * k3p + k4p))


def _rotate(q, p, duration, delta):
    ang = (delta + q * q + p * p) * duration
    c, s = np.cos(ang), np.sin(ang)
    return q * c + p * s, p * c - q * s


def _check_finite(q, p, t):
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
        raise NumericalToleranceError(f"non-finite particle coordinates at t={t:.6g}; reduce dt")


def _segments(pulses: Sequence[Pulse], t_start: float, t_end: float):
    """Split [t_start, t_end] into ('free'|'pulse'|'kick', a, b, pulse) pieces."""
    out = []
    t = t_start
    for pulse in pulses:
        a, b = pulse.window
        if a > t:
            out.append(("free", t, a, None))
        if isinstance(pulse, KickSpec):
            out.append(("kick", a, a, pulse))
        else:
            out.append(("pulse", a, b, pulse))
        t = b
    if t_end > t:
        out.append(("free", t, t_end, None))
    return out


def evolve_ensemble(ens: Ensemble, pulses: Sequence[Pulse], params: SystemParams, sample_times,
                    dt: float = DEFAULT_DT, snapshot_times=(), free_flow: str = "exact"):
    """Integrate every particle from ``ens.t`` and record ensemble moments.

    Returns ``(series, snapshots)``: ``series.q1``/``q2`` hold the ensemble
    means of q and q^2, ``series.extra['q1_sem']``/``['q2_sem']`` the standard errors
    of those means, ``norm_or_trace`` the fraction of finite particles.
    ``snapshots`` maps each requested snapshot time to an Ensemble copy.

    Sampling never perturbs the main trajectory: a sample inside a pulse
    window is reached by a partial step from the last grid point.
    """
    ts = np.asarray(sample_times, dtype=float)
    if ts.ndim != 1 or ts.size == 0 or np.any(np.diff(ts) <= 0):
        raise ValueError("sample_times must be a non-empty increasing sequence")
    snaps = sorted(float(s) for s in snapshot_times)
    events = sorted([(t, 0, i) for i, t in enumerate(ts)] + [(t, 1, i) for i, t in enumerate(snaps)])
    pulses = sort_pulses(pulses)
    t0 = float(ens.t)
    if events[0][0] < t0 or any(pl.window[0] < t0 for pl in pulses):
        raise ValueError(f"samples and pulses must not precede the ensemble time {t0}")

    if dt <= 0:
        raise ValueError("dt must be positive")
    if free_flow not in ("exact", "rk4"):
        raise ValueError("free_flow must be 'exact' or 'rk4'")
    q, p = ens.q.copy(), ens.p.copy()
    n = q.size
    q1, q2, sem, sem2, frac = (np.empty(ts.size) for _ in range(5))
    snapshots = {}

    def record(kind, idx, qs, ps, t):
        if kind == 0:
            q1[idx] = np.mean(qs)
            q2[idx] = np.mean(qs * qs)
            sem[idx] = np.std(qs, ddof=1) / math.sqrt(n) if n > 1 else 0.0
            sem2[idx] = np.std(qs * qs, ddof=1) / math.sqrt(n) if n > 1 else 0.0
            frac[idx] = np.count_nonzero(np.isfinite(qs) & np.isfinite(ps)) / n
        else:
            snapshots[snaps[idx]] = Ensemble(qs.copy(), ps.copy(), ens.seed, t)

    ev = 0
    # overflow is caught by _check_finite and reported as a tolerance error
    with np.errstate(over="ignore", invalid="ignore"):
        for kind, a, b, pulse in _segments(pulses, t0, events[-1][0]):
            if kind == "pulse" or (kind == "free" and free_flow == "rk4"):
                drive = pulse.amplitude if kind == "pulse" else None
                nsteps, h = step_grid(a, b, dt)
                for s in range(nsteps):
                    tk = a + s * h
                    t_next = b if s == nsteps - 1 else tk + h
                    while ev < len(events) and events[ev][0] < t_next:
                        te, k, i = events[ev]
                        if te == tk:
                            record(k, i, q, p, te)
                        else:
                            record(k, i, *_rk4_step(q, p, tk, te - tk, params.delta, drive), te)
                        ev += 1
                    q, p = _rk4_step(q, p, tk, h, params.delta, drive)
                _check_finite(q, p, b)
                continue
            # exact free rotation over [a, b], or a kick at a == b
            while ev < len(events) and events[ev][0] < b:
                te, k, i = events[ev]
                record(k, i, *_rotate(q, p, te - a, params.delta), te)
                ev += 1
            q, p = _rotate(q, p, b - a, params.delta)
            if kind == "kick":
                p = p + math.sqrt(2.0) * pulse.lam
    while ev < len(events):
        te, k, i = events[ev]
        record(k, i, q, p, te)
        ev += 1

    series = TimeSeries(ts, q1, q2, frac, extra={"q1_sem": sem, "q2_sem": sem2},
                        meta={"n_particles": n, "seed": ens.seed, "dt": dt, "free_flow": free_flow})
    return series, snapshots


def phase_space_histogram(ens: Ensemble, q_range, p_range, bins: int) -> PhaseGrid:
    """Normalised 2-D density of the particles (mass 1 over the in-range particles)."""
    if bins < 2:
        raise ValueError("bins must be >= 2")
    counts, qe, pe = np.histogram2d(ens.q, ens.p, bins=bins, range=[q_range, p_range])
    total = counts.sum()
    area = np.outer(np.diff(qe), np.diff(pe))
    density = counts / (total * area) if total > 0 else counts
    return PhaseGrid(qe, pe, density, ens.t,
                     meta={"n_in_range": int(total), "n_particles": len(ens)})
