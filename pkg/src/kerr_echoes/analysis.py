"""
Post-processing: Husimi Q-distribution, echo detection and classification,
series comparison and a few fitting helpers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.ndimage import maximum_filter1d, median_filter
from scipy.signal import find_peaks
from scipy.stats import gamma as gamma_dist

from .classical import PhaseGrid
from .dynamics import TimeSeries
from .fock import StateVector

T_REV = math.pi

KINDS = ("kick_response", "classical_echo", "quantum_echo", "revival", "fractional", "unclassified")


# -- Husimi ------------------------------------------------------------------

def recommended_husimi_extent(populations: np.ndarray, tail: float = 1e-10) -> float:
    """Half-width R of a square (q, p) grid that contains the Q-function.

    A Fock level n spreads |alpha|^2 over a Gamma(n+1) law, so the grid must
    reach the upper ``tail`` quantile of that law for n_hi, the highest
    level with population above ``tail``.
    """
    occupied = np.nonzero(populations > tail)[0]
    n_hi = int(occupied[-1]) if occupied.size else 0
    a2 = float(gamma_dist.isf(tail, n_hi + 1))
    return math.sqrt(2.0 * a2)


def _coherent_rows(alpha: np.ndarray, n_max: int) -> np.ndarray:
    """<n|alpha> for every alpha (rows) and n = 0..n_max (columns), by recursion."""
    out = np.empty((alpha.size, n_max + 1), dtype=complex)
    out[:, 0] = np.exp(-0.5 * np.abs(alpha) ** 2)
    for n in range(1, n_max + 1):
        out[:, n] = out[:, n - 1] * alpha / math.sqrt(n)
    return out


def husimi_q(state, q_range=None, p_range=None, resolution: int = 161, t: float = 0.0) -> PhaseGrid:
    """Q(q, p) = <alpha|rho|alpha> / pi at alpha = (q + i p)/sqrt(2).

    ``state`` is a StateVector, a DensityMatrix (anything with ``elements``)
    or a raw vector/matrix.  Values are sampled at cell centres, so
    ``sum(Q) * dq * dp / 2`` is the normalisation check (d^2 alpha = dq dp / 2).
    The returned grid's ``density`` is Q/2, i.e. a density in (q, p) with unit
    mass, and ``meta['q_values']`` holds Q itself.
    """
    if isinstance(state, StateVector):
        vec, rho = state.amps, None
    elif hasattr(state, "elements"):
        vec, rho = None, np.asarray(state.elements)
    else:
        arr = np.asarray(state)
        vec, rho = (arr, None) if arr.ndim == 1 else (None, arr)
    n_max = (vec.size if vec is not None else rho.shape[0]) - 1
    if q_range is None or p_range is None:
        pops = np.abs(vec) ** 2 if vec is not None else np.real(np.diag(rho))
        r = recommended_husimi_extent(pops)
        q_range = q_range or (-r, r)
        p_range = p_range or (-r, r)
    qe = np.linspace(q_range[0], q_range[1], resolution + 1)
    pe = np.linspace(p_range[0], p_range[1], resolution + 1)
    qc = 0.5 * (qe[1:] + qe[:-1])
    pc = 0.5 * (pe[1:] + pe[:-1])
    Qg, Pg = np.meshgrid(qc, pc, indexing="ij")
    alpha = ((Qg + 1j * Pg) / math.sqrt(2.0)).ravel()
    values = np.empty(alpha.size)
    chunk = 4096
    for start in range(0, alpha.size, chunk):
        rows = _coherent_rows(alpha[start:start + chunk], n_max)
        if vec is not None:
            amp = np.conj(rows) @ vec
            values[start:start + chunk] = np.abs(amp) ** 2
        else:
            values[start:start + chunk] = np.real(np.einsum("pm,mn,pn->p", np.conj(rows), rho, rows))
    q_vals = values.reshape(Qg.shape) / math.pi
    grid = PhaseGrid(qe, pe, q_vals / 2.0, t)
    mass = grid.mass()
    grid.meta.update({"q_values": q_vals, "normalization": mass,
                      "coverage_ok": mass >= 0.999, "min_value": float(q_vals.min())})
    return grid


def angular_contrast(grid: PhaseGrid, radius: float, half_width: float = 2.0, n_angle: int = 36) -> float:
    """(max - min) / (max + min) of the angular density inside an annulus.

    Mass of each cell is assigned to the angular bin of its centre.  A
    synchronised set of bunches concentrates the annulus mass at one angle,
    which raises the contrast.
    """
    Qg, Pg = np.meshgrid(grid.q_centers, grid.p_centers, indexing="ij")
    r = np.hypot(Qg, Pg)
    sel = np.abs(r - radius) <= half_width
    mass = (grid.density * grid.cell_area)[sel]
    ang = np.arctan2(Pg[sel], Qg[sel])
    hist, _ = np.histogram(ang, bins=n_angle, range=(-math.pi, math.pi), weights=mass)
    lo, hi = hist.min(), hist.max()
    return float((hi - lo) / (hi + lo)) if hi + lo > 0 else 0.0


# -- echo detection ----------------------------------------------------------

@dataclass
class EchoEvent:
    time: float
    amplitude: float
    kind: str
    order: Fraction | None
    predicted_time: float | None
    label: str = ""

    @property
    def error(self) -> float:
        return math.inf if self.predicted_time is None else abs(self.time - self.predicted_time)


@dataclass
class EchoReport:
    events: list[EchoEvent]
    tau: float | None
    t_rev: float = T_REV
    collapse_time: float = 0.0
    observable: str = "q1"
    meta: dict = field(default_factory=dict)

    def of_kind(self, kind: str) -> list[EchoEvent]:
        return [e for e in self.events if e.kind == kind]

    def near(self, t: float, window: float) -> list[EchoEvent]:
        return [e for e in self.events if abs(e.time - t) <= window]

    def find(self, kind: str, order=None) -> EchoEvent | None:
        hits = [e for e in self.events if e.kind == kind and (order is None or e.order == Fraction(order))]
        return max(hits, key=lambda e: e.amplitude) if hits else None


@dataclass(frozen=True)
class Candidate:
    time: float
    kind: str
    order: Fraction | None
    label: str


def candidate_times(tau: float | None, t_min: float, t_max: float, observable: str = "q1",
                    max_order: int = 3) -> list[Candidate]:
    """Predicted response times inside [t_min, t_max]."""
    out: list[Candidate] = []
    k_max = int(math.ceil(t_max / T_REV)) + 1
    for k in range(0, k_max + 1):
        out.append(Candidate(k * T_REV, "revival", Fraction(k), f"{k}T_rev"))
    if tau is not None:
        for k in range(0, k_max + 1):
            base = k * T_REV
            out.append(Candidate(base + tau, "kick_response", Fraction(1), f"{k}T_rev+tau" if k else "tau"))
            for l in range(1, max_order + 1):
                out.append(Candidate(base + (l + 1) * tau, "classical_echo", Fraction(l),
                                     f"{k}T_rev+{l + 1}tau" if k else f"{l + 1}tau"))
                if k >= 1:
                    out.append(Candidate(base - l * tau, "quantum_echo", Fraction(l), f"{k}T_rev-{l}tau"))
        if observable == "q2":
            # <q^2> contains <a^2>, which revives every T_rev/2
            for k in range(1, 2 * k_max + 2, 2):
                half = k * T_REV / 2
                out.append(Candidate(half, "revival", Fraction(k, 2), f"{k}T_rev/2"))
                out.append(Candidate(half - tau, "quantum_echo", Fraction(1), f"{k}T_rev/2-tau"))
                out.append(Candidate(half + tau, "kick_response", Fraction(1), f"{k}T_rev/2+tau"))
            for k in range(1, 2 * k_max + 2):
                half = k * T_REV / 2
                out.append(Candidate(half - tau / 2, "fractional", Fraction(1, 2), f"{k}T_rev/2-tau/2"))
                out.append(Candidate(half + tau / 2, "fractional", Fraction(1, 2), f"{k}T_rev/2+tau/2"))
            out.append(Candidate(1.5 * tau, "fractional", Fraction(3, 2), "3tau/2"))
    seen = set()
    uniq = []
    for c in out:
        key = (round(c.time, 12), c.kind)
        if t_min - 1e-12 <= c.time <= t_max + 1e-12 and key not in seen and \
                (tau is None or c.kind == "revival" or c.time >= tau - 1e-12):
            seen.add(key)
            uniq.append(c)
    return sorted(uniq, key=lambda c: c.time)


def _odd(n: int) -> int:
    return n if n % 2 else n + 1


def signal_envelope(times: np.ndarray, signal: np.ndarray, collapse_time: float,
                    baseline_window: float = T_REV / 4):
    """(envelope, baseline): sliding max of |signal - baseline| over 3 t_c,
    baseline = running median over ``baseline_window``."""
    dt = float(np.median(np.diff(times)))
    base_n = _odd(max(3, int(round(baseline_window / dt))))
    baseline = median_filter(signal, size=base_n, mode="reflect")
    env_n = _odd(max(3, int(round(3 * collapse_time / dt))))
    envelope = maximum_filter1d(np.abs(signal - baseline), size=env_n, mode="nearest")
    return envelope, baseline


def _centroid(times, weight, t_start, half, iterations=8):
    """Centroid of ``weight`` in a window of half-width ``half``, re-centred
    until it stops moving."""
    if t_start - half < times[0] or t_start + half > times[-1]:
        # packet cut by the series edge: a centroid would be biased inward
        sel = np.flatnonzero(np.abs(times - t_start) <= half)
        return float(times[sel[np.argmax(weight[sel])]])
    t = t_start
    for _ in range(iterations):
        sel = np.abs(times - t) <= half
        w = weight[sel]
        total = np.sum(w)
        if total <= 0:
            return t
        t_new = float(np.sum(w * times[sel]) / total)
        if abs(t_new - t) < 1e-9:
            return t_new
        t = t_new
    return t


def detect_echoes(series: TimeSeries, tau: float | None, alpha0: float, observable: str = "q1",
                  rel_threshold: float = 0.05, rel_prominence: float = 0.1, noise_sigmas: float = 5.0,
                  max_order: int = 3, match_window: float | None = None) -> EchoReport:
    """Find pulsed responses in ``series`` and attribute them to predicted times.

    The envelope is the sliding maximum of |signal - baseline| over three
    dephasing times (t_c for ``q1``; t_c/2 for ``q2``, whose <a^2> part
    dephases twice as fast).  An envelope peak becomes an event when its
    height exceeds ``rel_threshold`` times the largest envelope value found
    more than 4.5 dephasing times away from the revivals (3 t_d plus the
    half-width of the sliding window), its prominence is at least
    ``rel_prominence`` of its own height, and, for Monte Carlo series carrying
    ``q1_sem`` or ``q2_sem``, its height exceeds ``noise_sigmas`` median
    standard errors.

    Event times are centroids of the squared deviation over +/- 2.5 dephasing
    times, or the largest deviation for packets cut by the series edge.  Each
    is matched to the nearest candidate within max(0.03, t_c).  Kick responses
    are one-sided, so a peak whose onset (first crossing of 10% of the peak,
    or of three standard errors if larger, after the preceding envelope
    valley) matches a kick time, and whose centroid lies within 2.5 dephasing
    times after that kick, is classified and timed by its onset.  An
    otherwise unmatched onset may still match a revival.
    ``tau=None`` describes an unkicked series: only revivals are candidates.
    """
    if observable not in ("q1", "q2"):
        raise ValueError("observable must be 'q1' or 'q2'")
    if tau is not None and not math.isfinite(tau):
        raise ValueError("kick time must be finite")
    alpha0 = abs(alpha0)
    if alpha0 <= 0:
        raise ValueError("alpha0 must be non-zero to define the collapse time")
    t_c = 1.0 / (2.0 * alpha0)
    t_d = t_c if observable == "q1" else t_c / 2
    times = series.times
    if times.size < 8:
        raise ValueError("series too short for echo detection")
    dt = float(np.median(np.diff(times)))
    if dt > t_c / 20.0:
        raise ValueError(f"series undersampled: dt={dt:.4g} > t_c/20={t_c / 20:.4g}")
    signal = series.observable(observable)
    envelope, baseline = signal_envelope(times, signal, t_d)

    period = T_REV / 2 if observable == "q2" else T_REV
    phase = np.mod(times + period / 2, period) - period / 2
    away = np.abs(phase) > 4.5 * t_d
    ref = float(envelope[away].max()) if np.any(away) else float(envelope.max())
    threshold = rel_threshold * ref
    sem_key = f"{observable}_sem"
    noise = None
    if sem_key in series.extra:
        noise = float(np.median(series.extra[sem_key]))
        threshold = max(threshold, noise_sigmas * noise)

    padded = np.concatenate(([0.0], envelope, [0.0]))
    peaks, props = find_peaks(padded, height=threshold, prominence=0.0)
    keep = props["prominences"] >= rel_prominence * props["peak_heights"]
    peaks = peaks[keep] - 1
    window = match_window if match_window is not None else max(0.03, t_c)
    cands = candidate_times(tau, times[0] - window, times[-1] + window, observable, max_order)
    dev2 = (signal - baseline) ** 2

    dev = np.sqrt(dev2)

    def onset(i, amp):
        # search forward from the envelope valley preceding the peak
        lo = int(np.searchsorted(times, times[i] - 6 * t_d))
        seg_env = envelope[lo:i + 1]
        lo += int(np.flatnonzero(seg_env == seg_env.min())[-1])
        level = max(0.1 * amp, 3 * noise) if noise is not None else 0.1 * amp
        seg = np.nonzero(dev[lo:i + 1] >= level)[0]
        return float(times[lo + seg[0]]) if seg.size else float(times[i])

    raw = [(_centroid(times, dev2, float(times[i]), 2.5 * t_d), float(envelope[i]), i) for i in peaks]

    def nearest(t_ev, kinds=None):
        best, err = None, window
        for j, c in enumerate(cands):
            if (kinds is None or c.kind in kinds) and abs(c.time - t_ev) <= err:
                best, err = j, abs(c.time - t_ev)
        return best

    events: list[EchoEvent] = []
    claimed: dict[int, int] = {}
    for t_ev, amp, i in raw:
        # a response that starts at a kick is one-sided; time it by its onset
        t_on = onset(i, amp)
        best = nearest(t_on, ("kick_response",))
        if best is not None and 0.0 <= t_ev - cands[best].time <= 2.5 * t_d:
            t_ev = t_on
        else:
            best = nearest(t_ev)
        if best is None:
            best = nearest(t_on, ("revival",))
            if best is not None:
                t_ev = t_on
        if best is None:
            events.append(EchoEvent(t_ev, amp, "unclassified", None, None))
            continue
        c = cands[best]
        ev = EchoEvent(t_ev, amp, c.kind, c.order, c.time, c.label)
        if best in claimed:
            other = events[claimed[best]]
            if other.error <= ev.error:
                events.append(EchoEvent(t_ev, amp, "unclassified", None, None))
                continue
            events[claimed[best]] = EchoEvent(other.time, other.amplitude, "unclassified", None, None)
        claimed[best] = len(events)
        events.append(ev)
    events.sort(key=lambda e: e.time)
    return EchoReport(events, tau, T_REV, t_c, observable,
                      meta={"threshold": threshold, "reference": ref, "noise": noise,
                            "match_window": window})


# -- comparison and fits -----------------------------------------------------

def compare_series(a: TimeSeries, b: TimeSeries, observable: str = "q1",
                   windows: dict | None = None) -> dict:
    """L-infinity and RMS differences of ``observable`` on a's time grid.

    ``b`` is linearly interpolated onto ``a.times`` where the ranges overlap.
    ``windows`` maps labels to (t0, t1); for each, the ratio of the peak
    |a| to the peak |b| inside the window is reported.
    """
    lo = max(a.times[0], b.times[0])
    hi = min(a.times[-1], b.times[-1])
    if hi < lo:
        raise ValueError("time ranges are disjoint")
    sel = (a.times >= lo) & (a.times <= hi)
    t = a.times[sel]
    va = a.observable(observable)[sel]
    vb = np.interp(t, b.times, b.observable(observable))
    diff = va - vb
    out = {
        "linf": float(np.max(np.abs(diff))),
        "l2": float(np.sqrt(np.mean(diff ** 2))),
        "n_points": int(t.size),
        "window_ratios": {},
    }
    for label, (w0, w1) in (windows or {}).items():
        m = (t >= w0) & (t <= w1)
        if not np.any(m):
            continue
        pb = np.max(np.abs(vb[m]))
        out["window_ratios"][label] = float(np.max(np.abs(va[m])) / pb) if pb > 0 else math.inf
    return out


def fit_collapse_time(times, values, t_max: float) -> float:
    """Fit exp(-t^2 / (2 t_c^2)) to the local maxima of |values| on [0, t_max].

    Least squares of log|peak| against t^2 (with the t = 0 sample included
    when it is itself the largest value).
    """
    times = np.asarray(times, dtype=float)
    mag = np.abs(np.asarray(values, dtype=float))
    sel = (times >= 0) & (times <= t_max)
    t, m = times[sel], mag[sel]
    idx, _ = find_peaks(m)
    if m.size and m[0] >= m[1:].max(initial=0):
        idx = np.concatenate(([0], idx))
    if idx.size < 3:
        raise ValueError("not enough oscillation maxima to fit a collapse envelope")
    slope, _ = np.polyfit(t[idx] ** 2, np.log(m[idx]), 1)
    if slope >= 0:
        raise ValueError("envelope is not decaying")
    return float(math.sqrt(-1.0 / (2.0 * slope)))


def fit_loglog_slope(x, y) -> float:
    slope, _ = np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)
    return float(slope)


def echo_amplitude(series: TimeSeries, t_center: float, half_width: float, observable: str = "q1",
                   reference: TimeSeries | None = None) -> float:
    """Peak |observable - reference| in [t_center - half_width, t_center + half_width]."""
    sig = series.observable(observable)
    if reference is not None:
        sig = sig - np.interp(series.times, reference.times, reference.observable(observable))
    sel = np.abs(series.times - t_center) <= half_width
    if not np.any(sel):
        raise ValueError(f"no samples near t={t_center}")
    return float(np.max(np.abs(sig[sel])))
