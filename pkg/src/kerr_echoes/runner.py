"""
Execute a validated scenario and write its CSV artifacts.

Every file starts with '#' lines holding the tool version, the full scenario
as canonical JSON and the numerical settings actually used; numbers are
written with 17 significant digits.  Nothing time- or host-dependent goes
into a file, so identical scenarios give byte-identical output.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (EchoReport, angular_contrast, detect_echoes, echo_amplitude,
                       fit_loglog_slope, husimi_q)
from .analytic import PerturbationContext, q_free, q_kicked_piecewise
from .classical import evolve_ensemble, phase_space_histogram, sample_initial_ensemble
from .config import CoherentCfg, GaussianCfg, ScenarioConfig
from .dynamics import KickSpec, PulseSpec, SystemParams, TimeSeries, run_kicked_scenario, states_at
from .fock import Truncation, coherent_state, recommended_n_max
from .open_system import (BathParams, coherent_density, propagate_lindblad,
                          recommended_thermal_n_max, thermal_state)

TOOL = "kerr-echoes"


@dataclass
class RunResult:
    files: list[Path] = field(default_factory=list)
    series: dict[str, TimeSeries] = field(default_factory=dict)
    reports: dict[str, EchoReport] = field(default_factory=dict)
    tables: dict[str, dict] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)


# -- formatting --------------------------------------------------------------

def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path: Path, columns: dict, header: dict) -> Path:
    names = list(columns)
    cols = [list(columns[n]) for n in names]
    lengths = {len(c) for c in cols}
    if len(lengths) > 1:
        raise ValueError(f"ragged columns for {path.name}")
    lines = [f"# {k}: {fmt(v) if not isinstance(v, str) else v}" for k, v in header.items()]
    lines.append(",".join(names))
    for row in zip(*cols):
        lines.append(",".join(fmt(v) for v in row))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


# -- scenario building ---------------------------------------------------------

def build_pulses(cfg: ScenarioConfig):
    out = []
    for p in cfg.pulses:
        if isinstance(p, GaussianCfg):
            out.append(PulseSpec(p.e0, p.sigma, p.center))
        else:
            out.append(KickSpec(p.lam, p.center))
    return out


def _kick_strengths(pulses):
    return [p.kick_strength for p in pulses]


def _sample_times(cfg: ScenarioConfig) -> np.ndarray:
    s = cfg.sampling
    return np.linspace(s.t_start, s.t_end, s.n_samples)


def _coherent_n_max(cfg: ScenarioConfig, pulses) -> int:
    if cfg.numerics.n_max is not None:
        return cfg.numerics.n_max
    return recommended_n_max(cfg.initial.alpha0, _kick_strengths(pulses))


def _echo_kick_index(cfg: ScenarioConfig) -> int | None:
    if not cfg.pulses:
        return None
    return cfg.analysis.echo_kick if cfg.analysis.echo_kick is not None else len(cfg.pulses) - 1


def _detection_alpha(cfg: ScenarioConfig, pulses) -> float:
    """Amplitude setting the collapse time used by echo detection."""
    if isinstance(cfg.initial, CoherentCfg):
        return abs(cfg.initial.alpha0)
    bath = BathParams(0.0, nbar=cfg.initial.nbar, epsilon=cfg.initial.epsilon)
    k = _echo_kick_index(cfg)
    prep = pulses[:k] if k is not None else []
    return math.sqrt(bath.n_thermal + sum(p.kick_strength ** 2 for p in prep))


def _base_header(cfg: ScenarioConfig, **extra) -> dict:
    head = {
        "tool": f"{TOOL} {__version__}",
        "mode": cfg.mode,
        "config": json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":")),
    }
    head.update(extra)
    return head


def _series_columns(series: TimeSeries, overlays: dict | None = None) -> dict:
    cols = {"t": series.times, "q1": series.q1, "q2": series.q2,
            "norm_or_trace": series.norm_or_trace}
    for key in sorted(series.extra):
        cols[key] = series.extra[key]
    for key, val in (overlays or {}).items():
        cols[key] = val
    return cols


def _report_columns(report: EchoReport) -> dict:
    ev = report.events
    return {
        "time": [e.time for e in ev],
        "predicted_time": [e.predicted_time for e in ev],
        "amplitude": [e.amplitude for e in ev],
        "kind": [e.kind for e in ev],
        "order": [e.order for e in ev],
        "label": [e.label for e in ev],
    }


class _Writer:
    def __init__(self, cfg: ScenarioConfig, result: RunResult):
        self.cfg = cfg
        self.result = result
        self.prefix = cfg.outputs.prefix

    def path(self, suffix: str) -> Path:
        return Path(f"{self.prefix}_{suffix}.csv")

    def series(self, name: str, series: TimeSeries, header: dict, overlays=None):
        self.result.series[name] = series
        self.result.files.append(write_csv(self.path(name), _series_columns(series, overlays), header))

    def report(self, name: str, report: EchoReport, header: dict):
        self.result.reports[name] = report
        head = dict(header, tau=report.tau, collapse_time=report.collapse_time,
                    observable=report.observable, threshold=report.meta["threshold"],
                    match_window=report.meta["match_window"])
        self.result.files.append(write_csv(self.path(f"echoes_{name}"), _report_columns(report), head))

    def table(self, name: str, columns: dict, header: dict):
        self.result.tables[name] = columns
        self.result.files.append(write_csv(self.path(name), columns, header))


def _detect_all(cfg, writer, name, series, tau, alpha, header):
    if not cfg.analysis.detect:
        return
    for obs in cfg.analysis.observables:
        writer.report(f"{name}_{obs}", detect_echoes(series, tau, alpha, obs), header)


def _tau(cfg, pulses):
    k = _echo_kick_index(cfg)
    return None if k is None else float(pulses[k].center)


def _analytic_overlays(cfg, pulses, ts) -> dict:
    out = {}
    wanted = [o for o in cfg.overlays if o != "classical"]
    if not wanted:
        return out
    if not isinstance(cfg.initial, CoherentCfg):
        raise ValueError("analytic overlays need a coherent initial state")
    a0, delta = cfg.initial.alpha0, cfg.system.delta
    if "closed_form" in wanted:
        out["closed_form"] = q_free(ts, a0, delta)
    perturb = [o for o in wanted if o != "closed_form"]
    if perturb:
        if len(pulses) != 1:
            raise ValueError("perturbative overlays need exactly one pulse or kick")
        pl = pulses[0]
        ctx = PerturbationContext(a0, delta, _tau(cfg, pulses), pl.kick_strength)
        for name in perturb:
            order = 1 if name == "first_order" else 2
            out[name] = q_kicked_piecewise(ts, ctx, order, printed_diagonal=name.endswith("printed"))
    return out


# -- modes -------------------------------------------------------------------

def _quantum(cfg, pulses, ts, params):
    n_max = _coherent_n_max(cfg, pulses)
    psi0 = coherent_state(cfg.initial.alpha0, Truncation(n_max))
    series = run_kicked_scenario(psi0, pulses, params, ts, dt=cfg.numerics.dt)
    return series, n_max


def _classical(cfg, pulses, ts, params, snapshots=()):
    ens = sample_initial_ensemble(cfg.initial.alpha0, cfg.ensemble.n, cfg.ensemble.seed)
    return evolve_ensemble(ens, pulses, params, ts, dt=cfg.numerics.classical_dt,
                           snapshot_times=snapshots, free_flow=cfg.numerics.classical_free_flow)


def _run_quantum_modes(cfg, writer, pulses, ts, params):
    tau = _tau(cfg, pulses)
    alpha = _detection_alpha(cfg, pulses)
    series, n_max = _quantum(cfg, pulses, ts, params)
    head = _base_header(cfg, n_max=n_max, dt=cfg.numerics.dt if cfg.numerics.dt else "auto")
    writer.series("quantum", series, head, _analytic_overlays(cfg, pulses, ts))
    _detect_all(cfg, writer, "quantum", series, tau, alpha, head)
    if "classical" in cfg.overlays:
        _run_classical(cfg, writer, pulses, ts, params, tau, alpha)


def _run_classical(cfg, writer, pulses, ts, params, tau, alpha):
    series, _ = _classical(cfg, pulses, ts, params)
    head = _base_header(cfg, seed=cfg.ensemble.seed, n_particles=cfg.ensemble.n,
                        dt=cfg.numerics.classical_dt, free_flow=cfg.numerics.classical_free_flow)
    writer.series("classical", series, head)
    _detect_all(cfg, writer, "classical", series, tau, alpha, head)


def _run_lindblad(cfg, writer, pulses, ts, params):
    b = cfg.bath
    bath = BathParams(b.gamma, nbar=b.nbar, epsilon=b.epsilon)
    if isinstance(cfg.initial, CoherentCfg):
        n_max = _coherent_n_max(cfg, pulses)
        S0 = coherent_density(cfg.initial.alpha0, Truncation(n_max))
    else:
        init = BathParams(0.0, nbar=cfg.initial.nbar, epsilon=cfg.initial.epsilon)
        n_max = cfg.numerics.n_max or recommended_thermal_n_max(init.n_thermal, _kick_strengths(pulses))
        S0 = thermal_state(init, Truncation(n_max))
    series = propagate_lindblad(S0, pulses, params, bath, ts, dt=cfg.numerics.dt,
                                dt_free=cfg.numerics.dt_free,
                                positivity_stride=cfg.numerics.positivity_stride)
    series.meta.pop("final_state", None)
    head = _base_header(cfg, n_max=n_max, dt=series.meta["dt"], dt_free=series.meta["dt_free"],
                        nbar=bath.n_thermal)
    writer.series("lindblad", series, head)
    _detect_all(cfg, writer, "lindblad", series, _tau(cfg, pulses), _detection_alpha(cfg, pulses), head)


def _run_husimi(cfg, writer, pulses, ts, params):
    g = cfg.grid
    snaps = sorted(g.snapshots)
    a0 = cfg.initial.alpha0
    half = g.half_width or (math.sqrt(2.0) * (abs(a0) + sum(abs(k) for k in _kick_strengths(pulses))) + 5.0)
    rng = (-half, half)
    radius = math.sqrt(2.0) * abs(a0)
    series, n_max = _quantum(cfg, pulses, ts, params)
    head = _base_header(cfg, n_max=n_max, dt=cfg.numerics.dt if cfg.numerics.dt else "auto")
    writer.series("quantum", series, head)
    psi0 = coherent_state(a0, Truncation(n_max))
    states = states_at(psi0, pulses, params, snaps, dt=cfg.numerics.dt)
    cl_snaps = {}
    if cfg.ensemble is not None:
        _, cl_snaps = _classical(cfg, pulses, [snaps[-1]], params, snapshots=snaps)
    summary = {"t": [], "husimi_normalization": [], "husimi_contrast": [], "classical_contrast": []}
    for t, psi in zip(snaps, states):
        grid = husimi_q(psi, rng, rng, g.resolution, t=t)
        qv = grid.meta["q_values"]
        Q, P = np.meshgrid(grid.q_centers, grid.p_centers, indexing="ij")
        tag = f"t{t:.4f}"
        writer.table(f"husimi_{tag}", {"q": Q.ravel(), "p": P.ravel(), "value": qv.ravel()},
                     dict(head, t=t, normalization=grid.meta["normalization"]))
        summary["t"].append(t)
        summary["husimi_normalization"].append(grid.meta["normalization"])
        summary["husimi_contrast"].append(angular_contrast(grid, radius, g.annulus_half_width))
        if cl_snaps:
            hist = phase_space_histogram(cl_snaps[t], rng, rng, g.resolution)
            writer.table(f"classical_{tag}", {"q": Q.ravel(), "p": P.ravel(), "value": hist.density.ravel()},
                         dict(head, t=t, seed=cfg.ensemble.seed, n_particles=cfg.ensemble.n))
            summary["classical_contrast"].append(angular_contrast(hist, radius, g.annulus_half_width))
        else:
            summary["classical_contrast"].append(None)
    writer.table("snapshots", summary, dict(head, annulus_radius=radius,
                                            annulus_half_width=g.annulus_half_width))


def _run_analytic(cfg, writer, pulses, ts, params):
    if not cfg.overlays or cfg.overlays == ["classical"]:
        cfg = cfg.model_copy(update={"overlays": ["closed_form", "first_order", "second_order"]})
    cols = {"t": ts, **_analytic_overlays(cfg, pulses, ts)}
    writer.table("analytic", cols, _base_header(cfg))


def _with_pulse(cfg, pulse_cfg):
    return cfg.model_copy(update={"pulses": [pulse_cfg]})


def _run_echo_scan(cfg, writer, pulses, ts, params):
    rows = {"tau": [], "time": [], "predicted_time": [], "amplitude": [], "kind": [], "order": [], "label": []}
    n_max = None
    for tau in cfg.scan.taus:
        pc = cfg.pulses[0].model_copy(update={"center": tau})
        sub = _with_pulse(cfg, pc)
        sub_pulses = build_pulses(sub)
        series, n_max = _quantum(sub, sub_pulses, ts, params)
        for obs in cfg.analysis.observables:
            rep = detect_echoes(series, tau, cfg.initial.alpha0, obs)
            for e in rep.events:
                rows["tau"].append(tau)
                for k, v in _report_columns(EchoReport([e], tau)).items():
                    rows[k].append(v[0])
    writer.table("echo_scan", rows, _base_header(cfg, n_max=n_max))


def lambda_sweep(cfg: ScenarioConfig):
    """Echo amplitudes against kick strength.

    Amplitudes are the peak deviation from the unkicked evolution within two
    collapse times of pi - tau (quantum echo) and 2 tau (classical echo).
    """
    params = SystemParams(cfg.system.delta)
    ts = _sample_times(cfg)
    a0 = cfg.initial.alpha0
    t_c = 1.0 / (2.0 * abs(a0))
    base = cfg.pulses[0]
    tau = base.center
    ref, _ = _quantum(_with_pulse(cfg, base), [], ts, params)
    lams, quantum, classical = [], [], []
    n_max = None
    for lam in cfg.scan.lambdas:
        if isinstance(base, GaussianCfg):
            pc = base.model_copy(update={"e0": -lam / (base.sigma * math.sqrt(math.pi))})
        else:
            pc = base.model_copy(update={"lam": lam})
        sub = _with_pulse(cfg, pc)
        series, n_max = _quantum(sub, build_pulses(sub), ts, params)
        lams.append(lam)
        quantum.append(echo_amplitude(series, math.pi - tau, 2 * t_c, reference=ref))
        classical.append(echo_amplitude(series, 2 * tau, 2 * t_c, reference=ref))
    mags = [abs(x) for x in lams]
    slopes = {"quantum_slope": fit_loglog_slope(mags, quantum),
              "classical_slope": fit_loglog_slope(mags, classical)}
    cols = {"lambda": lams, "quantum_echo_amplitude": quantum, "classical_echo_amplitude": classical}
    return cols, slopes, n_max


def _run_lambda_scaling(cfg, writer, pulses, ts, params):
    cols, slopes, n_max = lambda_sweep(cfg)
    writer.table("lambda_scaling", cols, _base_header(cfg, n_max=n_max, **slopes))
    writer.result.meta.update(slopes)


_MODES = {
    "free": _run_quantum_modes,
    "kicked": _run_quantum_modes,
    "classical": lambda cfg, writer, pulses, ts, params: _run_classical(
        cfg, writer, pulses, ts, params, _tau(cfg, pulses), _detection_alpha(cfg, pulses)),
    "lindblad": _run_lindblad,
    "husimi": _run_husimi,
    "analytic": _run_analytic,
    "echo_scan": _run_echo_scan,
    "lambda_scaling": _run_lambda_scaling,
}


def run_scenario(cfg: ScenarioConfig) -> RunResult:
    result = RunResult()
    writer = _Writer(cfg, result)
    pulses = build_pulses(cfg)
    ts = _sample_times(cfg)
    params = SystemParams(cfg.system.delta)
    _MODES[cfg.mode](cfg, writer, pulses, ts, params)
    return result
