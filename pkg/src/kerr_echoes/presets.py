"""
Built-in scenarios.

Physics parameters are fixed per scenario.  Time windows, sample counts,
seeds and snapshot times are numerical choices.
"""

from __future__ import annotations

import math

TWO_PI = 2.0 * math.pi
SEED = 20240501


def _gauss(e0, sigma, center):
    return {"kind": "gaussian", "e0": e0, "sigma": sigma, "center": center}


_FIG2_CORE = {
    "system": {"delta": 0.01},
    "initial": {"kind": "coherent", "alpha0": 6.0},
    "pulses": [_gauss(3.0, 0.01, 0.5)],
}

PRESETS: dict[str, dict] = {
    "fig1": {
        "mode": "free",
        "system": {"delta": 0.0},
        "initial": {"kind": "coherent", "alpha0": 4.0},
        "sampling": {"t_start": 0.0, "t_end": TWO_PI, "n_samples": 2001},
        "overlays": ["closed_form"],
        "outputs": {"prefix": "fig1"},
    },
    "fig2": {
        "mode": "kicked",
        **_FIG2_CORE,
        "ensemble": {"n": 50000, "seed": SEED},
        "sampling": {"t_start": 0.0, "t_end": 3.5, "n_samples": 3501},
        "overlays": ["classical"],
        "outputs": {"prefix": "fig2"},
    },
    "fig3a": {
        "mode": "kicked",
        "system": {"delta": 0.01},
        "initial": {"kind": "coherent", "alpha0": 4.0},
        "pulses": [_gauss(0.5, 0.02, 0.8)],
        "sampling": {"t_start": 0.0, "t_end": 3.6, "n_samples": 1801},
        "overlays": ["first_order"],
        "outputs": {"prefix": "fig3a"},
    },
    "fig3b": {
        "mode": "kicked",
        "system": {"delta": 0.01},
        "initial": {"kind": "coherent", "alpha0": 4.0},
        "pulses": [_gauss(0.5, 0.02, 2.0)],
        "sampling": {"t_start": 0.0, "t_end": 5.6, "n_samples": 2801},
        "overlays": ["first_order"],
        "outputs": {"prefix": "fig3b"},
    },
    "fig4": {
        "mode": "husimi",
        "system": {"delta": 0.01},
        "initial": {"kind": "coherent", "alpha0": 6.0},
        "pulses": [_gauss(15.0, 0.01, 0.5)],
        "ensemble": {"n": 50000, "seed": SEED},
        "grid": {"snapshots": [0.0, 0.5, 0.6, 0.85, 1.0], "resolution": 161},
        "sampling": {"t_start": 0.0, "t_end": 1.2, "n_samples": 1201},
        "outputs": {"prefix": "fig4"},
    },
    "fig5": {
        "mode": "kicked",
        **_FIG2_CORE,
        "sampling": {"t_start": 0.0, "t_end": 3.8, "n_samples": 3801},
        "analysis": {"observables": ["q2"]},
        "outputs": {"prefix": "fig5"},
    },
    "fig6a": {
        "mode": "lindblad",
        "system": {"delta": 0.01},
        "initial": {"kind": "coherent", "alpha0": 4.0},
        "pulses": [_gauss(3.0, 0.02, 0.8)],
        "bath": {"gamma": 1e-3, "nbar": 0.0},
        "sampling": {"t_start": 0.0, "t_end": 10.0, "n_samples": 2001},
        "outputs": {"prefix": "fig6a"},
    },
    "fig6b": {
        "mode": "lindblad",
        "system": {"delta": 0.01},
        "initial": {"kind": "coherent", "alpha0": 4.0},
        "pulses": [_gauss(3.0, 0.02, 0.6)],
        "bath": {"gamma": 0.1, "nbar": 0.0},
        "sampling": {"t_start": 0.0, "t_end": 3.6, "n_samples": 721},
        "outputs": {"prefix": "fig6b"},
    },
    "fig7a": {
        "mode": "lindblad",
        "system": {"delta": 0.01},
        "initial": {"kind": "thermal", "epsilon": 1.0},
        "pulses": [_gauss(20.0, 0.1, 0.0), _gauss(1.0, 0.05, 1.7)],
        "bath": {"gamma": 5e-3, "epsilon": 1.0},
        "sampling": {"t_start": -0.5, "t_end": 5.0, "n_samples": 1101},
        "analysis": {"echo_kick": 1},
        "outputs": {"prefix": "fig7a"},
    },
    "fig7b": {
        "mode": "lindblad",
        "system": {"delta": 0.01},
        "initial": {"kind": "thermal", "epsilon": 0.1},
        "pulses": [_gauss(20.0, 0.1, 0.0), _gauss(13.0, 0.02, 1.0)],
        "bath": {"gamma": 5e-3, "epsilon": 0.1},
        "sampling": {"t_start": -0.5, "t_end": 3.5, "n_samples": 801},
        "analysis": {"echo_kick": 1},
        "outputs": {"prefix": "fig7b"},
    },
    "fig8": {
        "mode": "kicked",
        **_FIG2_CORE,
        "sampling": {"t_start": 0.0, "t_end": 3.5, "n_samples": 3501},
        "overlays": ["second_order", "second_order_printed"],
        "outputs": {"prefix": "fig8"},
    },
    # parameter scans and pulse-width studies
    "wide_pulse": {
        "mode": "kicked",
        "system": {"delta": 0.01},
        "initial": {"kind": "coherent", "alpha0": 4.0},
        "pulses": [_gauss(1.0, 0.1, 0.8)],
        "sampling": {"t_start": 0.0, "t_end": 3.6, "n_samples": 1801},
        "outputs": {"prefix": "wide_pulse"},
    },
    "lambda_scaling": {
        "mode": "lambda_scaling",
        "system": {"delta": 0.01},
        "initial": {"kind": "coherent", "alpha0": 6.0},
        "pulses": [{"kind": "kick", "lam": 0.01, "center": 0.5}],
        "scan": {"lambdas": [0.01, 0.02, 0.04]},
        "sampling": {"t_start": 0.0, "t_end": 3.0, "n_samples": 3001},
        "outputs": {"prefix": "lambda_scaling"},
    },
    "echo_scan": {
        "mode": "echo_scan",
        "system": {"delta": 0.01},
        "initial": {"kind": "coherent", "alpha0": 4.0},
        "pulses": [_gauss(0.5, 0.02, 0.8)],
        "scan": {"taus": [0.6, 0.8, 1.0, 1.2]},
        "sampling": {"t_start": 0.0, "t_end": 3.6, "n_samples": 1801},
        "outputs": {"prefix": "echo_scan"},
    },
}

FIGURE_PRESETS = ("fig1", "fig2", "fig3a", "fig3b", "fig4", "fig5", "fig6a", "fig6b",
                  "fig7a", "fig7b", "fig8")
