"""
Scenario files: YAML documents validated against a strict schema.

Physics parameters have no defaults; only numerical settings do.  A
document may name a built-in preset and override parts of it.
"""

from __future__ import annotations

import copy
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .presets import PRESETS


class ConfigError(ValueError):
    """Invalid scenario: schema violation, unknown preset or unreadable file."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SystemCfg(_Strict):
    delta: float


class CoherentCfg(_Strict):
    kind: Literal["coherent"]
    alpha0: float


class ThermalCfg(_Strict):
    kind: Literal["thermal"]
    epsilon: Optional[float] = Field(default=None, gt=0)
    nbar: Optional[float] = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _one_of(self):
        if (self.epsilon is None) == (self.nbar is None):
            raise ValueError("thermal initial state needs exactly one of epsilon, nbar")
        return self


Initial = Annotated[Union[CoherentCfg, ThermalCfg], Field(discriminator="kind")]


class GaussianCfg(_Strict):
    kind: Literal["gaussian"]
    e0: float
    sigma: float = Field(gt=0)
    center: float


class KickCfg(_Strict):
    kind: Literal["kick"]
    lam: float
    center: float


PulseCfg = Annotated[Union[GaussianCfg, KickCfg], Field(discriminator="kind")]


class BathCfg(_Strict):
    gamma: float = Field(ge=0)
    epsilon: Optional[float] = Field(default=None, gt=0)
    nbar: Optional[float] = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _one_of(self):
        if (self.epsilon is None) == (self.nbar is None):
            raise ValueError("bath needs exactly one of epsilon, nbar")
        return self


class EnsembleCfg(_Strict):
    n: int = Field(ge=2)
    seed: int = Field(ge=0)


class GridCfg(_Strict):
    snapshots: list[float] = Field(min_length=1)
    half_width: Optional[float] = Field(default=None, gt=0)
    resolution: int = Field(default=161, ge=8)
    annulus_half_width: float = Field(default=2.0, gt=0)


class SamplingCfg(_Strict):
    t_start: float
    t_end: float
    n_samples: int = Field(ge=2)

    @model_validator(mode="after")
    def _order(self):
        if not self.t_end > self.t_start:
            raise ValueError("t_end must exceed t_start")
        return self


class NumericsCfg(_Strict):
    n_max: Optional[int] = Field(default=None, ge=2)
    dt: Optional[float] = Field(default=None, gt=0)
    dt_free: Optional[float] = Field(default=None, gt=0)
    classical_dt: float = Field(default=1e-4, gt=0)
    classical_free_flow: Literal["exact", "rk4"] = "exact"
    positivity_stride: int = Field(default=10, ge=0)


class AnalysisCfg(_Strict):
    observables: list[Literal["q1", "q2"]] = Field(default_factory=lambda: ["q1"])
    detect: bool = True
    echo_kick: Optional[int] = Field(default=None, ge=0)


class ScanCfg(_Strict):
    taus: Optional[list[float]] = None
    lambdas: Optional[list[float]] = None


class OutputsCfg(_Strict):
    prefix: str


Overlay = Literal["closed_form", "first_order", "second_order", "second_order_printed", "classical"]


class ScenarioConfig(_Strict):
    mode: Literal["free", "kicked", "classical", "lindblad", "husimi", "analytic",
                  "echo_scan", "lambda_scaling"]
    system: SystemCfg
    initial: Initial
    pulses: list[PulseCfg] = Field(default_factory=list)
    bath: Optional[BathCfg] = None
    ensemble: Optional[EnsembleCfg] = None
    grid: Optional[GridCfg] = None
    sampling: SamplingCfg
    numerics: NumericsCfg = Field(default_factory=NumericsCfg)
    analysis: AnalysisCfg = Field(default_factory=AnalysisCfg)
    overlays: list[Overlay] = Field(default_factory=list)
    scan: Optional[ScanCfg] = None
    outputs: OutputsCfg
    preset: Optional[str] = None

    @model_validator(mode="after")
    def _mode_fields(self):
        m = self.mode
        thermal = isinstance(self.initial, ThermalCfg)
        if thermal and m != "lindblad":
            raise ValueError(f"a thermal initial state requires mode 'lindblad', not {m!r}")
        if m == "lindblad" and self.bath is None:
            raise ValueError("mode 'lindblad' requires a 'bath' block")
        if m == "lindblad" and any(isinstance(p, KickCfg) for p in self.pulses):
            raise ValueError("mode 'lindblad' accepts only gaussian pulses")
        if m in ("classical",) and self.ensemble is None:
            raise ValueError("mode 'classical' requires an 'ensemble' block")
        if "classical" in self.overlays and self.ensemble is None:
            raise ValueError("the 'classical' overlay requires an 'ensemble' block")
        if m == "husimi" and self.grid is None:
            raise ValueError("mode 'husimi' requires a 'grid' block")
        if m == "free" and self.pulses:
            raise ValueError("mode 'free' takes no pulses")
        if m in ("analytic", "echo_scan", "lambda_scaling") and len(self.pulses) != 1:
            raise ValueError(f"mode {m!r} needs exactly one pulse or kick")
        if m == "echo_scan" and (self.scan is None or not self.scan.taus):
            raise ValueError("mode 'echo_scan' requires scan.taus")
        if m == "lambda_scaling" and (self.scan is None or not self.scan.lambdas
                                      or len(self.scan.lambdas) < 2):
            raise ValueError("mode 'lambda_scaling' requires at least two scan.lambdas")
        if m == "lambda_scaling" and any(v == 0 for v in self.scan.lambdas):
            raise ValueError("scan.lambdas must be non-zero")
        if self.analysis.echo_kick is not None and self.analysis.echo_kick >= len(self.pulses):
            raise ValueError("analysis.echo_kick does not index a pulse")
        return self


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _format_errors(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"]) or "<root>"
        lines.append(f"  {loc}: {e['msg']}")
    return "invalid scenario:\n" + "\n".join(lines)


def config_from_dict(doc: dict) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ConfigError("scenario must be a mapping")
    name = doc.get("preset")
    if name is not None:
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}; known: {', '.join(PRESETS)}")
        doc = _merge(PRESETS[name], doc)
    try:
        return ScenarioConfig.model_validate(doc)
    except ValidationError as err:
        raise ConfigError(_format_errors(err)) from None


def preset_config(name: str, prefix: str | None = None) -> ScenarioConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; known: {', '.join(PRESETS)}")
    doc = {"preset": name}
    if prefix is not None:
        doc["outputs"] = {"prefix": prefix}
    return config_from_dict(doc)


def parse_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"cannot read {path}: {err.strerror}") from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as err:
        mark = getattr(err, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"YAML syntax error in {path}{where}") from None
    return config_from_dict(doc)
