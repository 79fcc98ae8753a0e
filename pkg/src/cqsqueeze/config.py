"""Experiment configuration: YAML files with dotted ``key=value`` overrides."""

from __future__ import annotations

import hashlib
import json
import math
import types
import typing
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path

import numpy as np
import yaml

from cqsqueeze.grid import ComplexField, TimeGrid
from cqsqueeze.propagator import StepConfig
from cqsqueeze.pulses import (
    CqParams,
    GaussianSpec,
    SolitonSpec,
    gaussian_pulse,
    soliton_period,
    soliton_profile,
    solve_bistable_amplitudes,
)

PERIOD_CONVENTION = "z_sp = pi / (2 * beta)"
REFERENCE_BETA = 1.0


class ConfigError(ValueError):
    """Malformed configuration or a pulse that violates a module precondition."""


@dataclass
class ParamsConfig:
    chi: float = 1.0
    gamma: float = 0.0


@dataclass
class GridConfig:
    n: int = 1024
    t_span: float = 40.0


@dataclass
class IntegratorConfig:
    dz: float = 1e-3
    scheme: str = "strang"
    checkpoint_stride: int | None = None
    divergence_factor: float = 1e3


@dataclass
class AnalysisConfig:
    """Propagation length and sampling.

    ``length`` is in soliton periods when ``length_unit`` is ``"periods"`` and in raw
    z otherwise. ``period`` picks the unit: ``"reference"`` is the beta = 1 soliton
    (a common axis for every pulse in the run), ``"own"`` is each pulse's period.
    """

    length: float = 5.0
    length_unit: str = "periods"
    period: str = "reference"
    n_samples: int = 21
    theta_points: int = 360
    seed: int = 0
    conjugate_coupling: bool = True
    export_every: int | None = None


@dataclass
class PulseConfig:
    """One input pulse. ``kind`` is ``soliton``, ``gaussian`` or ``cw``.

    Solitons take one of ``beta``, ``amplitude`` or ``tau`` + ``branch``; Gaussians
    take ``amplitude`` or ``energy`` together with ``alpha`` (and optional ``chirp``).
    ``chi``/``gamma`` override the run-level parameters for this pulse.
    """

    label: str = "pulse"
    kind: str = "soliton"
    chi: float | None = None
    gamma: float | None = None
    beta: float | None = None
    amplitude: float | None = None
    tau: float | None = None
    branch: str | None = None
    alpha: float | None = None
    chirp: float = 0.0
    energy: float | None = None


@dataclass
class MarkerConfig:
    label: str = "marker"
    gamma: float = -0.1
    tau: float = 3.5


@dataclass
class FamilyConfig:
    gammas: list[float] = field(default_factory=lambda: [-0.1, -0.13, 0.0])
    a_max: float = 4.0
    n_points: int = 400
    markers: list[MarkerConfig] = field(default_factory=list)


@dataclass
class ValidateConfig:
    length: float | None = None
    n_pairs: int = 20
    pairing_tolerance: float = 1e-6
    continuum_tolerance: float = 1e-3


@dataclass
class ExperimentConfig:
    name: str = "run"
    output: str = "out"
    workers: int = 1
    params: ParamsConfig = field(default_factory=ParamsConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    pulses: list[PulseConfig] = field(default_factory=list)
    family: FamilyConfig = field(default_factory=FamilyConfig)
    validate: ValidateConfig = field(default_factory=ValidateConfig)

    def to_dict(self) -> dict:
        return asdict(self)

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _coerce(value, tp, where: str):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin in (typing.Union, types.UnionType):
        if value is None and type(None) in args:
            return None
        (inner,) = [a for a in args if a is not type(None)]
        return _coerce(value, inner, where)
    if origin is list:
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
        return [_coerce(v, args[0], f"{where}[{i}]") for i, v in enumerate(value)]
    if is_dataclass(tp):
        return _build(tp, value, where)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(f"{where}: expected a finite number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    raise ConfigError(f"{where}: unsupported type {tp}")


def _build(cls, data, where: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'}: expected a mapping, got {data!r}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{where or 'config'}: unknown keys {sorted(unknown)}")
    kwargs = {k: _coerce(v, hints[k], f"{where}.{k}" if where else k) for k, v in data.items()}
    return cls(**kwargs)


def _parse_path(key: str) -> list:
    parts = []
    for p in key.split("."):
        if not p:
            raise ConfigError(f"bad override key {key!r}")
        parts.append(int(p) if p.isdigit() else p)
    return parts


def apply_override(data: dict, assignment: str) -> None:
    """Apply one ``a.b.c=value`` override in place; the value is parsed as YAML."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not key=value")
    key, raw = assignment.split("=", 1)
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"override {assignment!r}: {exc}") from exc
    path = _parse_path(key.strip())
    node = data
    for p in path[:-1]:
        try:
            if isinstance(p, int):
                node = node[p]
            else:
                node = node.setdefault(p, {})
        except (IndexError, KeyError, TypeError, AttributeError):
            raise ConfigError(f"override {key!r}: no such entry") from None
        if node is None:
            raise ConfigError(f"override {key!r}: no such entry")
    last = path[-1]
    try:
        node[last] = value
    except (IndexError, TypeError):
        raise ConfigError(f"override {key!r}: no such entry") from None


def parse_config(text: str, overrides=()) -> ExperimentConfig:
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("top level of the config must be a mapping")
    for o in overrides:
        apply_override(data, o)
    cfg = _build(ExperimentConfig, data, "")
    check_config(cfg)
    return cfg


def load_config(path, overrides=()) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, overrides)


def check_config(cfg: ExperimentConfig) -> None:
    """Reject out-of-range settings before anything is computed."""
    a = cfg.analysis
    if a.length_unit not in ("periods", "z"):
        raise ConfigError(f"analysis.length_unit must be 'periods' or 'z', got {a.length_unit!r}")
    if a.period not in ("reference", "own"):
        raise ConfigError(f"analysis.period must be 'reference' or 'own', got {a.period!r}")
    if a.length < 0 or a.n_samples < 1 or a.theta_points < 1:
        raise ConfigError("analysis: length must be >= 0, n_samples and theta_points >= 1")
    if a.export_every is not None and a.export_every < 1:
        raise ConfigError("analysis.export_every must be >= 1")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    if cfg.validate.length is not None and cfg.validate.length < 0:
        raise ConfigError("validate.length must be >= 0")
    if cfg.validate.n_pairs < 1:
        raise ConfigError("validate.n_pairs must be >= 1")
    try:
        TimeGrid(cfg.grid.n, cfg.grid.t_span)
        step_config(cfg)
        CqParams(cfg.params.chi, cfg.params.gamma)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    labels = [p.label for p in cfg.pulses]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"pulse labels must be unique, got {labels}")
    grid = TimeGrid(cfg.grid.n, cfg.grid.t_span)
    for p in cfg.pulses:
        build_pulse(cfg, p, grid)


def step_config(cfg: ExperimentConfig) -> StepConfig:
    i = cfg.integrator
    return StepConfig(dz=i.dz, scheme=i.scheme, checkpoint_stride=i.checkpoint_stride, divergence_factor=i.divergence_factor)


@dataclass(frozen=True)
class Pulse:
    """A fully resolved input pulse."""

    label: str
    params: CqParams
    field: ComplexField
    beta: float
    own_period: float
    description: dict


def _require(p: PulseConfig, present, absent):
    for k in present:
        if getattr(p, k) is None:
            raise ConfigError(f"pulse {p.label!r}: {p.kind} needs {k!r}")
    for k in absent:
        if getattr(p, k) is not None:
            raise ConfigError(f"pulse {p.label!r}: {k!r} does not apply here")


def build_pulse(cfg: ExperimentConfig, p: PulseConfig, grid: TimeGrid) -> Pulse:
    try:
        params = CqParams(
            cfg.params.chi if p.chi is None else p.chi,
            cfg.params.gamma if p.gamma is None else p.gamma,
        )
        if p.kind == "soliton":
            given = [k for k in ("beta", "amplitude", "tau") if getattr(p, k) is not None]
            if len(given) != 1:
                raise ConfigError(f"pulse {p.label!r}: give exactly one of beta, amplitude, tau")
            _require(p, [], ["alpha", "energy"])
            if p.beta is not None:
                spec = SolitonSpec(params, p.beta)
            elif p.amplitude is not None:
                spec = SolitonSpec.from_amplitude(params, p.amplitude)
            else:
                roots = solve_bistable_amplitudes(params, p.tau)
                if p.branch not in ("lower", "upper"):
                    raise ConfigError(f"pulse {p.label!r}: tau needs branch 'lower' or 'upper'")
                if not roots:
                    raise ConfigError(f"pulse {p.label!r}: no soliton of width {p.tau}")
                if p.branch == "upper" and len(roots) < 2:
                    raise ConfigError(f"pulse {p.label!r}: width {p.tau} has a single branch")
                spec = SolitonSpec.from_amplitude(params, roots[0] if p.branch == "lower" else roots[-1])
            desc = {"kind": "soliton", "beta": spec.beta, "amplitude": spec.amplitude, "tau": spec.tau}
            return Pulse(p.label, params, soliton_profile(spec, grid), spec.beta, spec.soliton_period, desc)
        if p.kind == "gaussian":
            _require(p, ["alpha"], ["beta", "tau", "branch"])
            if (p.amplitude is None) == (p.energy is None):
                raise ConfigError(f"pulse {p.label!r}: give exactly one of amplitude, energy")
            if p.energy is not None:
                spec = GaussianSpec.from_energy(p.energy, p.alpha, p.chirp)
            else:
                spec = GaussianSpec(p.amplitude, p.alpha, p.chirp)
            desc = {"kind": "gaussian", "amplitude": spec.amplitude, "alpha": spec.alpha,
                    "chirp": spec.chirp, "energy": spec.energy, "equivalent_beta": spec.equivalent_beta}
            return Pulse(p.label, params, gaussian_pulse(spec, grid), spec.equivalent_beta, spec.soliton_period, desc)
        if p.kind == "cw":
            _require(p, ["amplitude"], ["beta", "tau", "branch", "alpha", "energy"])
            values = np.full(grid.n, p.amplitude, dtype=complex)
            beta = params.chi * p.amplitude**2 + params.gamma * p.amplitude**4
            desc = {"kind": "cw", "amplitude": p.amplitude}
            return Pulse(p.label, params, grid.field(values), beta, soliton_period(REFERENCE_BETA), desc)
        raise ConfigError(f"pulse {p.label!r}: unknown kind {p.kind!r}")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"pulse {p.label!r}: {exc}") from exc


def build_pulses(cfg: ExperimentConfig) -> list[Pulse]:
    grid = TimeGrid(cfg.grid.n, cfg.grid.t_span)
    return [build_pulse(cfg, p, grid) for p in cfg.pulses]


def period_unit(cfg: ExperimentConfig, pulse: Pulse) -> float:
    return pulse.own_period if cfg.analysis.period == "own" else soliton_period(REFERENCE_BETA)


def length_for(cfg: ExperimentConfig, pulse: Pulse, length: float | None = None) -> float:
    length = cfg.analysis.length if length is None else length
    if cfg.analysis.length_unit == "z":
        return float(length)
    return float(length) * period_unit(cfg, pulse)

