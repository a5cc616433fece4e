"""Tool configuration: strict YAML loading, validation and serialization."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError
from .gait import BUILTIN_GAITS, GaitPattern
from .harness import HarnessConfig, RandomizationConfig
from .imitation import RewardConfig, TerminationConfig
from .ocp import OcpWeights, SolverSettings
from .synthesis import SynthesisConfig


@dataclass
class Targets:
    base_height: float = 0.32
    swing_height: float = 0.08

    def __post_init__(self):
        if not self.base_height > 0:
            raise ValueError("base_height must be > 0")
        if not self.swing_height >= 0:
            raise ValueError("swing_height must be >= 0")


@dataclass
class Rates:
    policy_hz: float = 50.0
    solver_dt: float = 0.025
    control_dt: float = 0.02

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ValueError(f"{f.name} must be > 0")


@dataclass
class HarnessSettings:
    horizon_periods: float = 1.0
    latency_enabled: bool = False
    recovery_threshold: float = 0.05
    raibert_gain: float = 0.03

    def __post_init__(self):
        if not self.horizon_periods > 0:
            raise ValueError("horizon_periods must be > 0")
        if not self.recovery_threshold > 0:
            raise ValueError("recovery_threshold must be > 0")


@dataclass
class PpoConfig:
    """Training hyperparameters; stored for reference, nothing here consumes them."""

    batch_size: int = 512
    epochs: int = 10
    value_loss_coef: float = 0.5
    entropy_coef: float = 0.01
    discount: float = 0.95
    learning_rate: float = 5e-5
    episode_length: int = 128
    initial_std: float = math.exp(-1.0)


@dataclass
class ToolConfig:
    gaits: dict[str, GaitPattern] = field(default_factory=lambda: dict(BUILTIN_GAITS))
    ocp: OcpWeights = field(default_factory=OcpWeights)
    solver: SolverSettings = field(default_factory=SolverSettings)
    rewards: RewardConfig = field(default_factory=RewardConfig)
    termination: TerminationConfig = field(default_factory=TerminationConfig)
    randomization: RandomizationConfig = field(default_factory=RandomizationConfig)
    targets: Targets = field(default_factory=Targets)
    rates: Rates = field(default_factory=Rates)
    harness: HarnessSettings = field(default_factory=HarnessSettings)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    output_dir: str = "out"

    def gait(self, name: str) -> GaitPattern:
        try:
            return self.gaits[name]
        except KeyError:
            raise ConfigError(f"unknown gait {name!r}; configured: {', '.join(self.gaits)}") from None

    def synthesis(self) -> SynthesisConfig:
        return SynthesisConfig(base_height=self.targets.base_height, swing_height=self.targets.swing_height,
                               frame_rate=self.rates.policy_hz, solver_dt=self.rates.solver_dt,
                               raibert_gain=self.harness.raibert_gain, weights=self.ocp, settings=self.solver)

    def harness_config(self) -> HarnessConfig:
        return HarnessConfig(control_dt=self.rates.control_dt, horizon_periods=self.harness.horizon_periods,
                             base_height=self.targets.base_height, swing_height=self.targets.swing_height,
                             raibert_gain=self.harness.raibert_gain, weights=self.ocp, settings=self.solver,
                             rewards=self.rewards,
                             latency=self.randomization.latency if self.harness.latency_enabled else 0.0,
                             recovery_threshold=self.harness.recovery_threshold)


_SECTIONS = {
    "ocp": OcpWeights,
    "solver": SolverSettings,
    "rewards": RewardConfig,
    "termination": TerminationConfig,
    "randomization": RandomizationConfig,
    "targets": Targets,
    "rates": Rates,
    "harness": HarnessSettings,
    "ppo": PpoConfig,
}


def _check_type(value, default, key: str):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true/false, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float) or default is None:
        if value is None and default is None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, tuple):
        if not isinstance(value, list) or len(value) != len(default):
            raise ConfigError(f"{key}: expected a list of {len(default)} numbers, got {value!r}")
        return tuple(_check_type(v, d, f"{key}[{i}]") for i, (v, d) in enumerate(zip(value, default)))
    return value


def _build(cls, data, key: str, base=None):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{key}: expected a mapping, got {type(data).__name__}")
    proto = base if base is not None else cls()
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{key}: unknown key(s) {', '.join(f'{key}.{u}' for u in unknown)}")
    kwargs = {}
    for f in fields(cls):
        if f.name in data:
            kwargs[f.name] = _check_type(data[f.name], getattr(proto, f.name), f"{key}.{f.name}")
        else:
            kwargs[f.name] = getattr(proto, f.name)
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        bad = [n for n in data if n in str(exc)] or list(data)
        raise ConfigError(f"{key}.{bad[0] if len(bad) == 1 else '{' + ','.join(bad) + '}'}: {exc}") from None


def _build_gaits(data) -> dict[str, GaitPattern]:
    gaits = dict(BUILTIN_GAITS)
    if data is None:
        return gaits
    if not isinstance(data, dict):
        raise ConfigError("gaits: expected a mapping of gait name to parameters")
    allowed = {"period", "duty_cycle", "phase_offsets"}
    for name, params in data.items():
        key = f"gaits.{name}"
        if not isinstance(params, dict):
            raise ConfigError(f"{key}: expected a mapping")
        unknown = sorted(set(params) - allowed)
        if unknown:
            raise ConfigError(f"{key}: unknown key(s) {', '.join(f'{key}.{u}' for u in unknown)}")
        base = gaits.get(name)
        if base is None and set(params) != allowed:
            missing = sorted(allowed - set(params))
            raise ConfigError(f"{key}: new gait needs {', '.join(missing)}")
        vals = {}
        for k in sorted(allowed):
            default = getattr(base, k) if base is not None else (0.0, 0.0, 0.0) if k == "phase_offsets" else 0.0
            vals[k] = _check_type(params[k], default, f"{key}.{k}") if k in params else default
        try:
            gaits[name] = GaitPattern(name, vals["period"], vals["duty_cycle"], vals["phase_offsets"])
        except ValueError as exc:
            field_name = next((k for k in ("duty_cycle", "period", "phase_offsets") if k in str(exc)), "")
            raise ConfigError(f"{key}.{field_name}: {exc}") from None
    return gaits


def _validate_solver(s: SolverSettings) -> None:
    checks = {
        "tol": s.tol > 0,
        "max_iter": s.max_iter >= 1,
        "armijo": 0 < s.armijo < 0.5,
        "max_halvings": s.max_halvings >= 1,
        "nonneg_margin": s.nonneg_margin >= 0,
        "h_ddot_max": s.h_ddot_max > 0,
        "escalation": s.escalation >= 1,
        "feasibility_tol": s.feasibility_tol >= 0,
    }
    for k, ok in checks.items():
        if not ok:
            raise ConfigError(f"solver.{k}: value {getattr(s, k)!r} out of range")
    if s.h_ddot_min is not None and not s.h_ddot_min < s.h_ddot_max:
        raise ConfigError("solver.h_ddot_min: must be below solver.h_ddot_max")


def config_from_dict(data: dict | None) -> ToolConfig:
    data = {} if data is None else data
    if not isinstance(data, dict):
        raise ConfigError("top level: expected a mapping")
    allowed = set(_SECTIONS) | {"gaits", "output_dir"}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    kw: dict[str, Any] = {name: _build(cls, data.get(name), name) for name, cls in _SECTIONS.items()}
    kw["gaits"] = _build_gaits(data.get("gaits"))
    out = data.get("output_dir", "out")
    if not isinstance(out, str) or not out:
        raise ConfigError("output_dir: expected a non-empty string")
    kw["output_dir"] = out
    _validate_solver(kw["solver"])
    return ToolConfig(**kw)


def config_to_dict(cfg: ToolConfig) -> dict:
    def plain(obj):
        d = {}
        for f in fields(obj):
            v = getattr(obj, f.name)
            d[f.name] = list(v) if isinstance(v, tuple) else v
        return d

    out: dict[str, Any] = {
        "gaits": {name: {"period": g.period, "duty_cycle": g.duty_cycle, "phase_offsets": list(g.phase_offsets)}
                  for name, g in cfg.gaits.items()},
    }
    for name in _SECTIONS:
        out[name] = plain(getattr(cfg, name))
    out["output_dir"] = cfg.output_dir
    return out


def parse_config(text: str) -> ToolConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise ConfigError(f"config parse error at {where}: {exc.problem or exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    return config_from_dict(data)


def load_config(path=None) -> ToolConfig:
    """Load and validate a config file; ``None`` gives the built-in defaults."""
    if path is None:
        return ToolConfig()
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
    return parse_config(text)


def dump_config(cfg: ToolConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False, default_flow_style=None)


def default_config_text() -> str:
    """The shipped, commented default config file."""
    return resources.files("locomimic").joinpath("data/default_config.yaml").read_text()

