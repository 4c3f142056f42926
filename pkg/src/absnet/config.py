"""Strict-schema JSON configuration for the command-line tools.

A config file is a JSON object with optional sections "generation",
"channel", "solver" and "experiment", plus an optional "scenario_file"
pointing at a saved scenario (relative paths resolve against the config
file's directory). Absent sections and fields fall back to the reference
simulation defaults; unknown keys are rejected with the dotted path of the
offending entry so typos never silently disappear.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, fields, replace

from .channel import ChannelParams
from .evaluation import ExperimentConfig, InterferenceMode
from .orchestrator import SolverConfig
from .records import atomic_write_text
from .scenario import (GenerationConfig, PointProcessConfig, Scenario,
                       load_scenario)


class ConfigError(ValueError):
    """Invalid configuration content; message carries the dotted path."""


@dataclass(frozen=True)
class AppConfig:
    """Everything the command-line tools need, fully validated."""

    scenario_file: str | None = None
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    channel: ChannelParams = field(default_factory=ChannelParams)
    solver: SolverConfig = field(default_factory=SolverConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    scenario: Scenario | None = field(default=None, compare=False, repr=False)


def _require(condition: bool, path: str, message: str) -> None:
    if not condition:
        raise ConfigError(f"{path}: {message}")


def _as_int(value, path: str) -> int:
    _require(isinstance(value, int) and not isinstance(value, bool), path,
             f"expected an integer, got {value!r}")
    return value


def _as_float(value, path: str) -> float:
    _require(isinstance(value, (int, float)) and not isinstance(value, bool),
             path, f"expected a number, got {value!r}")
    _require(math.isfinite(float(value)), path, "must be finite")
    return float(value)


def _as_bool(value, path: str) -> bool:
    _require(isinstance(value, bool), path,
             f"expected true or false, got {value!r}")
    return value


def _as_str(value, path: str) -> str:
    _require(isinstance(value, str), path,
             f"expected a string, got {value!r}")
    return value


def _as_list(value, path: str) -> list:
    _require(isinstance(value, list), path,
             f"expected a list, got {value!r}")
    return value


def _opt(converter):
    def convert(value, path):
        return None if value is None else converter(value, path)
    return convert


def _tuple_of(converter):
    def convert(value, path):
        items = _as_list(value, path)
        return tuple(converter(item, f"{path}[{idx}]")
                     for idx, item in enumerate(items))
    return convert


def _object(value, path: str) -> dict:
    _require(isinstance(value, dict), path,
             f"expected an object, got {value!r}")
    return value


def _build(factory, spec: dict, data: dict, path: str, defaults=None):
    """Construct a dataclass from a JSON object under a strict field spec."""
    data = _object(data, path)
    unknown = sorted(set(data) - set(spec))
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}: unknown key")
    kwargs = {}
    for name, converter in spec.items():
        if name in data:
            kwargs[name] = converter(data[name], f"{path}.{name}")
    try:
        if defaults is not None:
            return replace(defaults, **kwargs)
        return factory(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _point_process(value, path: str) -> PointProcessConfig:
    spec = {
        "kind": _as_str,
        "parent_intensity": _as_float,
        "cluster_radius": _as_float,
        "mean_daughters": _as_float,
    }
    return _build(PointProcessConfig, spec, value, path)


_GENERATION_SPEC = {
    "n_users": _as_int,
    "region_side": _as_float,
    "abs_count": _as_int,
    "catalog_size": _as_int,
    "cache_capacity": _as_int,
    "zipf_alpha": _as_float,
    "delay_fraction": _as_float,
    "rate_choices": _tuple_of(_as_float),
    "point_process": _point_process,
    "cov_target": _opt(_as_float),
    "cov_window": _as_float,
    "max_rejections": _as_int,
}

_CHANNEL_SPEC = {f.name: _as_float for f in fields(ChannelParams)}

_SOLVER_SPEC = {
    "epsilon": _as_float,
    "max_outer_iterations": _as_int,
    "n_samples": _as_int,
    "seed": _opt(_as_int),
    "infeasibility_policy": _as_str,
    "node_budget": _as_int,
}


def _interference(value, path: str) -> InterferenceMode | None:
    if value is None:
        return None
    spec = {
        "kind": _as_str,
        "g_side": _as_float,
        "antenna": _as_str,
        "pairing": _as_str,
        "tx_power": _as_float,
    }
    return _build(InterferenceMode, spec, value, path)


_EXPERIMENT_SPEC = {
    "run_count": _as_int,
    "base_seed": _as_int,
    "user_counts": _tuple_of(_as_int),
    "cov_targets": _tuple_of(_opt(_as_float)),
    "cache_capacities": _tuple_of(_as_int),
    "delay_fractions": _tuple_of(_as_float),
    "backhaul_bandwidths": _tuple_of(_as_float),
    "access_bandwidths": _tuple_of(_as_float),
    "include_baseline": _as_bool,
    "interference": _interference,
    "workers": _opt(_as_int),
}

_TOP_LEVEL = ("scenario_file", "generation", "channel", "solver", "experiment")


def parse_config(data: dict, base_dir: str = ".") -> AppConfig:
    """Validate a parsed JSON object and assemble the full configuration."""
    data = _object(data, "config")
    unknown = sorted(set(data) - set(_TOP_LEVEL))
    if unknown:
        raise ConfigError(f"config.{unknown[0]}: unknown key")

    generation = _build(GenerationConfig, _GENERATION_SPEC,
                        data.get("generation", {}), "generation")
    channel = _build(ChannelParams, _CHANNEL_SPEC,
                     data.get("channel", {}), "channel")
    solver = _build(SolverConfig, _SOLVER_SPEC,
                    data.get("solver", {}), "solver")
    experiment_data = _object(data.get("experiment", {}), "experiment")
    bad = sorted(set(experiment_data) - set(_EXPERIMENT_SPEC))
    if bad:
        raise ConfigError(f"experiment.{bad[0]}: unknown key")
    experiment = _build(
        ExperimentConfig,
        {**_EXPERIMENT_SPEC,
         "generation": lambda v, p: v, "channel": lambda v, p: v,
         "solver": lambda v, p: v},
        {**experiment_data, "generation": generation, "channel": channel,
         "solver": solver},
        "experiment")

    scenario_file = None
    scenario = None
    if "scenario_file" in data:
        scenario_file = _as_str(data["scenario_file"], "config.scenario_file")
        if "generation" in data:
            raise ConfigError(
                "config.scenario_file: conflicts with a generation section")
        resolved = os.path.join(base_dir, scenario_file) \
            if not os.path.isabs(scenario_file) else scenario_file
        try:
            scenario = load_scenario(resolved)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"config.scenario_file: {exc}") from exc
    return AppConfig(scenario_file=scenario_file, generation=generation,
                     channel=channel, solver=solver, experiment=experiment,
                     scenario=scenario)


def load_config(path: str) -> AppConfig:
    """Load and validate a JSON config file; missing fields get defaults."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    if not text.strip():
        data = {}
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: {path} is not valid JSON: {exc}") \
                from exc
    return parse_config(data, base_dir=os.path.dirname(os.path.abspath(path)))


def _generation_dict(gen: GenerationConfig) -> dict:
    return {
        "n_users": gen.n_users,
        "region_side": gen.region_side,
        "abs_count": gen.abs_count,
        "catalog_size": gen.catalog_size,
        "cache_capacity": gen.cache_capacity,
        "zipf_alpha": gen.zipf_alpha,
        "delay_fraction": gen.delay_fraction,
        "rate_choices": list(gen.rate_choices),
        "point_process": {
            "kind": gen.point_process.kind,
            "parent_intensity": gen.point_process.parent_intensity,
            "cluster_radius": gen.point_process.cluster_radius,
            "mean_daughters": gen.point_process.mean_daughters,
        },
        "cov_target": gen.cov_target,
        "cov_window": gen.cov_window,
        "max_rejections": gen.max_rejections,
    }


def config_dict(config: AppConfig) -> dict:
    """The JSON object form of a configuration (inverse of parse_config)."""
    exp = config.experiment
    data = {
        "generation": _generation_dict(config.generation),
        "channel": {f.name: getattr(config.channel, f.name)
                    for f in fields(ChannelParams)},
        "solver": {
            "epsilon": config.solver.epsilon,
            "max_outer_iterations": config.solver.max_outer_iterations,
            "n_samples": config.solver.n_samples,
            "seed": config.solver.seed,
            "infeasibility_policy": config.solver.infeasibility_policy,
            "node_budget": config.solver.node_budget,
        },
        "experiment": {
            "run_count": exp.run_count,
            "base_seed": exp.base_seed,
            "user_counts": list(exp.user_counts),
            "cov_targets": list(exp.cov_targets),
            "cache_capacities": list(exp.cache_capacities),
            "delay_fractions": list(exp.delay_fractions),
            "backhaul_bandwidths": list(exp.backhaul_bandwidths),
            "access_bandwidths": list(exp.access_bandwidths),
            "include_baseline": exp.include_baseline,
            "interference": None if exp.interference is None else {
                "kind": exp.interference.kind,
                "g_side": exp.interference.g_side,
                "antenna": exp.interference.antenna,
                "pairing": exp.interference.pairing,
                "tx_power": exp.interference.tx_power,
            },
            "workers": exp.workers,
        },
    }
    if config.scenario_file is not None:
        data = {"scenario_file": config.scenario_file, **data}
        del data["generation"]
    return data


def save_config(config: AppConfig, path: str) -> None:
    atomic_write_text(path, json.dumps(config_dict(config), indent=2) + "\n")
