"""
Configuration settings for SAGE
File: config/settings.py

Defaults live in the module-level dicts below. A RunConfig is assembled from
them with the precedence: command-line flag > environment variable (SAGE_*) >
sage.toml > default.
"""

import os
import tomllib
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

from dotenv import find_dotenv, load_dotenv

from errors import ConfigError

# Application Configuration
APP_CONFIG = {
    "app_name": "SAGE",
    "version": "1.0.0",
    "config_file": "sage.toml",
    "log_level": "INFO",
}

# Generator Configuration
GENERATOR_CONFIG = {
    "backend": "mock",
    "endpoint": "",
    "model": "gpt-4",
    "timeout_s": 60.0,
    "max_retries": 2,
    "fixtures_dir": "fixtures",
    "max_in_flight": 4,
    "backoff_base_s": 1.0,
    "backoff_max_s": 20.0,
    "temperature": 0.0,
}

# Pipeline Configuration
PIPELINE_CONFIG = {
    "modeling_budget": 10,
    "solving_budget": 5,
    "inner_budget": 5,
    "runs_dir": "runs",
}

# Simulation Configuration
SIMULATION_CONFIG = {
    "seed": 0,
    "steps": 20,
    "seeds": 1,
    "smoke_steps": 3,
}

# Evaluation Configuration
EVAL_CONFIG = {
    # (ngram, weighted_ngram, ast, dataflow)
    "weights": (0.1, 0.1, 0.4, 0.4),
    "keyword_weight": 2.0,
    "iteration_bins": ("<=3", "4-6", "7-9", ">=10"),
}

ENV_PREFIX = "SAGE_"
BACKENDS = ("mock", "remote")


@dataclass(frozen=True)
class RunConfig:
    backend: str = GENERATOR_CONFIG["backend"]
    endpoint: str = GENERATOR_CONFIG["endpoint"]
    model: str = GENERATOR_CONFIG["model"]
    timeout_s: float = GENERATOR_CONFIG["timeout_s"]
    max_retries: int = GENERATOR_CONFIG["max_retries"]
    fixtures_dir: str = GENERATOR_CONFIG["fixtures_dir"]
    max_in_flight: int = GENERATOR_CONFIG["max_in_flight"]
    runs_dir: str = PIPELINE_CONFIG["runs_dir"]
    modeling_budget: int = PIPELINE_CONFIG["modeling_budget"]
    solving_budget: int = PIPELINE_CONFIG["solving_budget"]
    inner_budget: int = PIPELINE_CONFIG["inner_budget"]
    seed: int = SIMULATION_CONFIG["seed"]
    steps: int = SIMULATION_CONFIG["steps"]
    seeds: int = SIMULATION_CONFIG["seeds"]
    weights: Tuple[float, float, float, float] = EVAL_CONFIG["weights"]
    log_level: str = APP_CONFIG["log_level"]

    @property
    def seed_list(self) -> Tuple[int, ...]:
        """Seeds used for candidate evaluation: seed, seed+1, ..."""
        return tuple(self.seed + offset for offset in range(self.seeds))

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["weights"] = list(self.weights)
        return data


# env var names exposed for each key; others are file/flag only
ENV_KEYS = {
    "backend": "SAGE_BACKEND",
    "endpoint": "SAGE_ENDPOINT",
    "model": "SAGE_MODEL",
    "timeout_s": "SAGE_TIMEOUT_S",
    "max_retries": "SAGE_MAX_RETRIES",
    "fixtures_dir": "SAGE_FIXTURES_DIR",
    "runs_dir": "SAGE_RUNS_DIR",
    "max_in_flight": "SAGE_MAX_IN_FLIGHT",
    "log_level": "SAGE_LOG_LEVEL",
}

_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key: str, value: Any) -> Any:
    """Coerce a raw value (env string, TOML value or flag) to the field's type"""
    kind = _FIELD_TYPES[key]
    try:
        if kind is int or kind == "int":
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError(value)
            return int(value)
        if kind is float or kind == "float":
            if isinstance(value, bool):
                raise ValueError(value)
            return float(value)
        if key == "weights":
            if isinstance(value, str):
                value = [part for part in value.split(",") if part.strip()]
            weights = tuple(float(v) for v in value)
            return weights
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(key, f"invalid value {value!r}") from None


def _validate(config: RunConfig):
    if config.backend not in BACKENDS:
        raise ConfigError("backend", f"must be one of {', '.join(BACKENDS)}, got {config.backend!r}")
    if config.backend == "remote" and not config.endpoint:
        raise ConfigError("endpoint", "the remote backend needs an endpoint URL")
    if config.timeout_s <= 0:
        raise ConfigError("timeout_s", "must be positive")
    if config.max_retries < 0:
        raise ConfigError("max_retries", "must be >= 0")
    if config.max_in_flight < 1:
        raise ConfigError("max_in_flight", "must be >= 1")
    for key in ("modeling_budget", "solving_budget", "inner_budget", "seeds"):
        if getattr(config, key) < 1:
            raise ConfigError(key, "must be >= 1")
    if config.steps < 0:
        raise ConfigError("steps", "must be >= 0")
    if len(config.weights) != 4 or any(w < 0 for w in config.weights):
        raise ConfigError("weights", "needs four non-negative numbers")
    if abs(sum(config.weights) - 1.0) > 1e-12:
        raise ConfigError("weights", f"must sum to 1, got {sum(config.weights)!r}")
    if config.log_level.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR"):
        raise ConfigError("log_level", f"unknown level {config.log_level!r}")


def read_config_file(path: Optional[str]) -> Dict[str, Any]:
    """
    Load sage.toml. An explicit path must exist; without one, ./sage.toml is
    used when present.
    """
    if path is None:
        candidate = Path(APP_CONFIG["config_file"])
        if not candidate.is_file():
            return {}
    else:
        candidate = Path(path)
        if not candidate.is_file():
            raise ConfigError("config", f"config file not found: {path}")
    try:
        with open(candidate, "rb") as handle:
            data = tomllib.load(handle)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"{candidate}: {exc}") from None
    unknown = sorted(set(data) - set(_FIELD_TYPES))
    if unknown:
        raise ConfigError(unknown[0], f"unknown key in {candidate}")
    return data


def load_run_config(flags: Optional[Mapping[str, Any]] = None,
                    config_path: Optional[str] = None,
                    environ: Optional[Mapping[str, str]] = None,
                    use_dotenv: bool = True) -> RunConfig:
    """Build and validate a RunConfig; flags with value None count as unset"""
    if use_dotenv and environ is None:
        load_dotenv(find_dotenv(usecwd=True))
    environ = os.environ if environ is None else environ

    values: Dict[str, Any] = {}
    for key, value in read_config_file(config_path).items():
        values[key] = _convert(key, value)
    for key, name in ENV_KEYS.items():
        if environ.get(name) not in (None, ""):
            values[key] = _convert(key, environ[name])
    for key, value in (flags or {}).items():
        if value is None:
            continue
        if key not in _FIELD_TYPES:
            raise ConfigError(key, "unknown setting")
        values[key] = _convert(key, value)

    config = RunConfig(**values)
    _validate(config)
    return config
