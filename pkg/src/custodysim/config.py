"""Line-oriented ``key = value`` configuration files.

Keys mirror the CLI flag names with dashes replaced by underscores;
explicit CLI flags always win over file values.
"""
from __future__ import annotations

from pathlib import Path

from .simulation import EQUIVOCATE, SILENT, ConfigError, ExperimentConfig

_FIELD_PARSERS = {
    "period": float,
    "gas_limit": int,
    "validators": int,
    "bandwidth": float,
    "base_delay": float,
    "jitter": float,
    "prepare_size": int,
    "commit_size": int,
    "preprepare_overhead": int,
    "header_size": int,
    "genesis_size": int,
    "round_timeout": float,
    "seed": int,
    "periods": int,
    "drain": lambda s: s.lower() in ("1", "true", "yes", "on"),
    "reject_invalid_at_mempool": lambda s: s.lower() in ("1", "true", "yes", "on"),
    "byzantine": lambda s: parse_byzantine(s),
}


def parse_byzantine(spec: str) -> tuple:
    """Parse ``IDX:BEHAVIOR[,IDX:BEHAVIOR...]``, e.g. ``1:silent,2:equivocate``."""
    if not spec.strip():
        return ()
    out = []
    for part in spec.split(","):
        try:
            idx, kind = part.strip().split(":")
            idx = int(idx)
        except ValueError as err:
            raise ConfigError(f"bad byzantine entry {part!r}") from err
        if kind not in (SILENT, EQUIVOCATE):
            raise ConfigError(f"unknown byzantine behavior {kind!r}")
        out.append((idx, kind))
    return tuple(out)


def read_config_file(path: Path) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELD_PARSERS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _FIELD_PARSERS[key](value)
        except ConfigError:
            raise
        except (ValueError, TypeError) as err:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}") from err
    return values


def build_config(file_values: dict, overrides: dict) -> ExperimentConfig:
    """Merge file values with CLI overrides (overrides win)."""
    merged = dict(file_values)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    try:
        config = ExperimentConfig(**merged)
    except TypeError as err:
        raise ConfigError(str(err)) from err
    config.validate()
    return config
