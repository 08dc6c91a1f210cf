"""Flat ``key = value`` configuration documents.

Keys are namespaced by the dataclass they configure::

    # comment
    sim.noise_sd = 0.05
    train.epochs = 50
    model.hidden_size = 64
    pid.kp = 1.0

Unknown namespaces or fields are rejected.
"""

from __future__ import annotations

from dataclasses import fields, replace

from .lung_sim import SimConfig
from .pid import PidGains
from .train_eval import ModelConfig, TrainConfig

SECTIONS = {
    "sim": SimConfig,
    "train": TrainConfig,
    "model": ModelConfig,
    "pid": PidGains,
}


class ConfigError(ValueError):
    pass


def parse_text(text: str, origin: str = "<config>") -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


def load_file(path) -> dict:
    try:
        with open(path) as fh:
            return parse_text(fh.read(), str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None


def _coerce(raw, default, key):
    if not isinstance(raw, str):
        return raw
    try:
        if isinstance(default, bool):
            if raw.lower() not in ("true", "false", "1", "0"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {type(default).__name__}") from None
    return raw


def build(values: dict) -> dict:
    """Turn a flat mapping into one config object per section.

    Returns ``{"sim": SimConfig, "train": TrainConfig, ...}``; missing keys
    keep their defaults.
    """
    per_section = {name: {} for name in SECTIONS}
    for key, raw in values.items():
        section, _, name = key.partition(".")
        if section not in SECTIONS or not name:
            raise ConfigError(f"unknown config key {key!r}")
        known = {f.name for f in fields(SECTIONS[section])}
        if name not in known:
            raise ConfigError(f"unknown config key {key!r}")
        per_section[section][name] = raw

    out = {}
    for section, cls in SECTIONS.items():
        default = cls()
        kwargs = {name: _coerce(raw, getattr(default, name), f"{section}.{name}")
                  for name, raw in per_section[section].items()}
        try:
            out[section] = replace(default, **kwargs)
        except ValueError as exc:
            raise ConfigError(f"{section}: {exc}") from None
    return out
