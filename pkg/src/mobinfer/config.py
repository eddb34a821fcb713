"""Flat ``key=value`` config files mapped onto dataclasses."""

from __future__ import annotations

import dataclasses
import types
import typing
from pathlib import Path

from mobinfer.errors import ConfigError


def parse_key_values(text: str) -> dict[str, str]:
    """Parse ``key=value`` lines. ``#`` starts a comment; blank lines are ignored."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def read_config(path) -> dict[str, str]:
    try:
        return parse_key_values(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def _convert(raw: str, tp, key: str):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin in (typing.Union, types.UnionType):
        if raw.lower() in ("", "none"):
            return None
        tp = next(a for a in args if a is not type(None))
        return _convert(raw, tp, key)
    try:
        if tp is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if tp is int:
            return int(raw)
        if tp is float:
            return float(raw)
        if tp is str:
            return raw
        if typing.get_origin(tp) is tuple:
            # tuple of (x, y) points written as "x:y;x:y"
            if not raw:
                return ()
            return tuple(
                tuple(float(c) for c in item.split(":")) for item in raw.split(";") if item
            )
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    raise ConfigError(f"unsupported config type for {key}: {tp}")


def convert_values(cls, values: dict[str, str], aliases: dict[str, str] | None = None) -> dict:
    """Map string ``values`` onto typed keyword arguments for dataclass ``cls``."""
    aliases = aliases or {}
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    out = {}
    for key, raw in values.items():
        name = aliases.get(key, key)
        if name not in names:
            raise ConfigError(f"unknown config key {key!r}")
        out[name] = _convert(raw, hints[name], key)
    return out


def build(cls, values: dict[str, str], aliases: dict[str, str] | None = None, **base):
    """Construct ``cls`` from ``base`` keyword arguments plus string overrides.

    Fields left out keep their defaults, so derived defaults are recomputed.
    """
    kwargs = dict(base)
    kwargs.update(convert_values(cls, values, aliases))
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
