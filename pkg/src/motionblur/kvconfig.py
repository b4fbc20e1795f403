"""Flat ``key = value`` configuration files.

Blank lines and ``#`` comments are ignored; ``:`` is accepted in place of
``=``. Values stay strings; callers convert and validate them.
"""

from __future__ import annotations

import os
from typing import Mapping

from .errors import ConfigError, UnknownKeyError


def parse_kv(text: str, source: str | None = None) -> dict[str, str]:
    out: dict[str, str] = {}
    where = f"{source}:" if source else "line "
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":" if ":" in line else None
        if sep is None:
            raise ConfigError(f"{where}{n}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split(sep, 1))
        if not key:
            raise ConfigError(f"{where}{n}: empty key")
        if key in out:
            raise ConfigError(f"{where}{n}: duplicate key {key!r}")
        out[key] = value
    return out


def read_kv(path: str | os.PathLike) -> dict[str, str]:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {os.fspath(path)!r}: {exc.strerror}") from None
    return parse_kv(text, os.fspath(path))


def check_keys(values: Mapping[str, str], allowed, source: str | None = None) -> None:
    for key in values:
        if key not in allowed:
            raise UnknownKeyError(key, source)


def as_float(values: Mapping[str, str], key: str, default=None) -> float:
    if key not in values:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return float(values[key])
    except ValueError:
        raise ConfigError(f"key {key!r}: not a number: {values[key]!r}") from None


def as_int(values: Mapping[str, str], key: str, default=None) -> int:
    x = as_float(values, key, default)
    if x != int(x):
        raise ConfigError(f"key {key!r}: expected an integer, got {values[key]!r}")
    return int(x)


def as_bool(values: Mapping[str, str], key: str, default: bool = False) -> bool:
    if key not in values:
        return default
    v = values[key].strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"key {key!r}: expected a boolean, got {values[key]!r}")
