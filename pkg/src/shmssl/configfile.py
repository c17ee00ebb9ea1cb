"""Flat key=value configuration files with environment-variable overrides.

A config file is plain text: one `key = value` per line, `#` comments and
blank lines ignored. Environment variables named SHMSSL_<KEY> (upper-cased
key) override file values; explicit command-line flags override both.
"""

from __future__ import annotations

import os
from pathlib import Path

from .errors import ConfigError

ENV_PREFIX = "SHMSSL_"


def parse_config_file(path) -> dict[str, str]:
    settings: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        settings[key.strip().lower()] = value.strip()
    return settings


def env_overrides(environ=None) -> dict[str, str]:
    environ = os.environ if environ is None else environ
    out = {}
    for name, value in environ.items():
        if name.startswith(ENV_PREFIX) and len(name) > len(ENV_PREFIX):
            out[name[len(ENV_PREFIX):].lower()] = value
    return out


def load_settings(config_path=None, environ=None) -> dict[str, str]:
    settings = parse_config_file(config_path) if config_path else {}
    settings.update(env_overrides(environ))
    return settings


def coerce(value: str, kind):
    if kind is bool:
        lowered = value.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"cannot interpret {value!r} as a boolean")
    try:
        return kind(value)
    except ValueError as exc:
        raise ConfigError(f"cannot interpret {value!r} as {kind.__name__}") from exc
