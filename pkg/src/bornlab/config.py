"""Flat key/value experiment configs.

One `key = value` pair per line; `#` starts a comment; lists use
`key = [a, b, c]`.  Values are typed by inspection (int, float, bool,
otherwise string).  No nesting: configs double as experiment provenance and
stay trivially parseable from any language.
"""
from __future__ import annotations

from pathlib import Path

from .errors import ConfigError

Value = int | float | bool | str
ConfigDict = dict[str, Value | list[Value]]


def _parse_scalar(token: str) -> Value:
    token = token.strip()
    if token.lower() in ("true", "false"):
        return token.lower() == "true"
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        pass
    return token.strip("'\"")


def parse_config_text(text: str, source: str = "<config>") -> ConfigDict:
    config: ConfigDict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ConfigError(f"{source}:{lineno}: empty key or value")
        if key in config:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        if value.startswith("["):
            if not value.endswith("]"):
                raise ConfigError(f"{source}:{lineno}: unterminated list")
            items = [t for t in value[1:-1].split(",") if t.strip()]
            if not items:
                raise ConfigError(f"{source}:{lineno}: empty list")
            config[key] = [_parse_scalar(t) for t in items]
        else:
            config[key] = _parse_scalar(value)
    return config


def load_config(path: str | Path) -> ConfigDict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"), source=str(path))


def require(config: ConfigDict, key: str) -> Value | list[Value]:
    if key not in config:
        raise ConfigError(f"missing required config key {key!r}")
    return config[key]


def as_list(value: Value | list[Value]) -> list[Value]:
    return value if isinstance(value, list) else [value]
