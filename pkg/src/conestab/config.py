"""Experiment configuration files.

A small line-based format::

    # comment
    [sweep]
    epsilon = 0.06, 0.6, 6.0
    dims = 1, 2, 3
    seeds = 1, 2, 3

One ``[section]`` per subcommand, ``key = value`` lines, comma-separated
lists and ``#`` comments.  Duplicate keys, unknown keys and unknown
sections are errors, reported with line numbers.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


def _positive(x):
    if isinstance(x, list):
        for v in x:
            _positive(v)
        return
    if not x > 0:
        raise ValueError("must be positive")


def _at_least_one(x):
    for v in x if isinstance(x, list) else [x]:
        if v < 1:
            raise ValueError("must be >= 1")


def _greater_than_one(x):
    if not x > 1:
        raise ValueError("must be greater than 1")


def _one_of(*choices):
    def check(x):
        for v in x if isinstance(x, list) else [x]:
            if v not in choices:
                raise ValueError(f"must be one of {', '.join(choices)}")

    return check


def _split(raw: str) -> list[str]:
    items = [s.strip() for s in raw.split(",")]
    if any(not s for s in items):
        raise ValueError("empty list item")
    return items


_CONVERTERS: dict[str, Callable[[str], Any]] = {
    "float": float,
    "int": int,
    "str": str,
    "float_list": lambda s: [float(v) for v in _split(s)],
    "int_list": lambda s: [int(v) for v in _split(s)],
    "str_list": _split,
}


@dataclass(frozen=True)
class Key:
    kind: str
    required: bool = False
    default: Any = None
    check: Callable[[Any], None] | None = None


_CONES = (
    "extended-real",
    "nonneg-extended-real",
    "real",
    "vector",
    "function",
    "two-point-pathology",
)

SCHEMA: dict[str, dict[str, Key]] = {
    "sweep": {
        "epsilon": Key("float_list", True, check=_positive),
        "dims": Key("int_list", True, check=_at_least_one),
        "seeds": Key("int_list", True),
        "noise": Key("str_list", default=["sine", "hash"], check=_one_of("sine", "hash", "constant", "none")),
        "tol": Key("float", default=1e-9, check=_positive),
        "max_iter": Key("int", default=40, check=_positive),
        "points": Key("int", default=512, check=_positive),
        "pairs": Key("int", default=1024, check=_positive),
        "radius": Key("float", default=4.0, check=_positive),
        "output": Key("str"),
        "format": Key("str", default="csv", check=_one_of("csv", "jsonl")),
    },
    "stabilize": {
        "expr": Key("str", True),
        "epsilon": Key("float", True, check=_positive),
        "dimension": Key("int", check=_at_least_one),
        "tol": Key("float", default=1e-9, check=_positive),
        "max_iter": Key("int", default=40, check=_positive),
        "radius": Key("float", default=5.0, check=_positive),
    },
    "banach": {
        "expr": Key("str", True),
        "epsilon": Key("float", True, check=_positive),
        "r": Key("float", default=1.5, check=_greater_than_one),
        "dimension": Key("int", check=_at_least_one),
        "tol": Key("float", default=1e-9, check=_positive),
        "max_iter": Key("int", default=40, check=_positive),
        "radius": Key("float", default=4.0, check=_positive),
    },
    "laws": {
        "cone": Key("str", True, check=_one_of(*_CONES)),
        "dimension": Key("int", check=_at_least_one),
        "seed": Key("int", default=0),
    },
}


@dataclass
class RunConfig:
    """Validated settings, one dict per section present in the file."""

    sections: dict[str, dict[str, Any]] = field(default_factory=dict)

    def section(self, name: str) -> dict[str, Any]:
        if name not in self.sections:
            raise ConfigError(f"config has no [{name}] section")
        return self.sections[name]

    def __contains__(self, name: str) -> bool:
        return name in self.sections


def parse_config(source: str | os.PathLike) -> RunConfig:
    """Parse config text, or the file at ``source`` when given a path object."""
    if isinstance(source, os.PathLike):
        try:
            text = Path(source).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {source}: {exc}") from exc
    else:
        text = source

    raw: dict[str, dict[str, tuple[str, int]]] = {}
    section_lines: dict[str, int] = {}
    current: str | None = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if body.startswith("["):
            if not body.endswith("]") or len(body) < 3:
                raise ConfigError(f"malformed section header {body!r}", lineno)
            current = body[1:-1].strip()
            if current not in SCHEMA:
                raise ConfigError(f"unknown section [{current}]", lineno)
            if current in section_lines:
                raise ConfigError(
                    f"duplicate section [{current}] (lines {section_lines[current]} and {lineno})",
                    lineno,
                )
            section_lines[current] = lineno
            raw[current] = {}
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'key = value', got {body!r}", lineno)
        if current is None:
            raise ConfigError("key outside of any [section]", lineno)
        key, value = (s.strip() for s in body.split("=", 1))
        if not key:
            raise ConfigError("missing key before '='", lineno)
        if key not in SCHEMA[current]:
            raise ConfigError(f"unknown key {key!r} in [{current}]", lineno)
        if key in raw[current]:
            first = raw[current][key][1]
            raise ConfigError(f"duplicate key {key!r} (lines {first} and {lineno})", lineno)
        raw[current][key] = (value, lineno)

    config = RunConfig()
    for name, entries in raw.items():
        config.sections[name] = _validate(name, entries, section_lines[name])
    return config


def _validate(name: str, entries: dict[str, tuple[str, int]], header_line: int) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for key, entry in SCHEMA[name].items():
        if key not in entries:
            if entry.required:
                raise ConfigError(f"missing required key {key!r} in [{name}]", header_line)
            out[key] = entry.default
            continue
        value, lineno = entries[key]
        try:
            converted = _CONVERTERS[entry.kind](value)
        except ValueError:
            raise ConfigError(
                f"{key}: expected {entry.kind.replace('_', ' ')}, got {value!r}", lineno
            ) from None
        if entry.check is not None:
            try:
                entry.check(converted)
            except ValueError as exc:
                raise ConfigError(f"{key} {exc}", lineno) from None
        out[key] = converted
    return out
