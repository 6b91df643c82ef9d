"""Flat ``key = value`` configuration with sweep axes.

A value containing commas is a list of axis values; ``start:stop:step`` is an
inclusive arithmetic range. Anything after ``#`` is a comment. Command-line
``--set key=value`` overrides use the same syntax and win over file entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable


class UsageError(ValueError):
    """Bad configuration or command line; maps to exit code 1."""


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> parser; every parameter is a scalar or an enum
KEYS: dict[str, Callable[[str], Any]] = {
    "command": str,
    # population and process
    "N": int, "M": int, "u": float, "v": float, "alpha": float, "omega": float,
    "pattern": str,
    # simulation run length and estimator
    "generations": int, "burn_in": int, "sample_every": int, "batches": int,
    "exclude_reproducer_from_death": _bool,
    "replicates": int, "seed": int,
    # replicator solver
    "S": int, "layout": str, "method": str, "tol": float, "max_steps": int, "damping": float,
    # sweep budget
    "max_tasks": int,
}

# keys that must stay scalar: they describe the run, not a parameter point
SCALAR_ONLY = {"command", "replicates", "seed", "max_tasks", "batches"}

DEFAULTS: dict[str, Any] = {
    "command": None,
    "N": 50, "M": 9, "u": 0.1, "v": 0.1, "alpha": 1.0, "omega": 0.001, "pattern": "global",
    "generations": 1_000_000, "burn_in": None, "sample_every": 1, "batches": 32,
    "exclude_reproducer_from_death": False,
    "replicates": 1, "seed": 0,
    "S": 30, "layout": "empathetic", "method": "damped_fixed_point", "tol": 1e-10,
    "max_steps": 5_000_000, "damping": 0.5,
    "max_tasks": 10_000,
}


def _clean(x: float) -> float:
    """Drop the binary noise of accumulated steps (0.30000000000000004 -> 0.3)."""
    return float(f"{x:.12g}")


def expand_range(text: str, parse: Callable[[str], Any]) -> list:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"range must be start:stop:step, got {text!r}")
    start, stop, step = (parse(p) for p in parts)
    if step == 0 or (stop - start) * step < 0:
        raise ValueError(f"range {text!r} never reaches its end")
    n = math.floor((stop - start) / step + 1e-9)
    values = [start + i * step for i in range(n + 1)]
    return [parse(str(_clean(x))) if parse is float else x for x in values]


def parse_value(key: str, text: str) -> list:
    """Always a list; length one for scalars."""
    if key not in KEYS:
        raise UsageError(f"unknown configuration key {key!r}")
    parse = KEYS[key]
    text = text.strip()
    try:
        if "," in text:
            values = [parse(t.strip()) for t in text.split(",") if t.strip()]
        elif ":" in text and parse in (int, float):
            values = expand_range(text, parse)
        else:
            values = [parse(text)]
    except ValueError as exc:
        raise UsageError(f"bad value for {key!r}: {exc}") from None
    if not values:
        raise UsageError(f"empty value for {key!r}")
    if key in SCALAR_ONLY and len(values) > 1:
        raise UsageError(f"{key!r} cannot be swept")
    return values


def parse_lines(lines, origin: str = "<config>") -> dict[str, list]:
    out: dict[str, list] = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{origin}:{lineno}: expected key = value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = parse_value(key, value)
    return out


def parse_override(text: str) -> tuple[str, list]:
    if "=" not in text:
        raise UsageError(f"--set expects key=value, got {text!r}")
    key, value = (s.strip() for s in text.split("=", 1))
    return key, parse_value(key, value)


@dataclass
class RunConfig:
    """Resolved configuration: scalar settings plus the swept axes in file order."""

    values: dict[str, list] = field(default_factory=dict)

    @classmethod
    def build(cls, path: str | Path | None = None, text: str | None = None,
              overrides: list[str] = ()) -> "RunConfig":
        values: dict[str, list] = {}
        if text is not None:
            values.update(parse_lines(text.splitlines()))
        if path is not None:
            try:
                content = Path(path).read_text(encoding="utf-8")
            except OSError as exc:
                raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
            values.update(parse_lines(content.splitlines(), str(path)))
        for item in overrides:
            key, vals = parse_override(item)
            values[key] = vals
        return cls(values)

    def get(self, key: str):
        vals = self.values.get(key)
        return DEFAULTS[key] if vals is None else vals[0]

    def set(self, key: str, value) -> None:
        parse_value(key, str(value))  # validates the key
        self.values[key] = [value]

    @property
    def axes(self) -> list[tuple[str, list]]:
        return [(k, v) for k, v in self.values.items() if len(v) > 1]

    def base(self) -> dict[str, Any]:
        out = dict(DEFAULTS)
        out.update({k: v[0] for k, v in self.values.items()})
        return out
