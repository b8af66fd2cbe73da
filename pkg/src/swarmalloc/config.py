"""Experiment configuration files.

The format is one ``key = value`` pair per line; ``#`` starts a comment.
Keys that describe a swept quantity accept a comma-separated list and the
sweep runs their cartesian product. See ``configs/full_sweep.cfg``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields
from pathlib import Path

from .tasks import ConfigurationError, HomeRect

ALGORITHMS = ("RW", "HHTA", "PROP")


class ConfigError(ConfigurationError):
    def __init__(self, message: str, line: int | None = None, source: str = "<config>"):
        self.line = line
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)


@dataclass
class ExperimentConfig:
    width: int = 50
    height: int = 50
    home: HomeRect | None = None
    agents: int = 100
    total_demand: int = 80
    demands: tuple[int, ...] | None = None
    influence_radius: int = 2
    algorithm: list[str] = field(default_factory=lambda: ["HHTA"])
    T: list[int] = field(default_factory=lambda: [2, 3, 4, 5, 6, 7, 8, 9, 10, 20, 30])
    P_c: list[float] = field(default_factory=lambda: [0.3])
    P_e: list[float] = field(default_factory=lambda: [2 / 3])
    r_m: list[float] = field(default_factory=lambda: [1 / 6])
    d_p: list[float] = field(default_factory=lambda: [25.0])
    r_p: list[int] = field(default_factory=lambda: [3])
    levy_exponent: float = 2.0
    trials: int = 20
    base_seed: int = 0
    max_rounds: int = 50_000
    output: str = "results.csv"
    deployment_offset: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.home is None:
            self.home = HomeRect.centered(self.width, self.height, 3)

    def validate(self) -> "ExperimentConfig":
        if self.width < 1 or self.height < 1:
            raise ConfigError("grid dimensions must be positive")
        h = self.home
        if not (0 <= h.x0 <= h.x1 < self.width and 0 <= h.y0 <= h.y1 < self.height):
            raise ConfigError(f"home rectangle {h} lies outside the grid")
        if self.agents < 1:
            raise ConfigError("agents must be at least 1")
        if self.total_demand < 1:
            raise ConfigError("total_demand must be at least 1")
        if self.total_demand > self.agents:
            raise ConfigError("total_demand cannot exceed the number of agents")
        if self.influence_radius < 0:
            raise ConfigError("influence_radius must be non-negative")
        for a in self.algorithm:
            if a not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {a!r}; expected one of {ALGORITHMS}")
        for t in self.T:
            if t < 1 or t > self.total_demand:
                raise ConfigError(f"T={t} must lie in [1, total_demand]")
        for name in ("P_c", "P_e", "r_m"):
            for p in getattr(self, name):
                if not 0.0 <= p <= 1.0:
                    raise ConfigError(f"{name}={p} is not a probability")
        for d in self.d_p:
            if d < 0:
                raise ConfigError(f"d_p={d} must be non-negative")
        if "PROP" in self.algorithm:
            for r in self.r_p:
                if r < 1:
                    raise ConfigError(f"r_p={r} must be at least 1")
        if self.levy_exponent <= 1.0:
            raise ConfigError("levy_exponent must exceed 1")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.max_rounds < 1:
            raise ConfigError("max_rounds must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        return self


_SQRT = re.compile(r"^\s*([0-9.]+)?\s*\*?\s*sqrt\(\s*([0-9.]+)\s*\)\s*$")


def _number(text: str) -> float:
    m = _SQRT.match(text)
    if m:
        return float(m.group(1) or 1.0) * math.sqrt(float(m.group(2)))
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def _int(text: str) -> int:
    value = _number(text)
    if value != int(value):
        raise ValueError(f"{text!r} is not an integer")
    return int(value)


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"{text!r} is not a boolean")


def _list(conv):
    return lambda text: [conv(part.strip()) for part in text.split(",") if part.strip()]


def _home(text: str) -> HomeRect:
    parts = [_int(p) for p in text.split(",")]
    if len(parts) != 4:
        raise ValueError("home needs x0, y0, x1, y1")
    return HomeRect(*parts)


_PARSERS = {
    "width": _int,
    "height": _int,
    "home": _home,
    "agents": _int,
    "total_demand": _int,
    "demands": lambda t: tuple(_list(_int)(t)),
    "influence_radius": _int,
    "algorithm": _list(lambda s: s.upper()),
    "T": _list(_int),
    "P_c": _list(_number),
    "P_e": _list(_number),
    "r_m": _list(_number),
    "d_p": _list(_number),
    "r_p": _list(_int),
    "levy_exponent": _number,
    "trials": _int,
    "base_seed": _int,
    "max_rounds": _int,
    "output": str.strip,
    "deployment_offset": _bool,
    "workers": _int,
}
assert set(_PARSERS) == {f.name for f in fields(ExperimentConfig)}


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno, source)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(f"unknown key {key!r}", lineno, source)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", lineno, source)
        try:
            values[key] = _PARSERS[key](value)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", lineno, source) from None
    lines = {k: i for i, k in _key_lines(text)}
    cfg = ExperimentConfig(**values)
    try:
        return cfg.validate()
    except ConfigError as exc:
        # point at the offending line when the message names a key
        for key, lineno in lines.items():
            if re.search(rf"\b{re.escape(key)}\b", str(exc)):
                raise ConfigError(str(exc).split(": ", 1)[1], lineno, source) from None
        raise ConfigError(str(exc).split(": ", 1)[1], None, source) from None


def _key_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if "=" in line:
            yield lineno, line.split("=", 1)[0].strip()


def parse_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    return parse_config_text(path.read_text(), str(path))
