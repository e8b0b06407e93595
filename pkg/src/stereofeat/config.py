"""Run configuration: one INI section, strict keys, command-line overrides win."""

from __future__ import annotations

import configparser
import dataclasses
import os
from dataclasses import dataclass
from importlib import resources

from .brief import DEFAULT_SEED, SamplePattern, default_pattern, read_pattern
from .matcher import MatchConfig
from .surf import FILTER_SIZES, SCALES, ScaleTable

SECTION = "stereofeat"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    threshold: int
    hamming_threshold: int = 32
    epsilon: int = 1
    max_disparity: int = 128
    cores: int = 8
    pattern: str = ""  # empty selects the shipped pattern
    seed: int = DEFAULT_SEED
    filter_sizes: tuple[int, ...] = FILTER_SIZES
    out: str = "."
    correspondence_tol: float = 3.0
    threshold_step: int = 4
    clock_hz: int = 100_000_000

    def match_config(self) -> MatchConfig:
        return MatchConfig(self.hamming_threshold, self.epsilon, self.max_disparity, self.cores)

    def scale_table(self) -> ScaleTable:
        return ScaleTable(SCALES, self.filter_sizes)

    def load_pattern(self) -> SamplePattern:
        return read_pattern(self.pattern) if self.pattern else default_pattern()


FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(key: str, raw):
    if raw is None:
        return None
    if key == "filter_sizes":
        if isinstance(raw, str):
            raw = [p for p in raw.replace(",", " ").split() if p]
        return tuple(int(v) for v in raw)
    if key in ("pattern", "out"):
        return str(raw)
    if key == "correspondence_tol":
        return float(raw)
    # ints, allowing 1e14-style spellings only when exact
    if isinstance(raw, str):
        raw = raw.strip().replace("_", "")
        try:
            return int(raw, 0)
        except ValueError:
            f = float(raw)
            if not f.is_integer():
                raise
            return int(f)
    return int(raw)


def parse_config(text: str, source: str = "<config>") -> dict:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    extra = [s for s in parser.sections() if s != SECTION]
    if extra:
        raise ConfigError(f"{source}: unknown section(s) {extra}")
    values = {}
    if parser.has_section(SECTION):
        for key, raw in parser.items(SECTION):
            if key not in FIELDS:
                raise ConfigError(f"{source}: unknown key {key!r}")
            try:
                values[key] = _coerce(key, raw)
            except ValueError:
                raise ConfigError(f"{source}: bad value for {key!r}: {raw!r}") from None
    return values


def default_config_text() -> str:
    return resources.files("stereofeat").joinpath("data/default.ini").read_text()


def load_config(path: str | os.PathLike | None = None, overrides: dict | None = None) -> RunConfig:
    """Shipped defaults, then the file at ``path``, then non-None ``overrides``."""
    values = parse_config(default_config_text(), "default.ini")
    if path is not None:
        with open(path) as fh:
            values.update(parse_config(fh.read(), str(path)))
    for key, raw in (overrides or {}).items():
        if key not in FIELDS:
            raise ConfigError(f"unknown override {key!r}")
        if raw is not None:
            values[key] = _coerce(key, raw)
    cfg = RunConfig(**values)
    if cfg.threshold <= 0:
        raise ConfigError("detector threshold must be positive")
    if cfg.threshold_step < 1:
        raise ConfigError("threshold_step must be >= 1")
    try:
        cfg.match_config()
        cfg.scale_table()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg
