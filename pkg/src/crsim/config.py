"""Simulation configuration and its ``key = value`` file format.

Blank lines and ``#`` comments are ignored. Ranges are written ``lo, hi``;
the SU arrival pattern is ``batch`` or ``interval(<gap seconds>)``.
"""

from __future__ import annotations

import dataclasses
import os
import re
from dataclasses import dataclass, fields

SEED_ENV = "CRSIM_SEED"
DEFAULT_SEED = 20161

_INTERVAL = re.compile(r"^interval\s*\(\s*([0-9.eE+-]+)\s*\)$")


class ConfigError(ValueError):
    pass


@dataclass
class Config:
    # reference scenario
    num_channels: int = 50
    bandwidth_mhz: float = 5.0
    trans_power_mw: float = 1980.0
    idle_power_mw: float = 990.0
    circuit_power_mw: float = 210.0
    switch_power_mw: float = 1000.0
    switch_delay_us_per_mhz: float = 100.0
    sim_time_s: float = 3600.0
    frame_s: float = 0.1
    # calibration knobs the validation setup leaves open
    subframe_s: float = 0.05
    su_count: int = 10
    su_arrival: str = "batch"
    transient_offset_ms: float = 100.0
    pu_off_mean_range_s: tuple[float, float] = (1.0, 10.0)
    pu_on_mean_range_s: tuple[float, float] = (1.0, 10.0)
    # experiment
    rounds: int = 40
    seed: int = DEFAULT_SEED
    eq1_mode: str = "additive"
    gate_on_connection: bool = False
    tcp_port: int = 9000
    selection_metric: str = "availability"
    timestamp_prefix: bool = False
    model_all_pu: bool = False
    tie_break: str = "canonical"

    def validate(self) -> "Config":
        positive = (
            "bandwidth_mhz", "trans_power_mw", "idle_power_mw", "circuit_power_mw",
            "switch_power_mw", "switch_delay_us_per_mhz", "sim_time_s", "frame_s",
            "subframe_s", "transient_offset_ms",
        )
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in ("num_channels", "su_count", "rounds"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.num_channels < 2:
            raise ConfigError("num_channels must be >= 2 (primary and backup)")
        for name in ("pu_off_mean_range_s", "pu_on_mean_range_s"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ConfigError(f"{name} must satisfy 0 < lo <= hi, got {lo}, {hi}")
        if self.eq1_mode not in ("additive", "literal"):
            raise ConfigError(f"eq1_mode must be additive or literal, got {self.eq1_mode!r}")
        if self.selection_metric not in ("availability", "off_period"):
            raise ConfigError(f"selection_metric must be availability or off_period, got {self.selection_metric!r}")
        if self.tie_break not in ("canonical", "random"):
            raise ConfigError(f"tie_break must be canonical or random, got {self.tie_break!r}")
        if not 0 < self.tcp_port < 65536:
            raise ConfigError(f"tcp_port out of range: {self.tcp_port}")
        self.arrival_gap_s  # validates su_arrival
        return self

    @property
    def arrival_gap_s(self) -> float:
        if self.su_arrival == "batch":
            return 0.0
        m = _INTERVAL.match(self.su_arrival)
        if not m:
            raise ConfigError(f"su_arrival must be batch or interval(<seconds>), got {self.su_arrival!r}")
        gap = float(m.group(1))
        if gap < 0:
            raise ConfigError("su_arrival gap must be >= 0")
        return gap

    # integer-microsecond views used by the model
    @property
    def horizon_us(self) -> int:
        return round(self.sim_time_s * 1_000_000)

    @property
    def subframe_us(self) -> int:
        return round(self.subframe_s * 1_000_000)

    @property
    def transient_offset_us(self) -> int:
        return round(self.transient_offset_ms * 1_000)

    @property
    def arrival_gap_us(self) -> int:
        return round(self.arrival_gap_s * 1_000_000)

    def replace(self, **changes) -> "Config":
        return dataclasses.replace(self, **changes).validate()


_FIELDS = {f.name: f for f in fields(Config)}


def _convert(name: str, raw: str):
    kind = _FIELDS[name].type
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw, 0)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind.startswith("tuple"):
            parts = [p for p in re.split(r"[,\s]+", raw.strip("[]() ")) if p]
            if len(parts) != 2:
                raise ValueError(f"expected 'lo, hi', got {raw!r}")
            return (float(parts[0]), float(parts[1]))
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from None
    return raw


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _convert(key, raw)
            Config(**{key: values[key]}).validate()
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
    return values


def parse_config(path=None, overrides: dict | None = None, env=None) -> Config:
    """Defaults < ``CRSIM_SEED`` < config file < ``overrides`` (CLI flags)."""
    env = os.environ if env is None else env
    values: dict = {}
    if env.get(SEED_ENV):
        try:
            values["seed"] = int(env[SEED_ENV], 0)
        except ValueError:
            raise ConfigError(f"{SEED_ENV} is not an integer: {env[SEED_ENV]!r}") from None
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        values.update(parse_config_text(text, str(path)))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _FIELDS:
            raise ConfigError(f"unknown option {key!r}")
        values[key] = value
    return Config(**values).validate()


def dump_config(cfg: Config) -> str:
    lines = []
    for f in fields(Config):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = f"{v[0]:g}, {v[1]:g}"
        elif isinstance(v, bool):
            v = "true" if v else "false"
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
